import json

import numpy as np
import pytest

from keytrace.events import KeyKind, dumps_session
from keytrace.segmenter import segment
from keytrace.simulator import (
    ErrorKind,
    LayoutError,
    TypistProfile,
    batch,
    ledger_final,
    load_phrases,
    neighbours,
    qwerty_layout,
    simulate,
)
from keytrace.stream import reconstruct

PHRASES = load_phrases()


def transcribed(session):
    (t,) = segment(session, idle_timeout_ms=10**9)
    return reconstruct(t).transcribed


def test_zero_rates_type_the_target():
    s, ledger = simulate("the quick brown fox", TypistProfile(), seed=3)
    assert transcribed(s) == "the quick brown fox"
    assert ledger.injected == () and ledger.corrected_total == ledger.uncorrected_total == 0


def test_forced_substitutions():
    prof = TypistProfile(substitution_rate=1.0, correction_probability=0.0, min_error_gap=0)
    _, ledger = simulate("hello", prof, seed=1)
    assert ledger.total(ErrorKind.SUBSTITUTION, corrected=False) == 5
    assert ledger.total() == 5


def test_default_gap_spaces_errors_out():
    prof = TypistProfile(substitution_rate=1.0)
    _, ledger = simulate("abcdefghij", prof, seed=1)
    assert [i.position for i in ledger.injected] == [0, 3, 6, 9]


def test_same_seed_same_bytes():
    prof = TypistProfile(substitution_rate=0.1, omission_rate=0.05, correction_probability=0.5, suggestion_use_rate=0.2)
    a, la = simulate(PHRASES[0], prof, seed=11)
    b, lb = simulate(PHRASES[0], prof, seed=11)
    assert dumps_session(a) == dumps_session(b)
    assert json.dumps(la.to_dict()) == json.dumps(lb.to_dict())
    c, _ = simulate(PHRASES[0], prof, seed=12)
    assert dumps_session(a) != dumps_session(c)


def test_layout_must_cover_target():
    layout = {k: v for k, v in qwerty_layout().items() if k != "z"}
    with pytest.raises(LayoutError):
        simulate("zebra", TypistProfile(), seed=0, keyboard_layout=layout)
    with pytest.raises(ValueError):
        simulate("", TypistProfile(), seed=0)


@pytest.mark.parametrize(
    "kw",
    [
        {"substitution_rate": -0.1},
        {"substitution_rate": 0.6, "omission_rate": 0.5},
        {"correction_probability": 1.5},
        {"target_wpm": 0},
        {"min_error_gap": -1},
    ],
)
def test_profile_ranges(kw):
    with pytest.raises(ValueError):
        TypistProfile(**kw)


def test_profile_round_trip(tmp_path):
    prof = TypistProfile(target_wpm=40, substitution_rate=0.05, min_error_gap=1)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(prof.to_dict()))
    assert TypistProfile.load(path) == prof


def test_batch_seeds_and_repeatability():
    prof = TypistProfile(substitution_rate=0.1)
    out = batch(PHRASES[:2], prof, base_seed=100, n=3)
    assert [s.session_id for s, _ in out] == ["sim-100", "sim-101", "sim-102"]
    assert [l.true_intent for _, l in out] == [PHRASES[0], PHRASES[1], PHRASES[0]]
    again = batch(PHRASES[:2], prof, base_seed=100, n=3)
    assert [dumps_session(s) for s, _ in out] == [dumps_session(s) for s, _ in again]
    assert all(not l.injected for _, l in batch(PHRASES, TypistProfile(), 0, 10))
    with pytest.raises(ValueError):
        batch(PHRASES, prof, 0, 0)


def test_reconstruction_matches_ledger_final():
    rng = np.random.default_rng(5)
    for seed in range(300):
        prof = TypistProfile(
            substitution_rate=rng.uniform(0, 0.15),
            insertion_rate=rng.uniform(0, 0.15),
            omission_rate=rng.uniform(0, 0.15),
            correction_probability=rng.uniform(0, 1),
            suggestion_use_rate=rng.uniform(0, 0.5),
        )
        s, ledger = simulate(PHRASES[seed % len(PHRASES)], prof, seed)
        assert transcribed(s) == ledger_final(ledger), seed


def test_substitution_frequency_within_tolerance():
    rate = 0.08
    prof = TypistProfile(substitution_rate=rate)
    subs = draws = 0
    for s, ledger in batch(PHRASES, prof, base_seed=0, n=500):
        subs += ledger.total(ErrorKind.SUBSTITUTION)
        draws += ledger.draws
    assert abs(subs / draws - rate) <= 0.2 * rate


def test_wrong_keys_are_neighbours():
    layout = qwerty_layout()
    prof = TypistProfile(substitution_rate=0.3)
    for seed in range(50):
        _, ledger = simulate(PHRASES[seed % len(PHRASES)], prof, seed)
        for inj in ledger.injected:
            ch = ledger.true_intent[inj.position]
            assert inj.char != ch
            assert inj.char in neighbours(layout, ch) or not neighbours(layout, ch)


def test_timing_and_touch_points():
    prof = TypistProfile(hold_mean_ms=5, hold_sd_ms=20, flight_mean_ms=5, flight_sd_ms=20)
    s, _ = simulate(PHRASES[3], prof, seed=9)
    prev_up = None
    for ev in s.key_events:
        assert ev.up_ts_ms - ev.down_ts_ms >= 1
        if prev_up is not None:
            assert ev.down_ts_ms - prev_up >= 1
        prev_up = ev.up_ts_ms
        x, y = ev.touch_trace[0].x_px, ev.touch_trace[0].y_px
        assert abs(x - ev.key_centroid_x_px) <= ev.key_width_px / 2
        assert abs(y - ev.key_centroid_y_px) <= ev.key_height_px / 2


def test_suggestions_are_selected_from_snapshots():
    prof = TypistProfile(suggestion_use_rate=1.0)
    s, ledger = simulate("their garden looks lovely", prof, seed=2)
    picks = [e for e in s.key_events if e.key.kind is KeyKind.SUGGESTION_SELECT]
    # the last word is typed out: a suggestion would append a space
    assert len(picks) == ledger.suggestions_used == 3
    assert transcribed(s) == "their garden looks lovely"
