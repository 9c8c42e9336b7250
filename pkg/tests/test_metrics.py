import math
from dataclasses import replace

import pytest

from keytrace.alignment import align
from keytrace.events import CollectionMode, DeviceInfo, Key, MotionKind, TouchSample
from keytrace.intent import Dictionary
from keytrace.metrics import (
    ABSENT,
    ErrorClassification,
    LetterErrors,
    MetricsOptions,
    classify_errors,
    compute_session_metrics,
    error_rates,
    metrics_from_dict,
    metrics_to_dict,
    speed,
    touch_dynamics,
)
from keytrace.segmenter import segment
from keytrace.stream import reconstruct

from conftest import key_event, make_session

DICT = Dictionary({"the": 100, "quick": 50, "fox": 30, "hello": 20, "world": 10})


def trial_of(session, mode=CollectionMode.IMPLICIT):
    (t,) = segment(session, idle_timeout_ms=10**9, mode=mode)
    return t


def classify(keys, intent, **kw):
    r = reconstruct(trial_of(make_session(keys, **kw)))
    return classify_errors(r, intent)


# -- speed ---------------------------------------------------------------------


def test_speed_examples():
    assert speed(10, 2, 12.0).wpm == pytest.approx(10.0)
    assert speed(5, 1, 60.0).wpm == pytest.approx(1.0)
    s = speed(20, 4, 8.0)
    assert s.words_per_second == 0.5 and s.seconds_per_word == 2.0


def test_zero_length_trial_has_no_speed():
    assert speed(1, 1, 0.0) == (None, None, None)
    assert speed(0, 0, 5.0).seconds_per_word is None


# -- error classes -------------------------------------------------------------


def test_corrected_slip():
    c = classify(["h", "e", "l", "x", "⌫", "l", "o"], "hello")
    assert (c.IF, c.INF, c.C, c.F, c.correction_attempts) == (1, 0, 5, 1, 1)
    assert c.erased == 1
    assert error_rates(c).corrected_er == 1.0


def test_uncorrected_omission():
    c = classify(list("helo"), "hello")
    assert (c.INF, c.IF, c.omissions) == (1, 0, 1)
    rates = error_rates(c)
    assert rates.uncorrected_er == pytest.approx(0.2)
    assert rates.omission_er == pytest.approx(0.2)
    assert rates.omission_by_letter["l"] == pytest.approx(0.5)


def test_perfect_transcription():
    c = classify(list("hello"), "hello")
    assert (c.C, c.INF, c.IF, c.F) == (5, 0, 0, 0)
    assert all(v == 0 for v in error_rates(c)[:6])


def test_correctly_typed_then_erased_is_not_an_error():
    # "hel" erased and retyped: nothing wrong was erased
    c = classify(["h", "e", "l", "⌫", "l", "l", "o"], "hello")
    assert c.IF == 0 and c.erased == 1
    assert error_rates(c).corrected_er == 0.0


def test_correction_attempts_count_runs():
    c = classify(["a", "x", "⌫", "b", "y", "z", "⌫", "⌫", "c"], "abc")
    assert c.F == 3 and c.correction_attempts == 2 and c.IF == 3


def test_corrected_kinds():
    # typed the next intended char early: omission
    assert classify(["h", "l", "⌫", "e", "l", "l", "o"], "hello").omissions == 1
    # repeated the previous char: insertion
    assert classify(["h", "h", "⌫", "e", "l", "l", "o"], "hello").insertions == 1
    # anything else: substitution
    assert classify(["h", "q", "⌫", "e", "l", "l", "o"], "hello").substitutions == 1


def test_empty_everything_is_zero():
    c = classify_errors(reconstruct(trial_of(make_session(["⌫"]))), "")
    assert (c.C, c.INF, c.IF) == (0, 0, 0)
    assert all(v == 0 for v in error_rates(c)[:6])


def test_rates_from_hand_classification():
    c = ErrorClassification(C=4, INF=1, IF=0, F=0, per_letter={"l": LetterErrors(omissions=1, intentions=2)},
                            correction_attempts=0, erased=0, final_len=4, intent_len=5, omissions=1)
    r = error_rates(c)
    assert r.uncorrected_er == 0.2 and r.total_er == 0.2 and r.corrected_er == 0.0


def test_alignment_size_invariant():
    c = classify(["t", "h", "x", "e", " ", "q", "u", "c", "k"], "the quick")
    assert c.C + c.INF == len(align("thxe quck", "the quick").ops)
    assert c.INF + c.IF >= c.INF


# -- touch ---------------------------------------------------------------------


def test_touch_examples():
    dev = DeviceInfo("1", "b", "m", 100, 100, 10.0)
    k1 = key_event("a", 100, hold=60, cx=50, cy=100, dx=3, dy=-4)
    k2 = key_event("b", 240, hold=30)
    s = make_session("")
    s = replace(s, key_events=(k1, k2), keyboard_hidden_ts_ms=1000, device=dev)
    td = touch_dynamics(trial_of(s), dev)
    assert td.hold_times_ms == (60.0, 30.0)
    assert td.flight_times_ms == (80.0,)
    assert td.touch_offsets_cm[0] == pytest.approx((0.3, -0.4))
    assert td.touch_major_minor_cm[0] == pytest.approx((6.0, 4.0))
    assert td.key_selected == ("a", "b")
    rr = touch_dynamics(trial_of(s), dev, "release_release")
    assert rr.flight_times_ms == (110.0,)
    with pytest.raises(ValueError):
        touch_dynamics(trial_of(s), dev, "press_press")


def test_single_key_has_no_flight():
    td = touch_dynamics(trial_of(make_session("a")), make_session("a").device)
    assert td.flight_times_ms == () and len(td.hold_times_ms) == 1


def test_input_timestamps_include_cursor_changes_and_suggestions():
    s = make_session(["a", Key.suggestion(0)], cursor=[(1050, 1, 1)], suggestions=[(1090, ("ab",))])
    td = touch_dynamics(trial_of(s), s.device)
    assert td.input_timestamps_ms == (1000, 1050, 1100)
    assert td.key_selected == ("a", "suggestion:0")


def test_motion_info_is_the_flattened_trace():
    ev = key_event("a", 0)
    ev = replace(ev, touch_trace=(ev.touch_trace[0], TouchSample(1, 2, 3, 3, MotionKind.MOVE, 20), ev.touch_trace[1]))
    s = replace(make_session(""), key_events=(ev,), keyboard_hidden_ts_ms=500)
    td = touch_dynamics(trial_of(s), s.device)
    assert [m[0] for m in td.motion_info] == ["down", "move", "up"]


# -- whole record ----------------------------------------------------------------


def timed_session(text, duration_ms, **kw):
    n = len(text)
    hold = 50
    times = [round(i * (duration_ms - hold) / (n - 1)) for i in range(n)]
    return make_session(list(text), times=times, start=0, **kw)


def test_transcription_record():
    s = timed_session("hello", 3000, target_phrase="hello")
    t = trial_of(s, CollectionMode.TRANSCRIPTION)
    m = compute_session_metrics(reconstruct(t), t, s.device, dictionary=DICT)
    assert m.wpm == pytest.approx(20.0)
    assert (m.corrected_er, m.uncorrected_er, m.total_er) == (0.0, 0.0, 0.0)
    assert (m.insertion_er, m.omission_er, m.substitution_er) == (0.0, 0.0, 0.0)
    assert m.intent_validation == 1.0
    assert m.key_selected == tuple("hello")
    assert m.raw_text == "hello"


def test_composition_uses_inferred_intent():
    s = timed_session("the quik fox", 5000)
    t = trial_of(s, CollectionMode.COMPOSITION)
    m = compute_session_metrics(reconstruct(t), t, s.device, dictionary=DICT)
    assert m.intent_text == "the quick fox"
    assert m.uncorrected_er == pytest.approx(1 / 13)
    assert m.omission_er == pytest.approx(1 / 13)
    assert m.n_spellcheck_predictions == 1 and m.n_dictionary_hits == 2
    assert m.intent_validation is ABSENT


def test_implicit_record_has_no_explicit_fields():
    s = timed_session("the fox", 2000)
    t = trial_of(s)
    m = compute_session_metrics(reconstruct(t), t, s.device, dictionary=DICT)
    for name in ("key_selected", "motion_info", "insertion_er", "insertion_er_by_letter", "raw_text",
                 "intent_text", "intent_validation"):
        assert getattr(m, name) is ABSENT, name
    assert m.wpm is not None and m.written_letters == 6


def test_demo_mode_has_per_letter_but_no_key_selected():
    s = timed_session("the fox", 2000)
    t = trial_of(s, CollectionMode.DEMO)
    m = compute_session_metrics(reconstruct(t), t, s.device, dictionary=DICT)
    assert m.insertion_er_by_letter is not ABSENT and m.key_selected is ABSENT


def test_per_letter_cap():
    s = timed_session("the fox", 2000)
    t = trial_of(s, CollectionMode.COMPOSITION)
    m = compute_session_metrics(reconstruct(t), t, s.device, dictionary=DICT,
                                options=MetricsOptions(per_letter_max_chars=3))
    assert m.omission_er_by_letter is None and m.omission_er == 0.0


def test_single_key_trial_has_no_speed():
    s = make_session("a")
    t = trial_of(s)
    m = compute_session_metrics(reconstruct(t), t, s.device, dictionary=DICT)
    assert (m.wpm, m.words_per_second, m.seconds_per_word) == (None, None, None)


def test_transcription_without_target_is_rejected():
    s = timed_session("hello", 1000)
    t = trial_of(s, CollectionMode.TRANSCRIPTION)
    with pytest.raises(ValueError):
        compute_session_metrics(reconstruct(t), t, s.device, dictionary=DICT)


def test_dict_round_trip():
    s = timed_session("the fox", 2000, cursor=[(100, 1, 1)], target_phrase="the fox")
    t = trial_of(s, CollectionMode.TRANSCRIPTION)
    m = compute_session_metrics(reconstruct(t), t, s.device, dictionary=DICT, envelope={"user_token": "U"})
    again = metrics_from_dict(metrics_to_dict(m))
    assert again == m
    assert not any(isinstance(v, float) and math.isnan(v) for v in metrics_to_dict(m).values())
    with pytest.raises(ValueError):
        metrics_from_dict({"mode": "implicit", "bogus": 1})
