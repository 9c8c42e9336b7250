"""Seeded synthetic typist with a ground-truth ledger of injected errors.

Errors are kept isolated so each one stays individually recoverable from
the resulting text: after an injection the next ``min_error_gap`` characters
are typed cleanly, and wrong characters are never the intended character
nor one of its immediate neighbours in the target text.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.stats import truncnorm

from .events import (
    BACKSPACE,
    SHIFT,
    SPACE,
    DeviceInfo,
    FieldContext,
    Key,
    KeyEvent,
    MotionKind,
    RawSession,
    SuggestionSnapshot,
    TouchSample,
)

DEFAULT_MIN_ERROR_GAP = 2
MAX_WORD_PAUSE_MS = 5000
DEFAULT_DEVICE = DeviceInfo("13", "Generic", "Phone", 1080, 2340, 160.0)
LETTERS = "abcdefghijklmnopqrstuvwxyz"


class LayoutError(ValueError):
    pass


class ErrorKind(str, Enum):
    SUBSTITUTION = "substitution"
    INSERTION = "insertion"
    OMISSION = "omission"


@dataclass(frozen=True)
class KeyGeometry:
    cx: float
    cy: float
    w: float
    h: float


def qwerty_layout(key_w: float = 108.0, key_h: float = 160.0, top: float = 400.0) -> dict[str, KeyGeometry]:
    """Built-in phone QWERTY geometry in pixels, plus space/backspace/shift and a suggestion strip."""
    rows = [("1234567890", 0.0), ("qwertyuiop", 0.0), ("asdfghjkl", 0.5), ("zxcvbnm", 1.5)]
    layout: dict[str, KeyGeometry] = {}
    for r, (keys, indent) in enumerate(rows):
        cy = top + key_h * (r + 1.5)
        for c, ch in enumerate(keys):
            layout[ch] = KeyGeometry(key_w * (indent + c + 0.5), cy, key_w, key_h)
    bottom = top + key_h * 5.5
    layout["shift"] = KeyGeometry(key_w * 0.75, top + key_h * 4.5, key_w * 1.5, key_h)
    layout["backspace"] = KeyGeometry(key_w * 9.25, top + key_h * 4.5, key_w * 1.5, key_h)
    layout[","] = KeyGeometry(key_w * 1.5, bottom, key_w, key_h)
    layout[" "] = KeyGeometry(key_w * 5.0, bottom, key_w * 5, key_h)
    layout["."] = KeyGeometry(key_w * 8.0, bottom, key_w, key_h)
    layout["?"] = KeyGeometry(key_w * 9.0, bottom, key_w, key_h)
    layout["'"] = KeyGeometry(key_w * 0.5, bottom, key_w, key_h)
    for i in range(3):
        layout[f"suggestion:{i}"] = KeyGeometry(key_w * (10 / 6) * (2 * i + 1), top + key_h * 0.5, key_w * 10 / 3, key_h)
    return layout


def neighbours(layout: dict[str, KeyGeometry], ch: str, radius: float = 1.6) -> list[str]:
    """Single-letter keys whose centroid lies within *radius* key widths of *ch*'s."""
    g = layout.get(ch)
    if g is None:
        return []
    out = []
    for other, o in layout.items():
        if other == ch or len(other) != 1 or not other.isalpha():
            continue
        if math.hypot(o.cx - g.cx, o.cy - g.cy) <= radius * g.w:
            out.append(other)
    return sorted(out)


@dataclass(frozen=True)
class TypistProfile:
    target_wpm: float = 35.0
    substitution_rate: float = 0.0
    insertion_rate: float = 0.0
    omission_rate: float = 0.0
    correction_probability: float = 0.0
    hold_mean_ms: float = 95.0
    hold_sd_ms: float = 20.0
    flight_mean_ms: float = 180.0
    flight_sd_ms: float = 60.0
    suggestion_use_rate: float = 0.0
    # clean characters forced after each injection; 0 lets errors touch
    min_error_gap: int = DEFAULT_MIN_ERROR_GAP

    def __post_init__(self):
        rates = (self.substitution_rate, self.insertion_rate, self.omission_rate)
        if any(not 0 <= r <= 1 for r in rates) or sum(rates) > 1:
            raise ValueError("error rates must lie in [0, 1] and sum to at most 1")
        if isinstance(self.min_error_gap, bool) or not isinstance(self.min_error_gap, int) or self.min_error_gap < 0:
            raise ValueError("min_error_gap must be a non-negative integer")
        for name in ("correction_probability", "suggestion_use_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("target_wpm", "hold_mean_ms", "hold_sd_ms", "flight_mean_ms", "flight_sd_ms"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> TypistProfile:
        return cls(**{k: int(v) if k == "min_error_gap" else float(v) for k, v in d.items()})

    @classmethod
    def load(cls, path) -> TypistProfile:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Injection:
    kind: ErrorKind
    position: int
    corrected: bool
    char: str = ""  # the wrong character (substitution/insertion)


@dataclass(frozen=True)
class GroundTruthLedger:
    injected: tuple[Injection, ...]
    true_intent: str
    draws: int = 0  # characters that were eligible for an injection draw
    entered_nonspace_chars: int = 0
    suggestions_used: int = 0

    def total(self, kind: ErrorKind | None = None, corrected: bool | None = None) -> int:
        return sum(
            1
            for inj in self.injected
            if (kind is None or inj.kind is kind) and (corrected is None or inj.corrected is corrected)
        )

    @property
    def corrected_total(self) -> int:
        return self.total(corrected=True)

    @property
    def uncorrected_total(self) -> int:
        return self.total(corrected=False)

    def totals(self) -> dict[str, dict[str, int]]:
        return {
            k.value: {"corrected": self.total(k, True), "uncorrected": self.total(k, False)} for k in ErrorKind
        }

    def to_dict(self) -> dict:
        return {
            "injected": [
                {"kind": i.kind.value, "position": i.position, "corrected": i.corrected, "char": i.char}
                for i in self.injected
            ],
            "true_intent": self.true_intent,
            "draws": self.draws,
            "entered_nonspace_chars": self.entered_nonspace_chars,
            "suggestions_used": self.suggestions_used,
            "totals": self.totals(),
        }


def ledger_final(ledger: GroundTruthLedger) -> str:
    """The text a session should end with: the intent with every uncorrected slip applied."""
    out = []
    by_pos = {i.position: i for i in ledger.injected if not i.corrected}
    for pos, ch in enumerate(ledger.true_intent):
        inj = by_pos.get(pos)
        if inj is None:
            out.append(ch)
        elif inj.kind is ErrorKind.SUBSTITUTION:
            out.append(inj.char)
        elif inj.kind is ErrorKind.INSERTION:
            out.append(ch + inj.char)
    return "".join(out)


class _Typist:
    def __init__(self, rng, profile, layout, n_keys, start_ms):
        self.rng = rng
        self.layout = layout
        self.events: list[KeyEvent] = []
        self.snapshots: list[SuggestionSnapshot] = []
        self.t = start_ms
        p = profile
        self.holds = truncnorm.rvs(
            (1 - p.hold_mean_ms) / p.hold_sd_ms, np.inf, loc=p.hold_mean_ms, scale=p.hold_sd_ms,
            size=n_keys, random_state=rng,
        )
        self.flights = truncnorm.rvs(
            (1 - p.flight_mean_ms) / p.flight_sd_ms, np.inf, loc=p.flight_mean_ms, scale=p.flight_sd_ms,
            size=n_keys, random_state=rng,
        )
        self.k = 0

    def _sample(self, seq) -> int:
        v = seq[self.k % len(seq)]
        return max(1, int(round(v)))

    def pause(self, ms: int) -> None:
        self.t += ms

    def press(self, key: Key, geometry_name: str) -> None:
        g = self.layout[geometry_name]
        hold = self._sample(self.holds)
        flight = self._sample(self.flights)
        self.k += 1
        down, up = self.t, self.t + hold
        rng = self.rng
        x = float(np.clip(rng.normal(g.cx, g.w / 6), g.cx - g.w / 2, g.cx + g.w / 2))
        y = float(np.clip(rng.normal(g.cy, g.h / 6), g.cy - g.h / 2, g.cy + g.h / 2))
        major = float(rng.uniform(40.0, 80.0))
        minor = major * float(rng.uniform(0.6, 1.0))
        trace = [TouchSample(round(x, 2), round(y, 2), round(major, 2), round(minor, 2), MotionKind.DOWN, down)]
        if hold > 2:
            mid = down + hold // 2
            trace.append(TouchSample(round(x + 0.5, 2), round(y + 0.5, 2), round(major, 2), round(minor, 2),
                                     MotionKind.MOVE, mid))
        trace.append(TouchSample(round(x + 1.0, 2), round(y + 1.0, 2), round(major, 2), round(minor, 2),
                                 MotionKind.UP, up))
        self.events.append(KeyEvent(key, down, up, tuple(trace), g.cx, g.cy, g.w, g.h))
        self.t = up + flight

    def type_char(self, ch: str) -> None:
        if ch == " ":
            self.press(SPACE, " ")
        elif ch.isupper():
            self.press(SHIFT, "shift")
            self.press(Key.character(ch), ch.lower())
        else:
            self.press(Key.character(ch), ch)

    def backspace(self) -> None:
        self.press(BACKSPACE, "backspace")


def _check_layout(target: str, layout: dict[str, KeyGeometry]) -> None:
    missing = sorted({ch for ch in target if ch.lower() not in layout})
    if missing:
        raise LayoutError(f"layout has no key for {missing}")
    for name in ("backspace", "shift"):
        if name not in layout:
            raise LayoutError(f"layout has no {name} key")


def _wrong_char(rng, layout, ch: str, avoid: set[str]) -> str:
    pool = [c for c in neighbours(layout, ch.lower()) if c not in avoid]
    if not pool:
        pool = [c for c in LETTERS if c not in avoid]
    return pool[int(rng.integers(len(pool)))]


def simulate(
    target: str,
    profile: TypistProfile,
    seed: int,
    keyboard_layout: dict[str, KeyGeometry] | None = None,
    *,
    user_token: str = "SIMULATEDUSER",
    device: DeviceInfo = DEFAULT_DEVICE,
    language: str = "en-US",
    started_at: datetime | None = None,
    session_id: str | None = None,
) -> tuple[RawSession, GroundTruthLedger]:
    """Type *target* as *profile* would, deterministically for *seed*."""
    if not target:
        raise ValueError("target must be non-empty")
    layout = keyboard_layout or qwerty_layout()
    _check_layout(target, layout)
    rng = np.random.default_rng(seed)
    n = len(target)
    lead_in = int(rng.integers(200, 800))
    ty = _Typist(rng, profile, layout, n_keys=4 * n + 8, start_ms=lead_in)

    words = target.split(" ")
    per_char_ms = 12000.0 / profile.target_wpm
    deficit = max(0.0, per_char_ms - (profile.hold_mean_ms + profile.flight_mean_ms))
    word_pause_mean = deficit * n / max(1, len(words))

    p_sub = profile.substitution_rate
    p_ins = p_sub + profile.insertion_rate
    p_omi = p_ins + profile.omission_rate

    injected: list[Injection] = []
    draws = 0
    entered = 0
    suggestions_used = 0
    gap = profile.min_error_gap
    last_error = -(gap + 1)
    i = 0
    while i < n:
        ch = target[i]
        word_start = ch != " " and (i == 0 or target[i - 1] == " ")
        if word_start and i > 0 and word_pause_mean > 0:
            ty.pause(min(MAX_WORD_PAUSE_MS, int(rng.exponential(word_pause_mean))))

        if word_start and profile.suggestion_use_rate > 0:
            end = target.find(" ", i)
            word = target[i:end] if end != -1 else ""
            if len(word) >= 3 and word.isalpha() and word.islower() and rng.random() < profile.suggestion_use_rate:
                for c in word[:2]:
                    ty.type_char(c)
                    entered += 1
                decoys = [w for w in (word + "s", word[:-1], word[:2] + "e") if w != word]
                slot = int(rng.integers(3))
                ranked = decoys[:2]
                ranked.insert(slot, word)
                ty.snapshots.append(SuggestionSnapshot(ty.t, tuple(ranked)))
                ty.press(Key.suggestion(slot), f"suggestion:{slot}")
                entered += len(word)
                suggestions_used += 1
                i = end + 1  # the suggestion also supplies the space
                continue

        eligible = ch.isalpha() and ch.islower() and ch in layout and i - last_error > gap
        kind = None
        if eligible:
            draws += 1
            u = rng.random()
            if u < p_sub:
                kind = ErrorKind.SUBSTITUTION
            elif u < p_ins:
                kind = ErrorKind.INSERTION
            elif u < p_omi:
                kind = ErrorKind.OMISSION
        if kind is None:
            ty.type_char(ch)
            entered += ch != " "
            i += 1
            continue

        corrected = bool(rng.random() < profile.correction_probability)
        nxt = target[i + 1] if i + 1 < n else ""
        prv = target[i - 1] if i > 0 else ""
        if kind is ErrorKind.SUBSTITUTION:
            wrong = _wrong_char(rng, layout, ch, {ch, nxt, prv, " "})
            ty.type_char(wrong)
            entered += 1
            if corrected:
                ty.backspace()
                ty.type_char(ch)
                entered += 1
            injected.append(Injection(kind, i, corrected, wrong))
        elif kind is ErrorKind.INSERTION:
            wrong = _wrong_char(rng, layout, ch, {ch, nxt, " "})
            ty.type_char(ch)
            ty.type_char(wrong)
            entered += 2
            if corrected:
                ty.backspace()
            injected.append(Injection(kind, i, corrected, wrong))
        else:
            if corrected and (not nxt or nxt == ch):
                # the slip would be invisible; type the character normally
                ty.type_char(ch)
                entered += 1
                i += 1
                continue
            if corrected:
                ty.type_char(nxt)
                ty.backspace()
                ty.type_char(ch)
                entered += (nxt != " ") + 1
            injected.append(Injection(kind, i, corrected))
        last_error = i
        i += 1

    events = ty.events
    hidden = (events[-1].up_ts_ms if events else ty.t) + int(rng.integers(200, 800))
    session = RawSession(
        session_id=session_id or f"sim-{seed}",
        user_token=user_token,
        device=device,
        field=FieldContext(),
        keyboard_language_events=((0, language),),
        key_events=tuple(events),
        cursor_changes=(),
        suggestions=tuple(ty.snapshots),
        keyboard_shown_ts_ms=0,
        keyboard_hidden_ts_ms=hidden,
        started_at=started_at.isoformat() if started_at else None,
    )
    ledger = GroundTruthLedger(tuple(injected), target, draws, entered, suggestions_used)
    return session, ledger


def batch(
    targets: Sequence[str],
    profile: TypistProfile,
    base_seed: int,
    n: int,
    keyboard_layout: dict[str, KeyGeometry] | None = None,
    **kwargs,
) -> list[tuple[RawSession, GroundTruthLedger]]:
    """*n* sessions; session i types ``targets[i % len(targets)]`` with seed ``base_seed + i``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not targets:
        raise ValueError("targets must be non-empty")
    layout = keyboard_layout or qwerty_layout()
    return [
        simulate(targets[i % len(targets)], profile, base_seed + i, layout, **kwargs)
        for i in range(n)
    ]


def spread_over_days(start: datetime, n: int, days: int) -> list[datetime]:
    """Wall-clock start times for *n* sessions spread evenly across *days* days."""
    per_day = max(1, math.ceil(n / days))
    return [start + timedelta(days=i // per_day, minutes=10 * (i % per_day)) for i in range(n)]


def load_phrases() -> list[str]:
    from importlib import resources

    text = resources.files("keytrace.data").joinpath("phrases.txt").read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]
