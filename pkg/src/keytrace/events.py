"""Canonical keyboard/touch event types and the JSONL session log format.

Every other module consumes these types. All of them are frozen value
objects; sequences are stored as tuples so instances hash and compare by
value and can be shared between workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator


class MotionKind(str, Enum):
    DOWN = "down"
    MOVE = "move"
    UP = "up"


class KeyKind(str, Enum):
    CHARACTER = "character"
    BACKSPACE = "backspace"
    ENTER = "enter"
    SPACE = "space"
    SHIFT = "shift"
    SUGGESTION_SELECT = "suggestion_select"
    AUTOCORRECT_APPLY = "autocorrect_apply"


class FieldKind(str, Enum):
    NORMAL = "normal"
    PASSWORD = "password"
    NUMERIC = "numeric"


class CollectionMode(str, Enum):
    IMPLICIT = "implicit"
    TRANSCRIPTION = "transcription"
    COMPOSITION = "composition"
    DEMO = "demo"


@dataclass(frozen=True)
class DeviceInfo:
    os_version: str
    brand: str
    model: str
    screen_width_px: int
    screen_height_px: int
    density_px_per_cm: float


@dataclass(frozen=True)
class TouchSample:
    x_px: float
    y_px: float
    touch_major_px: float
    touch_minor_px: float
    motion_kind: MotionKind
    timestamp_ms: int


@dataclass(frozen=True)
class Key:
    """A key identity. ``char`` is set for characters, ``index`` for suggestion picks."""

    kind: KeyKind
    char: str | None = None
    index: int | None = None

    @classmethod
    def character(cls, char: str) -> Key:
        return cls(KeyKind.CHARACTER, char=char)

    @classmethod
    def suggestion(cls, index: int) -> Key:
        return cls(KeyKind.SUGGESTION_SELECT, index=index)

    @property
    def label(self) -> str:
        if self.kind is KeyKind.CHARACTER:
            return self.char or ""
        if self.kind is KeyKind.SUGGESTION_SELECT:
            return f"suggestion:{self.index}"
        return self.kind.value


BACKSPACE = Key(KeyKind.BACKSPACE)
ENTER = Key(KeyKind.ENTER)
SPACE = Key(KeyKind.SPACE)
SHIFT = Key(KeyKind.SHIFT)
AUTOCORRECT = Key(KeyKind.AUTOCORRECT_APPLY)


@dataclass(frozen=True)
class KeyEvent:
    key: Key
    down_ts_ms: int
    up_ts_ms: int
    touch_trace: tuple[TouchSample, ...]
    key_centroid_x_px: float
    key_centroid_y_px: float
    key_width_px: float
    key_height_px: float

    @property
    def down_sample(self) -> TouchSample:
        return self.touch_trace[0]


@dataclass(frozen=True)
class CursorChange:
    timestamp_ms: int
    new_position: int
    selection_end: int


@dataclass(frozen=True)
class SuggestionSnapshot:
    timestamp_ms: int
    ranked_words: tuple[str, ...]


@dataclass(frozen=True)
class FieldContext:
    field_kind: FieldKind = FieldKind.NORMAL
    preexisting_text_len: int = 0


@dataclass(frozen=True)
class RawSession:
    """One keyboard-visibility span.

    ``started_at`` (ISO 8601 wall clock of ``keyboard_shown_ts_ms``) and the
    task fields are optional envelope data: the monotonic millisecond clock
    of the events cannot order sessions against each other.
    """

    session_id: str
    user_token: str
    device: DeviceInfo
    field: FieldContext
    keyboard_language_events: tuple[tuple[int, str], ...]
    key_events: tuple[KeyEvent, ...]
    cursor_changes: tuple[CursorChange, ...]
    suggestions: tuple[SuggestionSnapshot, ...]
    keyboard_shown_ts_ms: int
    keyboard_hidden_ts_ms: int
    incognito: bool = False
    started_at: str | None = None
    study_id: str | None = None
    task_id: str | None = None
    target_phrase: str | None = None
    prompt: str | None = None


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str
    index: int | None = None

    def __str__(self) -> str:
        where = self.field if self.index is None else f"{self.field}[{self.index}]"
        return f"{where}: {self.rule}"


OUTSIDE_SPAN = "event outside visibility span"


def validate_session(session: RawSession) -> list[Violation]:
    """Return every invariant violation of *session*; empty means well formed."""
    out: list[Violation] = []
    dev = session.device
    if dev.screen_width_px <= 0 or dev.screen_height_px <= 0:
        out.append(Violation("device", "screen dimensions must be positive"))
    if not dev.density_px_per_cm > 0:
        out.append(Violation("device", "density must be positive"))
    if session.field.preexisting_text_len < 0:
        out.append(Violation("field", "preexisting_text_len must be non-negative"))

    lo, hi = session.keyboard_shown_ts_ms, session.keyboard_hidden_ts_ms
    if hi < lo:
        out.append(Violation("keyboard_hidden_ts_ms", "hidden before shown"))

    def inside(ts: int) -> bool:
        return lo <= ts <= hi

    prev_down = None
    for i, ev in enumerate(session.key_events):
        if ev.up_ts_ms < ev.down_ts_ms:
            out.append(Violation("key_events", "up_ts_ms before down_ts_ms", i))
        if not (inside(ev.down_ts_ms) and inside(ev.up_ts_ms)):
            out.append(Violation("key_events", OUTSIDE_SPAN, i))
        if prev_down is not None and ev.down_ts_ms < prev_down:
            out.append(Violation("key_events", "not sorted by down_ts_ms", i))
        prev_down = ev.down_ts_ms
        if ev.key_width_px <= 0 or ev.key_height_px <= 0:
            out.append(Violation("key_events", "key dimensions must be positive", i))
        trace = ev.touch_trace
        if not trace:
            out.append(Violation("key_events", "empty touch trace", i))
        else:
            if trace[0].motion_kind is not MotionKind.DOWN:
                out.append(Violation("key_events", "touch trace must start with down", i))
            if trace[-1].motion_kind is not MotionKind.UP:
                out.append(Violation("key_events", "touch trace must end with up", i))
            for s in trace:
                if not (s.touch_major_px >= s.touch_minor_px >= 0):
                    out.append(Violation("key_events", "touch_major >= touch_minor >= 0 violated", i))
                    break
        if ev.key.kind is KeyKind.CHARACTER and not ev.key.char:
            out.append(Violation("key_events", "character key without char", i))
        if ev.key.kind is KeyKind.SUGGESTION_SELECT and (ev.key.index is None or ev.key.index < 0):
            out.append(Violation("key_events", "suggestion_select needs a non-negative index", i))

    for i, cc in enumerate(session.cursor_changes):
        if cc.new_position < 0 or cc.selection_end < cc.new_position:
            out.append(Violation("cursor_changes", "selection_end >= new_position >= 0 violated", i))
        if not inside(cc.timestamp_ms):
            out.append(Violation("cursor_changes", OUTSIDE_SPAN, i))
    for i, snap in enumerate(session.suggestions):
        if not inside(snap.timestamp_ms):
            out.append(Violation("suggestions", OUTSIDE_SPAN, i))
    for i, (ts, _tag) in enumerate(session.keyboard_language_events):
        if not inside(ts):
            out.append(Violation("keyboard_language_events", OUTSIDE_SPAN, i))
    return out


# -- JSON ---------------------------------------------------------------------


def _key_to_dict(key: Key) -> dict[str, Any]:
    d: dict[str, Any] = {"kind": key.kind.value}
    if key.char is not None:
        d["char"] = key.char
    if key.index is not None:
        d["index"] = key.index
    return d


def session_to_dict(session: RawSession) -> dict[str, Any]:
    dev = session.device
    return {
        "session_id": session.session_id,
        "user_token": session.user_token,
        "device": {
            "os_version": dev.os_version,
            "brand": dev.brand,
            "model": dev.model,
            "screen_width_px": dev.screen_width_px,
            "screen_height_px": dev.screen_height_px,
            "density_px_per_cm": dev.density_px_per_cm,
        },
        "field": {
            "field_kind": session.field.field_kind.value,
            "preexisting_text_len": session.field.preexisting_text_len,
        },
        "keyboard_language_events": [[ts, tag] for ts, tag in session.keyboard_language_events],
        "key_events": [
            {
                "key": _key_to_dict(ev.key),
                "down_ts_ms": ev.down_ts_ms,
                "up_ts_ms": ev.up_ts_ms,
                "touch_trace": [
                    {
                        "x_px": s.x_px,
                        "y_px": s.y_px,
                        "touch_major_px": s.touch_major_px,
                        "touch_minor_px": s.touch_minor_px,
                        "motion_kind": s.motion_kind.value,
                        "timestamp_ms": s.timestamp_ms,
                    }
                    for s in ev.touch_trace
                ],
                "key_centroid_x_px": ev.key_centroid_x_px,
                "key_centroid_y_px": ev.key_centroid_y_px,
                "key_width_px": ev.key_width_px,
                "key_height_px": ev.key_height_px,
            }
            for ev in session.key_events
        ],
        "cursor_changes": [
            {"timestamp_ms": c.timestamp_ms, "new_position": c.new_position, "selection_end": c.selection_end}
            for c in session.cursor_changes
        ],
        "suggestions": [
            {"timestamp_ms": s.timestamp_ms, "ranked_words": list(s.ranked_words)} for s in session.suggestions
        ],
        "keyboard_shown_ts_ms": session.keyboard_shown_ts_ms,
        "keyboard_hidden_ts_ms": session.keyboard_hidden_ts_ms,
        "incognito": session.incognito,
        "started_at": session.started_at,
        "study_id": session.study_id,
        "task_id": session.task_id,
        "target_phrase": session.target_phrase,
        "prompt": session.prompt,
    }


def session_from_dict(d: dict[str, Any]) -> RawSession:
    dev = d["device"]
    fld = d.get("field") or {}
    return RawSession(
        session_id=str(d["session_id"]),
        user_token=str(d["user_token"]),
        device=DeviceInfo(
            os_version=str(dev["os_version"]),
            brand=str(dev["brand"]),
            model=str(dev["model"]),
            screen_width_px=int(dev["screen_width_px"]),
            screen_height_px=int(dev["screen_height_px"]),
            density_px_per_cm=float(dev["density_px_per_cm"]),
        ),
        field=FieldContext(
            field_kind=FieldKind(fld.get("field_kind", "normal")),
            preexisting_text_len=int(fld.get("preexisting_text_len", 0)),
        ),
        keyboard_language_events=tuple((int(ts), str(tag)) for ts, tag in d.get("keyboard_language_events", [])),
        key_events=tuple(
            KeyEvent(
                key=Key(KeyKind(ev["key"]["kind"]), ev["key"].get("char"), ev["key"].get("index")),
                down_ts_ms=int(ev["down_ts_ms"]),
                up_ts_ms=int(ev["up_ts_ms"]),
                touch_trace=tuple(
                    TouchSample(
                        x_px=float(s["x_px"]),
                        y_px=float(s["y_px"]),
                        touch_major_px=float(s["touch_major_px"]),
                        touch_minor_px=float(s["touch_minor_px"]),
                        motion_kind=MotionKind(s["motion_kind"]),
                        timestamp_ms=int(s["timestamp_ms"]),
                    )
                    for s in ev["touch_trace"]
                ),
                key_centroid_x_px=float(ev["key_centroid_x_px"]),
                key_centroid_y_px=float(ev["key_centroid_y_px"]),
                key_width_px=float(ev["key_width_px"]),
                key_height_px=float(ev["key_height_px"]),
            )
            for ev in d.get("key_events", [])
        ),
        cursor_changes=tuple(
            CursorChange(int(c["timestamp_ms"]), int(c["new_position"]), int(c["selection_end"]))
            for c in d.get("cursor_changes", [])
        ),
        suggestions=tuple(
            SuggestionSnapshot(int(s["timestamp_ms"]), tuple(str(w) for w in s["ranked_words"]))
            for s in d.get("suggestions", [])
        ),
        keyboard_shown_ts_ms=int(d["keyboard_shown_ts_ms"]),
        keyboard_hidden_ts_ms=int(d["keyboard_hidden_ts_ms"]),
        incognito=bool(d.get("incognito", False)),
        started_at=d.get("started_at"),
        study_id=d.get("study_id"),
        task_id=d.get("task_id"),
        target_phrase=d.get("target_phrase"),
        prompt=d.get("prompt"),
    )


def dumps_session(session: RawSession) -> str:
    return json.dumps(session_to_dict(session), ensure_ascii=False, separators=(",", ":"))


@dataclass
class LogLineError:
    line_no: int
    message: str


@dataclass
class SessionLog:
    """Result of reading a JSONL log: parsed sessions plus per-line failures."""

    sessions: list[RawSession] = field(default_factory=list)
    errors: list[LogLineError] = field(default_factory=list)


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, RawSession | LogLineError]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield line_no, session_from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                yield line_no, LogLineError(line_no, f"{type(exc).__name__}: {exc}")


def read_jsonl(path: str | Path) -> SessionLog:
    log = SessionLog()
    for _, item in iter_jsonl(path):
        if isinstance(item, LogLineError):
            log.errors.append(item)
        else:
            log.sessions.append(item)
    return log


def write_jsonl(path: str | Path, sessions: Iterable[RawSession]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sessions:
            fh.write(dumps_session(s))
            fh.write("\n")
