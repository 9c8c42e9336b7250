from __future__ import annotations

import pytest

from keytrace.events import (
    AUTOCORRECT,
    BACKSPACE,
    ENTER,
    SPACE,
    CursorChange,
    DeviceInfo,
    FieldContext,
    Key,
    KeyEvent,
    MotionKind,
    RawSession,
    SuggestionSnapshot,
    TouchSample,
)

DEVICE = DeviceInfo("14", "Acme", "A1", 1080, 2400, 160.0)

# (number, title, passed, detail) rows filled in by the acceptance suite
ACCEPTANCE: list[tuple[int, str, bool, str]] = []

_SPECIAL = {"⌫": BACKSPACE, " ": SPACE, "\n": ENTER, "⇥": AUTOCORRECT}


def key_of(item) -> Key:
    if isinstance(item, Key):
        return item
    if item in _SPECIAL:
        return _SPECIAL[item]
    return Key.character(item)


def key_event(key, down: int, hold: int = 50, cx: float = 100.0, cy: float = 200.0, dx: float = 0.0, dy: float = 0.0):
    up = down + hold
    trace = (
        TouchSample(cx + dx, cy + dy, 60.0, 40.0, MotionKind.DOWN, down),
        TouchSample(cx + dx, cy + dy, 60.0, 40.0, MotionKind.UP, up),
    )
    return KeyEvent(key_of(key), down, up, trace, cx, cy, 100.0, 150.0)


def make_session(
    keys=(),
    *,
    times=None,
    gap: int = 100,
    start: int = 1000,
    cursor=(),
    suggestions=(),
    field: FieldContext = FieldContext(),
    incognito: bool = False,
    session_id: str = "s1",
    **extra,
) -> RawSession:
    """Session typing *keys* (chars, '⌫', '⇥' or Key objects) every *gap* ms from *start*."""
    items = list(keys)
    if times is None:
        times = [start + i * gap for i in range(len(items))]
    events = tuple(key_event(k, t) for k, t in zip(items, times))
    cursor = tuple(CursorChange(*c) if isinstance(c, tuple) else c for c in cursor)
    suggestions = tuple(SuggestionSnapshot(*s) if isinstance(s, tuple) else s for s in suggestions)
    stamps = [e.up_ts_ms for e in events] + [c.timestamp_ms for c in cursor] + [s.timestamp_ms for s in suggestions]
    last = max(stamps + [start])
    return RawSession(
        session_id=session_id,
        user_token=extra.pop("user_token", "U1"),
        device=extra.pop("device", DEVICE),
        field=field,
        keyboard_language_events=((0, "en-US"),),
        key_events=events,
        cursor_changes=cursor,
        suggestions=suggestions,
        keyboard_shown_ts_ms=0,
        keyboard_hidden_ts_ms=last + 500,
        incognito=incognito,
        **extra,
    )


@pytest.fixture
def device():
    return DEVICE


def may20_plan(token: str = "U1"):
    """A one-day study: May 20, 9:00-23:00, one transcription task of ten sentences."""
    from datetime import date, datetime, time

    from keytrace.schedule import Schedule, StudyPlan, TaskDef, TaskKind, Timeframe

    task = TaskDef("t1", TaskKind.TRANSCRIPTION, tuple(f"sentence number {i}" for i in range(10)), timeout_s=120)
    tf = Timeframe(time(9), time(23), "Typing task", "Please copy ten sentences", ("t1",))
    sched = Schedule("s1", datetime(2024, 5, 20), datetime(2024, 5, 20, 23, 59), ((date(2024, 5, 20), tf),))
    return StudyPlan("study", "Everyday typing", date(2024, 5, 20), date(2024, 5, 20), (sched,),
                     assignments={token: "s1"}, tasks={"t1": task})


def metric_record(token: str = "U1", **values):
    """A redacted implicit-mode record carrying just the given values."""
    from keytrace.events import CollectionMode
    from keytrace.metrics import SessionMetrics
    from keytrace.privacy import redact

    mode = values.pop("mode", CollectionMode.IMPLICIT)
    return redact(SessionMetrics(mode=mode, user_token=token, **values))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {n}. {title}: {detail}")
