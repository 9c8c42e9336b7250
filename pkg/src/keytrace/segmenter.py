"""Split sessions into text-entry trials and decide which trials are analysable."""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, replace
from enum import Enum

from .events import (
    CollectionMode,
    CursorChange,
    FieldContext,
    FieldKind,
    KeyEvent,
    KeyKind,
    RawSession,
    SuggestionSnapshot,
)

DEFAULT_IDLE_TIMEOUT_MS = 10_000


class TrialStatus(str, Enum):
    ACTIVE = "active"
    DISCARDED = "discarded"
    EXCLUDED = "excluded"


class DiscardReason(str, Enum):
    CURSOR_INTO_PREEXISTING_TEXT = "cursor_into_preexisting_text"
    PASSWORD_FIELD = "password_field"
    NUMERIC_ONLY = "numeric_only"
    INCOGNITO = "incognito"


ENTRY_KEYS = frozenset({KeyKind.CHARACTER, KeyKind.SPACE, KeyKind.ENTER, KeyKind.SUGGESTION_SELECT})


@dataclass(frozen=True)
class Trial:
    trial_id: str
    parent_session: str
    mode: CollectionMode
    status: TrialStatus
    key_events: tuple[KeyEvent, ...]
    cursor_changes: tuple[CursorChange, ...]
    suggestions: tuple[SuggestionSnapshot, ...]
    start_ts_ms: int
    end_ts_ms: int
    target_phrase: str | None = None
    prompt: str | None = None
    # Length of field text in front of the trial; its content is never seen.
    # None means "continues an earlier trial of the same session".
    base_text_len: int | None = 0
    keyboard_language_events: tuple[tuple[int, str], ...] = ()

    @property
    def duration_s(self) -> float:
        return (self.end_ts_ms - self.start_ts_ms) / 1000.0


@dataclass(frozen=True)
class DiscardRecord:
    trial_id: str
    reason: DiscardReason
    # Entry actions typed before the trial was dropped; None for exclusions,
    # which carry nothing beyond the reason.
    chars_written: int | None = None


def segment(
    session: RawSession,
    idle_timeout_ms: int = DEFAULT_IDLE_TIMEOUT_MS,
    mode: CollectionMode = CollectionMode.IMPLICIT,
) -> list[Trial]:
    """Partition the key events of *session* into trials.

    A new trial starts when the gap between consecutive key-down timestamps
    is strictly greater than *idle_timeout_ms*. Cursor changes and
    suggestion snapshots go to the first trial that has not ended before
    them (events after the last key stay with the last trial).
    """
    if idle_timeout_ms <= 0:
        raise ValueError("idle_timeout_ms must be positive")
    keys = session.key_events
    if not keys:
        return []

    groups: list[list[KeyEvent]] = [[keys[0]]]
    for prev, ev in zip(keys, keys[1:]):
        if ev.down_ts_ms - prev.down_ts_ms > idle_timeout_ms:
            groups.append([ev])
        else:
            groups[-1].append(ev)

    ends = [g[-1].up_ts_ms for g in groups]

    def owner(ts: int) -> int:
        return min(bisect_left(ends, ts), len(groups) - 1)

    cursor: list[list[CursorChange]] = [[] for _ in groups]
    for c in session.cursor_changes:
        cursor[owner(c.timestamp_ms)].append(c)
    snaps: list[list[SuggestionSnapshot]] = [[] for _ in groups]
    for s in session.suggestions:
        snaps[owner(s.timestamp_ms)].append(s)

    langs = sorted(session.keyboard_language_events)
    trials = []
    for k, g in enumerate(groups):
        start, end = g[0].down_ts_ms, g[-1].up_ts_ms
        # language in force at the start plus changes during the trial
        before = [e for e in langs if e[0] <= start]
        during = [e for e in langs if start < e[0] <= end]
        lang = tuple(before[-1:] + during)
        trials.append(
            Trial(
                trial_id=f"{session.session_id}#{k}",
                parent_session=session.session_id,
                mode=mode,
                status=TrialStatus.ACTIVE,
                key_events=tuple(g),
                cursor_changes=tuple(cursor[k]),
                suggestions=tuple(snaps[k]),
                start_ts_ms=start,
                end_ts_ms=end,
                target_phrase=session.target_phrase if mode is CollectionMode.TRANSCRIPTION else None,
                prompt=session.prompt if mode is CollectionMode.COMPOSITION else None,
                base_text_len=session.field.preexisting_text_len if k == 0 else None,
                keyboard_language_events=lang,
            )
        )
    return trials


def entry_action_count(trial: Trial) -> int:
    return sum(1 for ev in trial.key_events if ev.key.kind in ENTRY_KEYS)


def _numeric_only(trial: Trial) -> bool:
    chars = [ev.key.char for ev in trial.key_events if ev.key.kind is KeyKind.CHARACTER]
    if not chars:
        return False
    others = any(ev.key.kind in (KeyKind.SUGGESTION_SELECT, KeyKind.AUTOCORRECT_APPLY) for ev in trial.key_events)
    return not others and all(c.isdecimal() for c in chars)


def classify(trial: Trial, field: FieldContext, incognito: bool = False) -> tuple[TrialStatus, DiscardRecord | None]:
    if incognito:
        return TrialStatus.EXCLUDED, DiscardRecord(trial.trial_id, DiscardReason.INCOGNITO)
    if field.field_kind is FieldKind.PASSWORD:
        return TrialStatus.EXCLUDED, DiscardRecord(trial.trial_id, DiscardReason.PASSWORD_FIELD)
    if field.field_kind is FieldKind.NUMERIC or _numeric_only(trial):
        return TrialStatus.EXCLUDED, DiscardRecord(trial.trial_id, DiscardReason.NUMERIC_ONLY)
    boundary = field.preexisting_text_len
    if any(c.new_position < boundary for c in trial.cursor_changes):
        return TrialStatus.DISCARDED, DiscardRecord(
            trial.trial_id, DiscardReason.CURSOR_INTO_PREEXISTING_TEXT, entry_action_count(trial)
        )
    return TrialStatus.ACTIVE, None


def classified(trial: Trial, field: FieldContext, incognito: bool = False) -> tuple[Trial, DiscardRecord | None]:
    """Like :func:`classify` but returns the trial with its status applied."""
    status, record = classify(trial, field, incognito)
    return replace(trial, status=status), record
