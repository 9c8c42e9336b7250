"""Replay a trial into an input-stream buffer and an action array.

The buffer holds the live field text. Characters that get erased stay in
the input stream as tombstones at the place they occupied, so the stream
reads in final logical order (``h e l x l o`` for ``helx<lo``), with
erased entries flagged.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .distance import levenshtein
from .events import KeyKind, SuggestionSnapshot
from .segmenter import Trial, TrialStatus

# Stand-in for field text that existed before the trial; never inspected.
PLACEHOLDER = "￼"


class MalformedTrialError(ValueError):
    pass


class ActionKind(str, Enum):
    ENTRY = "entry"
    CORRECTION_DELETE = "correction_delete"
    CORRECTION_SUBSTITUTE = "correction_substitute"


class Origin(str, Enum):
    KEYPRESS = "keypress"
    SUGGESTION = "suggestion"
    AUTOCORRECT = "autocorrect"


@dataclass(frozen=True)
class Action:
    """One edit. Replaying ``text[:position] + produced + text[position + len(removed):]``
    over all actions in order reproduces the field text."""

    kind: ActionKind
    produced: str
    position: int
    timestamp_ms: int
    source: Origin
    removed: str = ""

    @property
    def is_correction(self) -> bool:
        return self.kind is not ActionKind.ENTRY


@dataclass(frozen=True)
class InputStreamChar:
    char: str
    entered_ts_ms: int
    erased: bool
    erased_ts_ms: int | None
    origin: Origin


@dataclass(frozen=True)
class ReconstructedTrial:
    trial_id: str
    input_stream: tuple[InputStreamChar, ...]
    actions: tuple[Action, ...]
    transcribed: str
    autocorrect_count: int
    suggestion_count: int
    changed_char_count: int
    base_text_len: int = 0

    @property
    def final_field_len(self) -> int:
        return self.base_text_len + len(self.transcribed) - _removed_base(self.actions)


def _removed_base(actions) -> int:
    return sum(a.removed.count(PLACEHOLDER) for a in actions)


class _Cell:
    __slots__ = ("char", "entered", "erased_ts", "origin")

    def __init__(self, char: str, entered: int, origin: Origin):
        self.char = char
        self.entered = entered
        self.erased_ts: int | None = None
        self.origin = origin


class _Replay:
    def __init__(self, base_len: int):
        # live buffer: _Cell for typed text, None for pre-trial text
        self.buf: list[_Cell | None] = [None] * base_len
        self.stream: list[_Cell] = []
        self.cursor = base_len
        self.sel_end = base_len
        self.actions: list[Action] = []
        self.autocorrects = 0
        self.suggestions = 0
        self.changed = 0

    def text(self, lo: int = 0, hi: int | None = None) -> str:
        cells = self.buf[lo:hi]
        return "".join(PLACEHOLDER if c is None else c.char for c in cells)

    def _erase(self, lo: int, hi: int, ts: int) -> str:
        removed = self.text(lo, hi)
        for c in self.buf[lo:hi]:
            if c is not None:
                c.erased_ts = ts
        del self.buf[lo:hi]
        return removed

    def _insert(self, text: str, ts: int, origin: Origin) -> None:
        at = self.cursor
        anchor = next((c for c in self.buf[at:] if c is not None), None)
        spot = len(self.stream) if anchor is None else self.stream.index(anchor)
        cells = [_Cell(ch, ts, origin) for ch in text]
        self.stream[spot:spot] = cells
        self.buf[at:at] = cells
        self.cursor = self.sel_end = at + len(text)

    def _delete_selection(self, ts: int) -> bool:
        lo, hi = self.cursor, self.sel_end
        if hi <= lo:
            return False
        for _ in range(lo, hi):
            removed = self._erase(lo, lo + 1, ts)
            self.actions.append(Action(ActionKind.CORRECTION_DELETE, "", lo, ts, Origin.KEYPRESS, removed))
            self.changed += 1
        self.sel_end = lo
        return True

    def _word_start(self) -> int:
        start = self.cursor
        while start > 0:
            c = self.buf[start - 1]
            if c is None or c.char.isspace():
                break
            start -= 1
        return start

    def move(self, position: int, selection_end: int) -> None:
        n = len(self.buf)
        self.cursor = min(max(position, 0), n)
        self.sel_end = min(max(selection_end, self.cursor), n)

    def type_text(self, text: str, ts: int) -> None:
        self._delete_selection(ts)
        at = self.cursor
        self._insert(text, ts, Origin.KEYPRESS)
        self.actions.append(Action(ActionKind.ENTRY, text, at, ts, Origin.KEYPRESS))

    def backspace(self, ts: int) -> None:
        if self._delete_selection(ts):
            return
        if self.cursor == 0:
            self.actions.append(Action(ActionKind.CORRECTION_DELETE, "", 0, ts, Origin.KEYPRESS))
            return
        at = self.cursor - 1
        removed = self._erase(at, at + 1, ts)
        self.cursor = self.sel_end = at
        self.actions.append(Action(ActionKind.CORRECTION_DELETE, "", at, ts, Origin.KEYPRESS, removed))
        self.changed += 1

    def replace_word(self, word: str, ts: int, origin: Origin) -> None:
        self._delete_selection(ts)
        start = self._word_start()
        removed = self._erase(start, self.cursor, ts)
        self.cursor = self.sel_end = start
        produced = word + " "
        self._insert(produced, ts, origin)
        if origin is Origin.SUGGESTION:
            self.suggestions += 1
            self.actions.append(Action(ActionKind.ENTRY, produced, start, ts, origin, removed))
        else:
            self.autocorrects += 1
            self.changed += levenshtein(removed, word)
            self.actions.append(Action(ActionKind.CORRECTION_SUBSTITUTE, produced, start, ts, origin, removed))


def _latest_snapshot(snaps: list[SuggestionSnapshot], ts: int) -> SuggestionSnapshot | None:
    best = None
    for s in snaps:
        if s.timestamp_ms <= ts:
            best = s
        else:
            break
    return best


def reconstruct(trial: Trial, base_text_len: int | None = None) -> ReconstructedTrial:
    """Replay *trial* into its final text, input stream and action array.

    *base_text_len* overrides ``trial.base_text_len`` (needed for trials that
    continue an earlier trial of the same session).
    """
    if trial.status is not TrialStatus.ACTIVE:
        raise MalformedTrialError(f"trial {trial.trial_id} is {trial.status.value}, not active")
    base = base_text_len if base_text_len is not None else (trial.base_text_len or 0)
    rp = _Replay(base)
    snaps = sorted(trial.suggestions, key=lambda s: s.timestamp_ms)

    events: list[tuple[int, int, int, object]] = []
    for i, c in enumerate(trial.cursor_changes):
        events.append((c.timestamp_ms, 0, i, c))
    for i, k in enumerate(trial.key_events):
        events.append((k.down_ts_ms, 1, i, k))
    events.sort(key=lambda e: e[:3])

    for ts, prio, idx, ev in events:
        if prio == 0:
            rp.move(ev.new_position, ev.selection_end)
            continue
        kind = ev.key.kind
        if kind is KeyKind.CHARACTER:
            rp.type_text(ev.key.char, ts)
        elif kind is KeyKind.SPACE:
            rp.type_text(" ", ts)
        elif kind is KeyKind.ENTER:
            rp.type_text("\n", ts)
        elif kind is KeyKind.BACKSPACE:
            rp.backspace(ts)
        elif kind is KeyKind.SHIFT:
            pass
        elif kind is KeyKind.SUGGESTION_SELECT:
            snap = _latest_snapshot(snaps, ts)
            i = ev.key.index
            if snap is None or i is None or not 0 <= i < len(snap.ranked_words):
                raise MalformedTrialError(f"{trial.trial_id}: key {idx} selects suggestion {i} with no such entry")
            rp.replace_word(snap.ranked_words[i], ts, Origin.SUGGESTION)
        elif kind is KeyKind.AUTOCORRECT_APPLY:
            snap = _latest_snapshot(snaps, ts)
            if snap is None or not snap.ranked_words:
                raise MalformedTrialError(f"{trial.trial_id}: key {idx} applies autocorrect with no suggestion")
            rp.replace_word(snap.ranked_words[0], ts, Origin.AUTOCORRECT)

    stream = tuple(
        InputStreamChar(c.char, c.entered, c.erased_ts is not None, c.erased_ts, c.origin) for c in rp.stream
    )
    return ReconstructedTrial(
        trial_id=trial.trial_id,
        input_stream=stream,
        actions=tuple(rp.actions),
        transcribed="".join(c.char for c in rp.buf if c is not None),
        autocorrect_count=rp.autocorrects,
        suggestion_count=rp.suggestions,
        changed_char_count=rp.changed,
        base_text_len=base,
    )


def count_actions(r: ReconstructedTrial) -> tuple[int, int, int]:
    """(action_count, correction_action_count, entry_action_count)."""
    corrections = sum(1 for a in r.actions if a.is_correction)
    entries = len(r.actions) - corrections
    return len(r.actions), corrections, entries


def classify_char(ch: str) -> str | None:
    if ch.isspace():
        return None
    if ch.isalpha():
        return "letter"
    if ch.isdecimal():
        return "number"
    return "special"


def char_class_counts(r: ReconstructedTrial | str) -> tuple[int, int, int]:
    """(letters, numbers, specials) over every entered character, erased or not.

    Whitespace belongs to none of the classes.
    """
    chars = r if isinstance(r, str) else (c.char for c in r.input_stream)
    counts = {"letter": 0, "number": 0, "special": 0}
    for ch in chars:
        cls = classify_char(ch)
        if cls:
            counts[cls] += 1
    return counts["letter"], counts["number"], counts["special"]


def replay_actions(actions, base_text_len: int = 0) -> str:
    """Apply an action array to an empty field (plus placeholders)."""
    text = PLACEHOLDER * base_text_len
    for a in actions:
        text = text[: a.position] + a.produced + text[a.position + len(a.removed):]
    return text
