"""Speed, error, touch-dynamics and count metrics for one trial."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, fields
from typing import Any, NamedTuple

from .alignment import OpKind, align, consumed_by_prefix, prefix_consumed
from .events import CollectionMode, DeviceInfo
from .intent import (
    DEFAULT_MAX_DISTANCE,
    DEFAULT_MAX_SUGGESTIONS,
    Dictionary,
    Provenance,
    default_dictionary,
    infer_intent,
    validate_intent,
)
from .segmenter import Trial, TrialStatus
from .stream import PLACEHOLDER, ReconstructedTrial, char_class_counts, count_actions

SCHEMA_VERSION = 1
PER_LETTER_MAX_CHARS = 2000
CHARS_PER_WORD = 5
EXPLICIT_MODES = frozenset({CollectionMode.TRANSCRIPTION, CollectionMode.COMPOSITION, CollectionMode.DEMO})
FLIGHT_ENDPOINTS = ("release_press", "release_release")


class _Absent:
    """Marks a record field that is not present at all (as opposed to null)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ABSENT"

    def __bool__(self) -> bool:
        return False

    def __reduce__(self):
        return (_Absent, ())


ABSENT: Any = _Absent()


# -- speed ----------------------------------------------------------------


class Speed(NamedTuple):
    wpm: float | None
    words_per_second: float | None
    seconds_per_word: float | None


def speed(transcribed_len: int, word_count: int, trial_seconds: float) -> Speed:
    """Words per minute at five characters per word, plus word rates.

    ``words_per_second`` is words over trial seconds; ``seconds_per_word``
    is its reciprocal (None without words). A zero-length trial has no
    speed at all.
    """
    if trial_seconds <= 0:
        return Speed(None, None, None)
    wpm = (transcribed_len / CHARS_PER_WORD) * (60.0 / trial_seconds)
    wps = word_count / trial_seconds
    return Speed(wpm, wps, (1.0 / wps) if wps > 0 else None)


# -- errors ---------------------------------------------------------------


@dataclass
class LetterErrors:
    insertions: int = 0
    omissions: int = 0
    substitutions: int = 0
    intentions: int = 0


@dataclass
class ErrorClassification:
    C: int
    INF: int
    IF: int
    F: int
    per_letter: dict[str, LetterErrors]
    correction_attempts: int
    erased: int
    final_len: int
    intent_len: int
    insertions: int = 0
    omissions: int = 0
    substitutions: int = 0


def _corrected_kind(ch: str, t: int, intent: str) -> tuple[str, str]:
    """Guess what kind of slip an erased wrong character was.

    Typing the next intended character early reads as an omission, repeating
    the previous one (or typing past the end) as an insertion, anything else
    as a substitution. Returns (kind, letter it is attributed to).
    """
    if t >= len(intent):
        return "insertions", ch
    if t + 1 < len(intent) and ch == intent[t + 1]:
        return "omissions", intent[t]
    if t > 0 and ch == intent[t - 1]:
        return "insertions", ch
    return "substitutions", intent[t]


def classify_errors(r: ReconstructedTrial, intent: str) -> ErrorClassification:
    final = r.transcribed
    alignment = align(final, intent)
    per_letter: dict[str, LetterErrors] = {}

    def letter(ch: str) -> LetterErrors:
        return per_letter.setdefault(ch, LetterErrors())

    for ch, n in Counter(intent).items():
        letter(ch).intentions = n

    C = INF = 0
    totals = Counter()
    for op in alignment.ops:
        if op.kind is OpKind.MATCH:
            C += 1
            continue
        INF += 1
        if op.kind is OpKind.SUBSTITUTION:
            letter(op.intent_char).substitutions += 1
            totals["substitutions"] += 1
        elif op.kind is OpKind.OMISSION:
            letter(op.intent_char).omissions += 1
            totals["omissions"] += 1
        else:
            letter(op.final_char).insertions += 1
            totals["insertions"] += 1

    # Replay the edits; every erased character is judged against the
    # intended character expected at its slot when it was erased.
    consumed_final = consumed_by_prefix(alignment.ops, len(final))
    text = PLACEHOLDER * r.base_text_len
    IF = erased = F = attempts = 0
    in_run = False
    for a in r.actions:
        if a.is_correction:
            F += 1
            if not in_run:
                attempts += 1
            in_run = True
        else:
            in_run = False
        if a.removed:
            before = text[: a.position].replace(PLACEHOLDER, "")
            if final.startswith(before):
                start = consumed_final[len(before)]
            else:
                start = prefix_consumed(before, intent)
            slot = start
            for ch in a.removed:
                if ch == PLACEHOLDER:
                    continue
                erased += 1
                if slot >= len(intent) or intent[slot] != ch:
                    IF += 1
                    kind, target = _corrected_kind(ch, slot, intent)
                    setattr(letter(target), kind, getattr(letter(target), kind) + 1)
                    totals[kind] += 1
                slot += 1
        text = text[: a.position] + a.produced + text[a.position + len(a.removed):]

    return ErrorClassification(
        C=C,
        INF=INF,
        IF=IF,
        F=F,
        per_letter=per_letter,
        correction_attempts=attempts,
        erased=erased,
        final_len=len(final),
        intent_len=len(intent),
        insertions=totals["insertions"],
        omissions=totals["omissions"],
        substitutions=totals["substitutions"],
    )


class ErrorRates(NamedTuple):
    corrected_er: float
    uncorrected_er: float
    total_er: float
    insertion_er: float
    omission_er: float
    substitution_er: float
    insertion_by_letter: dict[str, float]
    omission_by_letter: dict[str, float]
    substitution_by_letter: dict[str, float]


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def error_rates(c: ErrorClassification) -> ErrorRates:
    """Rates from a classification; any zero denominator gives 0."""
    intentions = c.intent_len
    by = {k: {} for k in ("insertions", "omissions", "substitutions")}
    for ch, le in sorted(c.per_letter.items()):
        for k in by:
            count = getattr(le, k)
            if count or le.intentions:
                by[k][ch] = _ratio(count, le.intentions)
    return ErrorRates(
        corrected_er=_ratio(c.IF, c.erased),
        uncorrected_er=_ratio(c.INF, max(c.final_len, c.intent_len)),
        total_er=_ratio(c.INF + c.IF, c.C + c.INF + c.IF),
        insertion_er=_ratio(c.insertions, intentions),
        omission_er=_ratio(c.omissions, intentions),
        substitution_er=_ratio(c.substitutions, intentions),
        insertion_by_letter=by["insertions"],
        omission_by_letter=by["omissions"],
        substitution_by_letter=by["substitutions"],
    )


# -- touch ----------------------------------------------------------------


class TouchDynamics(NamedTuple):
    flight_times_ms: tuple[float, ...]
    hold_times_ms: tuple[float, ...]
    touch_major_minor_cm: tuple[tuple[float, float], ...]
    touch_offsets_cm: tuple[tuple[float, float], ...]
    key_selected: tuple[str, ...]
    motion_info: tuple[tuple[str, int, float, float], ...]
    input_timestamps_ms: tuple[int, ...]
    key_timestamps_ms: tuple[tuple[int, int], ...]


def touch_dynamics(trial: Trial, device: DeviceInfo, flight_endpoints: str = "release_press") -> TouchDynamics:
    if flight_endpoints not in FLIGHT_ENDPOINTS:
        raise ValueError(f"flight_endpoints must be one of {FLIGHT_ENDPOINTS}")
    keys = trial.key_events
    density = device.density_px_per_cm
    hold = tuple(float(k.up_ts_ms - k.down_ts_ms) for k in keys)
    if flight_endpoints == "release_press":
        flight = tuple(float(b.down_ts_ms - a.up_ts_ms) for a, b in zip(keys, keys[1:]))
    else:
        flight = tuple(float(b.up_ts_ms - a.up_ts_ms) for a, b in zip(keys, keys[1:]))
    major_minor = tuple(
        (k.down_sample.touch_major_px / density, k.down_sample.touch_minor_px / density) for k in keys
    )
    offsets = tuple(
        ((k.down_sample.x_px - k.key_centroid_x_px) / density, (k.down_sample.y_px - k.key_centroid_y_px) / density)
        for k in keys
    )
    motion = tuple((s.motion_kind.value, s.timestamp_ms, s.x_px, s.y_px) for k in keys for s in k.touch_trace)
    inputs = tuple(sorted([k.down_ts_ms for k in keys] + [c.timestamp_ms for c in trial.cursor_changes]))
    return TouchDynamics(
        flight_times_ms=flight,
        hold_times_ms=hold,
        touch_major_minor_cm=major_minor,
        touch_offsets_cm=offsets,
        key_selected=tuple(k.key.label for k in keys),
        motion_info=motion,
        input_timestamps_ms=inputs,
        key_timestamps_ms=tuple((k.down_ts_ms, k.up_ts_ms) for k in keys),
    )


# -- record ---------------------------------------------------------------


@dataclass(frozen=True)
class SessionMetrics:
    """Every per-trial metric. Fields hold ``ABSENT`` when not part of the record."""

    mode: CollectionMode
    schema_version: int = SCHEMA_VERSION
    study_id: Any = ABSENT
    user_token: Any = ABSENT
    session_id: Any = ABSENT
    trial_id: Any = ABSENT
    task_id: Any = ABSENT
    recorded_at: Any = ABSENT
    # speed
    wpm: Any = ABSENT
    words_per_second: Any = ABSENT
    seconds_per_word: Any = ABSENT
    # errors
    corrected_er: Any = ABSENT
    uncorrected_er: Any = ABSENT
    total_er: Any = ABSENT
    insertion_er: Any = ABSENT
    omission_er: Any = ABSENT
    substitution_er: Any = ABSENT
    insertion_er_by_letter: Any = ABSENT
    omission_er_by_letter: Any = ABSENT
    substitution_er_by_letter: Any = ABSENT
    error_correction_attempts: Any = ABSENT
    # touch dynamics
    flight_times_ms: Any = ABSENT
    hold_times_ms: Any = ABSENT
    touch_major_minor_cm: Any = ABSENT
    touch_offsets_cm: Any = ABSENT
    key_selected: Any = ABSENT
    motion_info: Any = ABSENT
    key_timestamps_ms: Any = ABSENT
    # action and character counts
    action_count: Any = ABSENT
    correction_action_count: Any = ABSENT
    entry_action_count: Any = ABSENT
    autocorrect_count: Any = ABSENT
    changed_char_count: Any = ABSENT
    selected_suggestion_count: Any = ABSENT
    written_letters: Any = ABSENT
    written_numbers: Any = ABSENT
    written_specials: Any = ABSENT
    # other
    raw_text: Any = ABSENT
    input_stream: Any = ABSENT
    intent_text: Any = ABSENT
    n_dictionary_hits: Any = ABSENT
    n_spellcheck_predictions: Any = ABSENT
    n_unresolved: Any = ABSENT
    intent_validation: Any = ABSENT
    input_timestamps_ms: Any = ABSENT
    keyboard_language: Any = ABSENT

    def present_fields(self) -> set[str]:
        return {f.name for f in fields(self) if getattr(self, f.name) is not ABSENT}


FIELD_NAMES = tuple(f.name for f in fields(SessionMetrics))


@dataclass(frozen=True)
class MetricsOptions:
    flight_endpoints: str = "release_press"
    max_distance: int = DEFAULT_MAX_DISTANCE
    max_suggestions: int = DEFAULT_MAX_SUGGESTIONS
    per_letter_max_chars: int = PER_LETTER_MAX_CHARS


def compute_session_metrics(
    r: ReconstructedTrial,
    trial: Trial,
    device: DeviceInfo,
    target: str | None = None,
    *,
    dictionary: Dictionary | None = None,
    options: MetricsOptions = MetricsOptions(),
    envelope: dict[str, Any] | None = None,
) -> SessionMetrics:
    """All metrics computable for *trial* in its mode, before redaction.

    Error math runs against *target* when given (transcription), otherwise
    against the inferred intent. With a target the inferred intent is still
    computed and scored as ``intent_validation``.
    """
    if trial.status is not TrialStatus.ACTIVE:
        raise ValueError(f"metrics need an active trial, got {trial.status.value}")
    mode = trial.mode
    if target is None and mode is CollectionMode.TRANSCRIPTION:
        target = trial.target_phrase
    if mode is CollectionMode.TRANSCRIPTION and target is None:
        raise ValueError("transcription trials need a target phrase")
    dictionary = dictionary or default_dictionary()

    final = r.transcribed
    inferred = infer_intent(
        dictionary, final, max_distance=options.max_distance, max_suggestions=options.max_suggestions
    )
    intent = target if target is not None else inferred.text

    timed = len(trial.key_events) >= 2
    sp = speed(len(final), len(final.split()), trial.duration_s) if timed else Speed(None, None, None)
    cls = classify_errors(r, intent)
    rates = error_rates(cls)
    touch = touch_dynamics(trial, device, options.flight_endpoints)
    n_actions, n_corr, n_entry = count_actions(r)
    letters, numbers, specials = char_class_counts(r)

    values: dict[str, Any] = dict(envelope or {})
    values.update(
        trial_id=trial.trial_id,
        session_id=trial.parent_session,
        wpm=sp.wpm,
        words_per_second=sp.words_per_second,
        seconds_per_word=sp.seconds_per_word,
        corrected_er=rates.corrected_er,
        uncorrected_er=rates.uncorrected_er,
        total_er=rates.total_er,
        error_correction_attempts=cls.correction_attempts,
        flight_times_ms=touch.flight_times_ms,
        hold_times_ms=touch.hold_times_ms,
        touch_major_minor_cm=touch.touch_major_minor_cm,
        touch_offsets_cm=touch.touch_offsets_cm,
        key_timestamps_ms=touch.key_timestamps_ms,
        action_count=n_actions,
        correction_action_count=n_corr,
        entry_action_count=n_entry,
        autocorrect_count=r.autocorrect_count,
        changed_char_count=r.changed_char_count,
        selected_suggestion_count=r.suggestion_count,
        written_letters=letters,
        written_numbers=numbers,
        written_specials=specials,
        n_dictionary_hits=inferred.count(Provenance.DICTIONARY_HIT),
        n_spellcheck_predictions=inferred.count(Provenance.SPELLCHECK_TOP),
        n_unresolved=inferred.count(Provenance.UNRESOLVED),
        input_timestamps_ms=touch.input_timestamps_ms,
        keyboard_language=tuple(trial.keyboard_language_events),
    )
    if mode in EXPLICIT_MODES:
        small = len(final) <= options.per_letter_max_chars and len(intent) <= options.per_letter_max_chars
        values.update(
            insertion_er=rates.insertion_er,
            omission_er=rates.omission_er,
            substitution_er=rates.substitution_er,
            insertion_er_by_letter=rates.insertion_by_letter if small else None,
            omission_er_by_letter=rates.omission_by_letter if small else None,
            substitution_er_by_letter=rates.substitution_by_letter if small else None,
            raw_text=final,
            input_stream=tuple(
                (c.char, c.entered_ts_ms, c.erased_ts_ms, c.origin.value) for c in r.input_stream
            ),
            intent_text=inferred.text,
        )
        if mode is not CollectionMode.DEMO:
            values.update(key_selected=touch.key_selected, motion_info=touch.motion_info)
    if mode is CollectionMode.TRANSCRIPTION:
        values["intent_validation"] = validate_intent(target, inferred)
    return SessionMetrics(mode=mode, **values)


# -- serialization --------------------------------------------------------

_PAIR_FIELDS = {"touch_major_minor_cm", "touch_offsets_cm", "keyboard_language", "key_timestamps_ms"}
_TUPLE_FIELDS = {"flight_times_ms", "hold_times_ms", "key_selected", "input_timestamps_ms"}
_ROW_FIELDS = {"motion_info", "input_stream"}


def metrics_to_dict(m: SessionMetrics) -> dict[str, Any]:
    """JSON-ready dict holding only present fields."""
    out: dict[str, Any] = {}
    for name in FIELD_NAMES:
        v = getattr(m, name)
        if v is ABSENT:
            continue
        if name == "mode":
            v = v.value
        elif isinstance(v, tuple):
            v = [list(x) if isinstance(x, tuple) else x for x in v]
        elif isinstance(v, dict):
            v = dict(v)
        out[name] = v
    return out


def metrics_from_dict(d: dict[str, Any]) -> SessionMetrics:
    unknown = set(d) - set(FIELD_NAMES)
    if unknown:
        raise ValueError(f"unknown metric fields: {sorted(unknown)}")
    values: dict[str, Any] = {}
    for name, v in d.items():
        if name == "mode":
            v = CollectionMode(v)
        elif v is not None and name in _PAIR_FIELDS | _ROW_FIELDS:
            v = tuple(tuple(x) for x in v)
        elif v is not None and name in _TUPLE_FIELDS:
            v = tuple(v)
        values[name] = v
    return SessionMetrics(**values)


def classification_dict(c: ErrorClassification) -> dict[str, Any]:
    return asdict(c)
