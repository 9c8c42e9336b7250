"""validate -> segment -> classify -> reconstruct -> metrics -> redact -> enqueue -> flush."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from typing import Iterable

from .config import Config
from .events import CollectionMode, LogLineError, RawSession, validate_session
from .intent import Dictionary, default_dictionary, load_dictionary
from .metrics import MetricsOptions, SCHEMA_VERSION, compute_session_metrics
from .privacy import FieldPolicy, redact
from .segmenter import DiscardReason, DiscardRecord, TrialStatus, classified, entry_action_count, segment
from .storage import DocumentStore, SyncBuffer, enqueue, flush
from .stream import MalformedTrialError, reconstruct


@dataclass
class Summary:
    sessions_read: int = 0
    sessions_invalid: int = 0
    malformed_lines: int = 0
    trials_processed: int = 0
    trials_discarded: int = 0
    trials_excluded: int = 0
    records_written: int = 0
    problems: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        return [
            f"sessions read: {self.sessions_read}",
            f"sessions invalid: {self.sessions_invalid}",
            f"malformed lines: {self.malformed_lines}",
            f"trials processed: {self.trials_processed}",
            f"trials discarded: {self.trials_discarded}",
            f"trials excluded: {self.trials_excluded}",
            f"records written: {self.records_written}",
        ]

    @property
    def has_data_errors(self) -> bool:
        return bool(self.sessions_invalid or self.malformed_lines or self.problems)


def metrics_options(config: Config) -> MetricsOptions:
    return MetricsOptions(
        flight_endpoints=config.flight_endpoints,
        max_distance=config.max_distance,
        max_suggestions=config.max_suggestions,
    )


def config_dictionary(config: Config) -> Dictionary:
    return load_dictionary(config.dictionary) if config.dictionary else default_dictionary()


def _recorded_at(session: RawSession, start_ts_ms: int) -> str | None:
    if not session.started_at:
        return None
    at = datetime.fromisoformat(session.started_at) + timedelta(milliseconds=start_ts_ms - session.keyboard_shown_ts_ms)
    return at.isoformat()


def process_session(
    session: RawSession,
    mode: CollectionMode,
    config: Config,
    dictionary: Dictionary,
    policy: FieldPolicy | None = None,
    study_id: str | None = None,
) -> tuple[list, Summary]:
    """Redacted metric records and discard records for one session, plus counts.

    Incognito, password and numeric trials leave nothing behind. A trial
    whose cursor went into pre-existing text is dropped with a content-free
    discard record; later trials of the same session follow it, since the
    text in front of them is no longer known.
    """
    summary = Summary(sessions_read=1)
    violations = validate_session(session)
    if not violations and mode is CollectionMode.TRANSCRIPTION and not session.target_phrase:
        violations = ["transcription session without a target phrase"]
    if violations:
        summary.sessions_invalid = 1
        summary.problems.append(f"{session.session_id}: {violations[0]}")
        return [], summary

    options = metrics_options(config)
    out: list = []
    base: int | None = session.field.preexisting_text_len
    for trial in segment(session, config.idle_timeout_ms, mode):
        trial, discard = classified(trial, session.field, session.incognito)
        if trial.status is TrialStatus.ACTIVE and base is None:
            trial = replace(trial, status=TrialStatus.DISCARDED)
            discard = DiscardRecord(trial.trial_id, DiscardReason.CURSOR_INTO_PREEXISTING_TEXT, entry_action_count(trial))
        if trial.status is TrialStatus.EXCLUDED:
            summary.trials_excluded += 1
            continue
        if trial.status is TrialStatus.DISCARDED:
            summary.trials_discarded += 1
            out.append(discard)
            base = None
            continue
        try:
            r = reconstruct(trial, base)
        except MalformedTrialError as exc:
            summary.trials_discarded += 1
            summary.problems.append(str(exc))
            base = None
            continue
        base = r.final_field_len
        envelope = {
            "schema_version": SCHEMA_VERSION,
            "study_id": study_id or session.study_id,
            "user_token": session.user_token,
            "task_id": session.task_id,
            "recorded_at": _recorded_at(session, trial.start_ts_ms),
        }
        m = compute_session_metrics(
            r, trial, session.device, dictionary=dictionary, options=options, envelope=envelope
        )
        out.append(redact(m, policy))
        summary.trials_processed += 1
    return out, summary


def analyze(
    sessions: Iterable[RawSession | LogLineError],
    mode: CollectionMode,
    config: Config,
    store: DocumentStore,
    buffer: SyncBuffer,
    *,
    dictionary: Dictionary | None = None,
    study_id: str | None = None,
    connectivity: bool = True,
) -> Summary:
    dictionary = dictionary or config_dictionary(config)
    total = Summary()
    for item in sessions:
        if isinstance(item, LogLineError):
            total.malformed_lines += 1
            total.problems.append(f"line {item.line_no}: {item.message}")
            continue
        records, s = process_session(item, mode, config, dictionary, study_id=study_id)
        for rec in records:
            enqueue(buffer, rec, user_token=item.user_token, study_id=study_id or item.study_id)
        total.records_written += len(records)
        for name in (
            "sessions_read", "sessions_invalid", "trials_processed", "trials_discarded", "trials_excluded",
        ):
            setattr(total, name, getattr(total, name) + getattr(s, name))
        total.problems.extend(s.problems)
    flush(buffer, store, connectivity)
    return total
