"""Passive smartphone typing telemetry.

Raw keyboard sessions go in; content-free typing metrics come out, gated by
collection mode before anything is stored.
"""

from .alignment import Alignment, align
from .config import Config, load_config
from .events import (
    CollectionMode,
    DeviceInfo,
    FieldContext,
    FieldKind,
    Key,
    KeyEvent,
    KeyKind,
    RawSession,
    read_jsonl,
    validate_session,
    write_jsonl,
)
from .intent import Dictionary, default_dictionary, infer_intent, lookup, suggest, validate_intent
from .metrics import SessionMetrics, classify_errors, compute_session_metrics, error_rates, speed, touch_dynamics
from .pipeline import analyze, process_session
from .privacy import FieldPolicy, RedactedMetrics, default_policy, leak_check, redact, serialize
from .report import AggregateQuery, AggregateReport, GroupBy, aggregate
from .schedule import StudyPlan, active_tasks, apply_timeout, order_phrases, shift_plan, validate_plan
from .segmenter import DiscardRecord, Trial, TrialStatus, classify, segment
from .simulator import GroundTruthLedger, TypistProfile, batch, simulate
from .storage import DocumentStore, SyncBuffer, delete_user, enqueue, export_user, flush
from .stream import ReconstructedTrial, reconstruct

__version__ = "0.1.0"

__all__ = [
    "AggregateQuery",
    "AggregateReport",
    "Alignment",
    "CollectionMode",
    "Config",
    "DeviceInfo",
    "Dictionary",
    "DiscardRecord",
    "DocumentStore",
    "FieldContext",
    "FieldKind",
    "FieldPolicy",
    "GroundTruthLedger",
    "GroupBy",
    "Key",
    "KeyEvent",
    "KeyKind",
    "RawSession",
    "ReconstructedTrial",
    "RedactedMetrics",
    "SessionMetrics",
    "StudyPlan",
    "SyncBuffer",
    "Trial",
    "TrialStatus",
    "TypistProfile",
    "active_tasks",
    "aggregate",
    "align",
    "analyze",
    "apply_timeout",
    "batch",
    "classify",
    "classify_errors",
    "compute_session_metrics",
    "default_dictionary",
    "default_policy",
    "delete_user",
    "enqueue",
    "error_rates",
    "export_user",
    "flush",
    "infer_intent",
    "leak_check",
    "load_config",
    "lookup",
    "order_phrases",
    "process_session",
    "read_jsonl",
    "reconstruct",
    "redact",
    "segment",
    "serialize",
    "shift_plan",
    "simulate",
    "speed",
    "suggest",
    "touch_dynamics",
    "validate_intent",
    "validate_plan",
    "validate_session",
    "write_jsonl",
]
