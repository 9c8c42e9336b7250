"""Mode/field policy enforcement between computed metrics and storage.

The policy matrix lives in ``data/field_policy.json`` (one row per metric
of the metric table) so it can be diffed and versioned on its own.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

from .events import CollectionMode, KeyKind, MotionKind
from .metrics import ABSENT, FIELD_NAMES, SessionMetrics, metrics_from_dict, metrics_to_dict
from .stream import Origin


class PolicyViolation(ValueError):
    pass


@dataclass(frozen=True)
class FieldPolicy:
    matrix: dict[tuple[CollectionMode, str], bool]
    envelope: frozenset[str]
    version: int = 1

    def allowed(self, mode: CollectionMode, name: str) -> bool:
        return self.matrix.get((mode, name), False)

    def allowlist(self, mode: CollectionMode) -> frozenset[str]:
        return frozenset(n for (m, n), ok in self.matrix.items() if ok and m is mode)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> FieldPolicy:
        modes = [CollectionMode(m) for m in doc["modes"]]
        envelope = frozenset(doc["envelope"])
        matrix: dict[tuple[CollectionMode, str], bool] = {}
        for mode in modes:
            for name in envelope:
                matrix[(mode, name)] = True
        for row in doc["rows"]:
            row_modes = {CollectionMode(m) for m in row["modes"]}
            for name in row["fields"]:
                for mode in modes:
                    matrix[(mode, name)] = mode in row_modes
        unknown = {n for _, n in matrix} - set(FIELD_NAMES)
        if unknown:
            raise ValueError(f"policy names unknown fields: {sorted(unknown)}")
        missing = set(FIELD_NAMES) - {n for _, n in matrix}
        if missing:
            raise ValueError(f"policy does not cover fields: {sorted(missing)}")
        return cls(matrix, envelope, int(doc.get("policy_version", 1)))


def load_policy(path: str | Path) -> FieldPolicy:
    return FieldPolicy.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@lru_cache(maxsize=1)
def default_policy() -> FieldPolicy:
    text = resources.files("keytrace.data").joinpath("field_policy.json").read_text(encoding="utf-8")
    return FieldPolicy.from_dict(json.loads(text))


@dataclass(frozen=True)
class RedactedMetrics(SessionMetrics):
    """A metrics record that has passed the policy gate; the only kind storage accepts."""


def redact(m: SessionMetrics, policy: FieldPolicy | None = None) -> RedactedMetrics:
    """Drop every field the policy forbids for ``m.mode``.

    Forbidden fields become absent; allowed fields pass through, except
    that allowed-but-absent ones become null so the present field set always
    equals the mode's allowlist.
    """
    policy = policy or default_policy()
    mode = m.mode
    if not isinstance(mode, CollectionMode):
        raise PolicyViolation(f"record mode {mode!r} cannot be persisted")
    values = {}
    for name in FIELD_NAMES:
        if name == "mode":
            continue
        v = getattr(m, name)
        if policy.allowed(mode, name):
            values[name] = None if v is ABSENT else v
        else:
            values[name] = ABSENT
    return RedactedMetrics(mode=mode, **values)


def check_record(m: SessionMetrics, policy: FieldPolicy | None = None) -> None:
    """Raise if *m* carries a field its mode does not allow."""
    policy = policy or default_policy()
    extra = m.present_fields() - policy.allowlist(m.mode)
    if extra:
        raise PolicyViolation(f"{m.mode.value} record carries forbidden fields {sorted(extra)}")


def redacted_to_dict(m: RedactedMetrics) -> dict[str, Any]:
    return metrics_to_dict(m)


def redacted_from_dict(d: dict[str, Any], policy: FieldPolicy | None = None) -> RedactedMetrics:
    m = metrics_from_dict(d)
    check_record(m, policy)
    values = {n: getattr(m, n) for n in FIELD_NAMES if n != "mode"}
    return RedactedMetrics(mode=m.mode, **values)


def serialize(m: RedactedMetrics) -> bytes:
    return json.dumps(redacted_to_dict(m), ensure_ascii=False, sort_keys=True, separators=(",", ":")).encode()


# -- leak oracle ----------------------------------------------------------

# string values that are schema vocabulary rather than content
_VOCAB = (
    {m.value for m in CollectionMode}
    | {o.value for o in Origin}
    | {k.value for k in MotionKind}
    | {k.value for k in KeyKind}
)
_OPAQUE_KEYS = frozenset({"study_id", "user_token", "session_id", "trial_id", "task_id", "recorded_at"})
_ALPHA_RUN = re.compile(r"[^\W\d_]{3,}")


def _content_strings(node: Any, key: str | None = None) -> Iterable[str]:
    if isinstance(node, dict):
        for k, v in node.items():
            yield from _content_strings(v, k)
    elif isinstance(node, list):
        for v in node:
            yield from _content_strings(v, key)
    elif isinstance(node, str):
        if key in _OPAQUE_KEYS or node in _VOCAB or node.startswith("suggestion:"):
            return
        yield node


def leak_check(serialized_record: bytes, typed_text: str) -> bool:
    """True when no 3+ letter alphabetic piece of *typed_text* shows up in the record.

    Dictionary keys, opaque identifiers and enumerated vocabulary are not
    scanned. Matching is case-insensitive.
    """
    if not serialized_record:
        return True
    raw = serialized_record.decode("utf-8", errors="replace")
    try:
        haystacks = list(_content_strings(json.loads(raw)))
    except json.JSONDecodeError:
        haystacks = [raw]
    hay = "\x00".join(haystacks).lower()
    if not hay:
        return True
    for run in _ALPHA_RUN.findall(typed_text.lower()):
        for i in range(len(run) - 2):
            if run[i:i + 3] in hay:
                return False
    return True

