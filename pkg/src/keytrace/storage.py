"""Local document store, write-ahead sync buffer, per-user export and deletion.

Layout under the store root::

    data/<study_id>/<token>.jsonl   flushed records, one {"seq", "kind", "record"} per line
    users/<token>.json              pseudonymous user records
    plans/<study_id>.json           study plans
    wal/pending.jsonl               buffered records not yet acknowledged by the store
    wal/state.json                  flush watermark and per-token sequence counters
    index.json                      token -> {study_id: last seq}; rebuilt from partitions on open

Every flushed line carries its per-token sequence number, so replaying a
buffer entry that already reached the store is detected and skipped. A
torn trailing line left by a crash is cut off when the store is opened.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import secrets
import zipfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterator

from filelock import FileLock

from .events import DeviceInfo
from .metrics import SCHEMA_VERSION
from .privacy import RedactedMetrics, redacted_from_dict, redacted_to_dict
from .schedule import StudyPlan, plan_from_dict, plan_to_dict
from .segmenter import DiscardReason, DiscardRecord

DEFAULT_STUDY = "_unassigned"


class StorageError(Exception):
    pass


class PersistenceError(StorageError):
    pass


class NotFoundError(StorageError, KeyError):
    pass


class SimulatedCrash(RuntimeError):
    """Raised by fault-injection hooks to stop a flush mid-way."""


def new_token() -> str:
    """Random 128-bit token, base32 without padding."""
    return base64.b32encode(secrets.token_bytes(16)).decode("ascii").rstrip("=")


@dataclass(frozen=True)
class UserRecord:
    token: str
    created_at: datetime
    device: DeviceInfo

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "token": self.token,
            "created_at": self.created_at.isoformat(),
            "device": session_to_dict_device(self.device),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> UserRecord:
        dev = d["device"]
        return cls(
            token=d["token"],
            created_at=datetime.fromisoformat(d["created_at"]),
            device=DeviceInfo(
                dev["os_version"], dev["brand"], dev["model"], int(dev["screen_width_px"]),
                int(dev["screen_height_px"]), float(dev["density_px_per_cm"]),
            ),
        )


def session_to_dict_device(device: DeviceInfo) -> dict[str, Any]:
    return {
        "os_version": device.os_version,
        "brand": device.brand,
        "model": device.model,
        "screen_width_px": device.screen_width_px,
        "screen_height_px": device.screen_height_px,
        "density_px_per_cm": device.density_px_per_cm,
    }


def discard_to_dict(r: DiscardRecord) -> dict[str, Any]:
    return {"trial_id": r.trial_id, "reason": r.reason.value, "chars_written": r.chars_written}


def discard_from_dict(d: dict[str, Any]) -> DiscardRecord:
    if set(d) != {"trial_id", "reason", "chars_written"}:
        raise ValueError(f"unexpected discard record fields {sorted(d)}")
    return DiscardRecord(d["trial_id"], DiscardReason(d["reason"]), d["chars_written"])


Record = RedactedMetrics | DiscardRecord


def record_to_payload(record: Record) -> tuple[str, dict[str, Any]]:
    if isinstance(record, RedactedMetrics):
        return "metrics", redacted_to_dict(record)
    if isinstance(record, DiscardRecord):
        return "discard", discard_to_dict(record)
    raise TypeError(f"only redacted metrics or discard records can be stored, got {type(record).__name__}")


def record_from_payload(kind: str, payload: dict[str, Any]) -> Record:
    if kind == "metrics":
        return redacted_from_dict(payload)
    if kind == "discard":
        return discard_from_dict(payload)
    raise ValueError(f"unknown record kind {kind!r}")


@dataclass(frozen=True)
class StoredRecord:
    seq: int
    token: str
    study_id: str
    record: Record


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _repair_tail(path: Path) -> None:
    """Cut a torn (newline-less) final line."""
    data = path.read_bytes()
    if data and not data.endswith(b"\n"):
        keep = data.rfind(b"\n") + 1
        with open(path, "r+b") as fh:
            fh.truncate(keep)


class DocumentStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        for sub in ("data", "users", "plans", "wal"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self.lock = FileLock(str(self.root / ".lock"))
        self._last_seq: dict[tuple[str, str], int] = {}
        for path in self._partitions():
            _repair_tail(path)
        self.write_index()

    def write_index(self) -> None:
        index: dict[str, dict[str, int]] = {}
        for path in self._partitions():
            index.setdefault(path.stem, {})[path.parent.name] = self.last_seq(path.parent.name, path.stem)
        _write_atomic(self.root / "index.json", _dumps({"schema_version": SCHEMA_VERSION, "tokens": index}) + "\n")

    # -- partitions --------------------------------------------------------

    def _partitions(self) -> list[Path]:
        return sorted((self.root / "data").glob("*/*.jsonl"))

    def _partition(self, study_id: str, token: str) -> Path:
        return self.root / "data" / study_id / f"{token}.jsonl"

    def _read_partition(self, path: Path) -> Iterator[dict[str, Any]]:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.endswith("\n"):
                    yield json.loads(line)

    def last_seq(self, study_id: str, token: str) -> int:
        key = (study_id, token)
        if key not in self._last_seq:
            path = self._partition(study_id, token)
            last = 0
            if path.exists():
                for row in self._read_partition(path):
                    last = max(last, row["seq"])
            self._last_seq[key] = last
        return self._last_seq[key]

    def append(self, token: str, study_id: str, seq: int, kind: str, payload: dict[str, Any]) -> bool:
        """Persist one record; returns False when that sequence number is already stored."""
        if seq <= self.last_seq(study_id, token):
            return False
        path = self._partition(study_id, token)
        path.parent.mkdir(parents=True, exist_ok=True)
        line = _dumps({"schema_version": SCHEMA_VERSION, "seq": seq, "kind": kind, "record": payload}) + "\n"
        try:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise PersistenceError(f"could not write {path}: {exc}") from exc
        self._last_seq[(study_id, token)] = seq
        return True

    def records(self, token: str | None = None, study_id: str | None = None) -> Iterator[StoredRecord]:
        """Every stored record, validated against the field policy on the way out."""
        for path in self._partitions():
            sid, tok = path.parent.name, path.stem
            if (token is not None and tok != token) or (study_id is not None and sid != study_id):
                continue
            for row in self._read_partition(path):
                yield StoredRecord(row["seq"], tok, sid, record_from_payload(row["kind"], row["record"]))

    def tokens(self) -> set[str]:
        found = {p.stem for p in self._partitions()}
        found |= {p.stem for p in (self.root / "users").glob("*.json")}
        return found

    # -- users and plans ---------------------------------------------------

    def register_user(self, device: DeviceInfo, created_at: datetime | None = None, token: str | None = None) -> UserRecord:
        user = UserRecord(token or new_token(), created_at or datetime.now(timezone.utc), device)
        _write_atomic(self.root / "users" / f"{user.token}.json", _dumps(user.to_dict()) + "\n")
        return user

    def user(self, token: str) -> UserRecord | None:
        path = self.root / "users" / f"{token}.json"
        if not path.exists():
            return None
        return UserRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def save_plan(self, plan: StudyPlan) -> None:
        _write_atomic(self.root / "plans" / f"{plan.study_id}.json", json.dumps(plan_to_dict(plan), indent=2) + "\n")

    def load_plan(self, study_id: str) -> StudyPlan | None:
        path = self.root / "plans" / f"{study_id}.json"
        if not path.exists():
            return None
        return plan_from_dict(json.loads(path.read_text(encoding="utf-8")))

    # -- whole-store helpers -----------------------------------------------

    def checksum(self) -> str:
        h = hashlib.sha256()
        for path in sorted(self.root.rglob("*")):
            if path.is_file() and path.name not in (".lock", "index.json"):
                h.update(str(path.relative_to(self.root)).encode())
                h.update(path.read_bytes())
        return h.hexdigest()

    def partition_bytes(self, token: str) -> dict[str, bytes]:
        return {p.parent.name: p.read_bytes() for p in self._partitions() if p.stem == token}


@dataclass
class BufferEntry:
    offset: int
    token: str
    study_id: str
    seq: int
    kind: str
    payload: dict[str, Any]
    durable: bool = True

    def to_line(self) -> str:
        return _dumps(
            {
                "offset": self.offset,
                "token": self.token,
                "study_id": self.study_id,
                "seq": self.seq,
                "kind": self.kind,
                "record": self.payload,
            }
        ) + "\n"


@dataclass
class SyncBuffer:
    """Append-only queue of redacted records waiting for the store.

    Entries are written to ``wal/pending.jsonl`` before :func:`enqueue`
    returns, so they survive a process restart.
    """

    root: Path
    pending: list[BufferEntry] = field(default_factory=list)
    flushed_through: int = 0
    next_offset: int = 1
    seq: dict[str, int] = field(default_factory=dict)
    # fault-injection hook: called with a stage name during flush
    fault: Callable[[str, BufferEntry], None] | None = None

    @classmethod
    def open(cls, store_root: str | Path) -> SyncBuffer:
        root = Path(store_root) / "wal"
        root.mkdir(parents=True, exist_ok=True)
        buf = cls(root)
        state_path = root / "state.json"
        if state_path.exists():
            state = json.loads(state_path.read_text(encoding="utf-8"))
            buf.flushed_through = state["flushed_through"]
            buf.next_offset = state["next_offset"]
            buf.seq = dict(state["seq"])
        wal = root / "pending.jsonl"
        if wal.exists():
            _repair_tail(wal)
            with open(wal, encoding="utf-8") as fh:
                for line in fh:
                    row = json.loads(line)
                    buf.next_offset = max(buf.next_offset, row["offset"] + 1)
                    buf.seq[row["token"]] = max(buf.seq.get(row["token"], 0), row["seq"])
                    if row["offset"] > buf.flushed_through:
                        buf.pending.append(
                            BufferEntry(row["offset"], row["token"], row["study_id"], row["seq"], row["kind"], row["record"])
                        )
        return buf

    @property
    def wal_path(self) -> Path:
        return self.root / "pending.jsonl"

    def _save_state(self) -> None:
        _write_atomic(
            self.root / "state.json",
            _dumps({"flushed_through": self.flushed_through, "next_offset": self.next_offset, "seq": self.seq}),
        )

    def _rewrite_wal(self) -> None:
        _write_atomic(self.wal_path, "".join(e.to_line() for e in self.pending if e.durable))

    def __len__(self) -> int:
        return len(self.pending)


def enqueue(
    buffer: SyncBuffer,
    record: Record,
    *,
    user_token: str | None = None,
    study_id: str | None = None,
) -> SyncBuffer:
    """Append *record* to the buffer and its write-ahead file.

    On a write failure the record is kept in memory (``durable=False``),
    still flushable, and :class:`PersistenceError` is raised.
    """
    kind, payload = record_to_payload(record)
    token = user_token or (payload.get("user_token") if kind == "metrics" else None)
    if not token:
        raise ValueError("a user token is required to store a record")
    sid = study_id or (payload.get("study_id") if kind == "metrics" else None) or DEFAULT_STUDY
    seq = buffer.seq.get(token, 0) + 1
    entry = BufferEntry(buffer.next_offset, token, sid, seq, kind, payload)
    buffer.next_offset += 1
    buffer.seq[token] = seq
    buffer.pending.append(entry)
    try:
        with open(buffer.wal_path, "a", encoding="utf-8") as fh:
            fh.write(entry.to_line())
            fh.flush()
            os.fsync(fh.fileno())
    except OSError as exc:
        entry.durable = False
        raise PersistenceError(f"buffer write failed, record kept in memory: {exc}") from exc
    return buffer


def flush(buffer: SyncBuffer, store: DocumentStore, connectivity: bool = True) -> tuple[SyncBuffer, DocumentStore]:
    """Move pending records into the store in order; a no-op without connectivity."""
    if not connectivity or not buffer.pending:
        return buffer, store
    with store.lock:
        while buffer.pending:
            entry = buffer.pending[0]
            store.append(entry.token, entry.study_id, entry.seq, entry.kind, entry.payload)
            if buffer.fault:
                buffer.fault("after_append", entry)
            buffer.flushed_through = entry.offset
            buffer._save_state()
            buffer.pending.pop(0)
            if buffer.fault:
                buffer.fault("after_mark", entry)
        buffer._rewrite_wal()
        store.write_index()
    return buffer, store


@dataclass(frozen=True)
class UserArchive:
    token: str
    user: UserRecord | None
    records: tuple[StoredRecord, ...]

    def jsonl(self) -> str:
        return "".join(
            _dumps({"seq": r.seq, "study_id": r.study_id, "kind": kind, "record": payload}) + "\n"
            for r in self.records
            for kind, payload in [record_to_payload(r.record)]
        )

    def to_zip_bytes(self) -> bytes:
        buf = io.BytesIO()
        stamp = (1980, 1, 1, 0, 0, 0)
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
            zf.writestr(zipfile.ZipInfo("records.jsonl", stamp), self.jsonl())
            user = _dumps(self.user.to_dict()) + "\n" if self.user else ""
            zf.writestr(zipfile.ZipInfo("user.jsonl", stamp), user)
        return buf.getvalue()

    def write_zip(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_zip_bytes())


def export_user(store: DocumentStore, token: str) -> UserArchive:
    """Everything stored for *token*, ordered by sequence number. Read-only."""
    if token not in store.tokens():
        raise NotFoundError(token)
    recs = sorted(store.records(token=token), key=lambda r: (r.seq, r.study_id))
    return UserArchive(token, store.user(token), tuple(recs))


def delete_user(store: DocumentStore, token: str, buffer: SyncBuffer | None = None) -> DocumentStore:
    """Remove every record of *token*, including ones still waiting in *buffer*."""
    buffered = buffer is not None and any(e.token == token for e in buffer.pending)
    if token not in store.tokens() and not buffered:
        raise NotFoundError(token)
    with store.lock:
        for path in store._partitions():
            if path.stem == token:
                path.unlink()
                store._last_seq.pop((path.parent.name, token), None)
        user = store.root / "users" / f"{token}.json"
        if user.exists():
            user.unlink()
        if buffer is not None:
            buffer.pending = [e for e in buffer.pending if e.token != token]
            buffer.seq.pop(token, None)
            buffer._save_state()
            buffer._rewrite_wal()
        store.write_index()
    return store
