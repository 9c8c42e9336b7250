"""Dashboard-style aggregates over stored metric records."""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from enum import Enum
from statistics import fmean
from typing import Any
from zoneinfo import ZoneInfo

from .privacy import RedactedMetrics
from .schedule import TEXT_TASKS, StudyPlan
from .storage import DocumentStore


class GroupBy(str, Enum):
    USER = "user"
    TASK_KIND = "task_kind"
    DAY = "day"


@dataclass(frozen=True)
class AggregateQuery:
    study_id: str
    period_from: datetime
    period_to: datetime
    group_by: GroupBy = GroupBy.USER
    token: str | None = None

    def __post_init__(self):
        if _cmp_key(self.period_from) > _cmp_key(self.period_to):
            raise ValueError("period_from must not be after period_to")


@dataclass(frozen=True)
class ReportRow:
    key: str
    avg_wpm: float | None
    total_chars_written: int
    session_count: int
    avg_total_er: float | None
    compliance: float | None  # None when no task window has closed for the group


@dataclass(frozen=True)
class AggregateReport:
    query: AggregateQuery
    rows: tuple[ReportRow, ...]

    def to_dict(self) -> dict[str, Any]:
        q = self.query
        return {
            "study_id": q.study_id,
            "period": [q.period_from.isoformat(), q.period_to.isoformat()],
            "group_by": q.group_by.value,
            "token": q.token,
            "rows": [row.__dict__ for row in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_markdown(self) -> str:
        head = "| group | avg wpm | chars written | sessions | avg total error | compliance |"
        lines = [head, "|---|---:|---:|---:|---:|---:|"]
        for r in self.rows:
            lines.append(
                f"| {r.key} | {_fmt(r.avg_wpm)} | {r.total_chars_written} | {r.session_count} "
                f"| {_fmt(r.avg_total_er, 4)} | {_fmt(r.compliance, 3)} |"
            )
        return "\n".join(lines) + "\n"


def _fmt(v: float | None, digits: int = 2) -> str:
    return "n/a" if v is None else f"{v:.{digits}f}"


def _cmp_key(dt: datetime) -> tuple:
    # comparable regardless of awareness: aware values by instant, naive by wall clock
    return (dt.tzinfo is not None, dt.timestamp() if dt.tzinfo else dt.isoformat())


def _aware(dt: datetime, tz: ZoneInfo) -> datetime:
    return dt.replace(tzinfo=tz) if dt.tzinfo is None else dt


def chars_written(m: RedactedMetrics) -> int:
    return sum(v or 0 for v in (m.written_letters, m.written_numbers, m.written_specials))


def _group_key(group_by: GroupBy, m: RedactedMetrics, token: str, local_day: date, plan: StudyPlan | None) -> str:
    if group_by is GroupBy.USER:
        return token
    if group_by is GroupBy.DAY:
        return local_day.isoformat()
    task = plan.tasks.get(m.task_id) if plan and m.task_id else None
    return task.kind.value if task else m.mode.value


def _assigned_windows(plan: StudyPlan, token: str | None, start: datetime, stop: datetime):
    """(token, task, day, window start, window end) for text tasks whose window closed inside [start, stop]."""
    tz = ZoneInfo(plan.timezone)
    for tok, sid in sorted(plan.assignments.items()):
        if token is not None and tok != token:
            continue
        sched = plan.schedule(sid)
        if sched is None:
            continue
        for day, tf in sched.timeframes:
            w0 = datetime.combine(day, tf.start_time, tz)
            w1 = datetime.combine(day, tf.end_time, tz)
            if w0 < start or w1 > stop:
                continue
            for tid in tf.task_ids:
                task = plan.tasks.get(tid)
                if task is not None and task.kind in TEXT_TASKS:
                    yield tok, task, day, w0, w1


def aggregate(
    store: DocumentStore,
    q: AggregateQuery,
    plan: StudyPlan | None = None,
    now: datetime | None = None,
) -> AggregateReport:
    """Per-group averages over metric records whose timestamp lies in the query period.

    Compliance counts text-entry tasks whose window has fully elapsed by
    ``min(period end, now)``; a task counts as completed when a record for
    it was made inside its window.
    """
    plan = plan or store.load_plan(q.study_id)
    tz = ZoneInfo(plan.timezone if plan else "UTC")
    start, stop = _aware(q.period_from, tz), _aware(q.period_to, tz)
    cutoff = min(stop, _aware(now, tz)) if now is not None else stop

    with store.lock:
        stored = list(store.records(token=q.token, study_id=q.study_id))

    groups: dict[str, list[RedactedMetrics]] = {}
    done: set[tuple[str, str, datetime]] = set()
    for s in stored:
        m = s.record
        if not isinstance(m, RedactedMetrics) or not m.recorded_at:
            continue
        at = _aware(datetime.fromisoformat(m.recorded_at), tz)
        if m.task_id:
            done.add((s.token, m.task_id, at))
        if not start <= at <= stop:
            continue
        key = _group_key(q.group_by, m, s.token, at.astimezone(tz).date(), plan)
        groups.setdefault(key, []).append(m)

    assigned: dict[str, int] = {}
    completed: dict[str, int] = {}
    if plan is not None:
        for tok, task, day, w0, w1 in _assigned_windows(plan, q.token, start, cutoff):
            key = {GroupBy.USER: tok, GroupBy.DAY: day.isoformat(), GroupBy.TASK_KIND: task.kind.value}[q.group_by]
            assigned[key] = assigned.get(key, 0) + 1
            if any(t == tok and tid == task.task_id and w0 <= at <= w1 for t, tid, at in done):
                completed[key] = completed.get(key, 0) + 1

    rows = []
    for key in sorted(groups):
        ms = groups[key]
        wpms = [m.wpm for m in ms if m.wpm is not None]
        ers = [m.total_er for m in ms if m.total_er is not None]
        n_assigned = assigned.get(key, 0)
        rows.append(
            ReportRow(
                key=key,
                avg_wpm=fmean(wpms) if wpms else None,
                total_chars_written=sum(chars_written(m) for m in ms),
                session_count=len(ms),
                avg_total_er=fmean(ers) if ers else None,
                compliance=completed.get(key, 0) / n_assigned if n_assigned else None,
            )
        )
    return AggregateReport(q, tuple(rows))


def last_days(days: int, now: datetime) -> tuple[datetime, datetime]:
    """Period covering the *days* days up to *now*."""
    return now - timedelta(days=days), now
