"""Studies, schedules, timeframes and the tasks they make available."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta
from enum import Enum
from typing import Any
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

import numpy as np


class TaskKind(str, Enum):
    TRANSCRIPTION = "transcription"
    COMPOSITION = "composition"
    QUESTIONNAIRE = "questionnaire"
    CUSTOM = "custom"


class QuestionKind(str, Enum):
    SLIDER_SCALE = "slider_scale"
    BUTTON_SCALE = "button_scale"
    MULTIPLE_CHOICE = "multiple_choice"
    SINGLE_CHOICE = "single_choice"
    TIME_OF_DAY = "time_of_day"
    OPEN_ENDED = "open_ended"


SCALE_KINDS = frozenset({QuestionKind.SLIDER_SCALE, QuestionKind.BUTTON_SCALE})
CHOICE_KINDS = frozenset({QuestionKind.MULTIPLE_CHOICE, QuestionKind.SINGLE_CHOICE})
TEXT_TASKS = frozenset({TaskKind.TRANSCRIPTION, TaskKind.COMPOSITION})


class TimeoutDecision(str, Enum):
    PRESENT_NEXT = "present_next"
    STOP = "stop"


@dataclass(frozen=True)
class Question:
    question_id: str
    kind: QuestionKind
    title: str
    description: str = ""
    scale_min: float | None = None
    scale_max: float | None = None
    scale_labels: tuple[str, ...] = ()
    choices: tuple[str, ...] = ()


@dataclass(frozen=True)
class QuestionRef:
    question_id: str
    required: bool = False


@dataclass(frozen=True)
class TaskDef:
    task_id: str
    kind: TaskKind
    sentences: tuple[str, ...] = ()
    randomize: bool = False
    timeout_s: int | None = None
    questions: tuple[QuestionRef, ...] = ()
    params: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Timeframe:
    start_time: time
    end_time: time
    notification_title: str
    notification_description: str
    task_ids: tuple[str, ...]


@dataclass(frozen=True)
class Schedule:
    schedule_id: str
    start: datetime
    end: datetime
    timeframes: tuple[tuple[date, Timeframe], ...]


@dataclass(frozen=True)
class StudyPlan:
    study_id: str
    title: str
    start_date: date
    end_date: date
    schedules: tuple[Schedule, ...]
    assignments: dict[str, str] = field(default_factory=dict)
    tasks: dict[str, TaskDef] = field(default_factory=dict)
    questions: dict[str, Question] = field(default_factory=dict)
    timezone: str = "UTC"

    def schedule(self, schedule_id: str) -> Schedule | None:
        return next((s for s in self.schedules if s.schedule_id == schedule_id), None)


@dataclass(frozen=True)
class PlanViolation:
    entity: str
    rule: str

    def __str__(self) -> str:
        return f"{self.entity}: {self.rule}"


def _check_question(q: Question) -> list[PlanViolation]:
    out = []
    who = f"question {q.question_id}"
    if q.kind in SCALE_KINDS:
        if q.scale_min is None or q.scale_max is None or not q.scale_min < q.scale_max:
            out.append(PlanViolation(who, "scale needs min < max"))
    if q.kind in CHOICE_KINDS and len(q.choices) < 2:
        out.append(PlanViolation(who, "choice question needs at least two options"))
    return out


def _check_task(t: TaskDef, questions: dict[str, Question]) -> list[PlanViolation]:
    out = []
    who = f"task {t.task_id}"
    if t.kind in TEXT_TASKS and not t.sentences:
        out.append(PlanViolation(who, "needs at least one sentence"))
    if t.timeout_s is not None and t.timeout_s <= 0:
        out.append(PlanViolation(who, "timeout_s must be positive"))
    if t.kind is TaskKind.QUESTIONNAIRE:
        if not t.questions:
            out.append(PlanViolation(who, "questionnaire without questions"))
        for ref in t.questions:
            if ref.question_id not in questions:
                out.append(PlanViolation(who, f"unknown question {ref.question_id}"))
    return out


def validate_plan(plan: StudyPlan) -> list[PlanViolation]:
    out: list[PlanViolation] = []
    study = f"study {plan.study_id}"
    if plan.start_date > plan.end_date:
        out.append(PlanViolation(study, "start_date after end_date"))
    try:
        ZoneInfo(plan.timezone)
    except (ZoneInfoNotFoundError, ValueError):
        out.append(PlanViolation(study, f"unknown timezone {plan.timezone!r}"))
    for q in plan.questions.values():
        out.extend(_check_question(q))
    for t in plan.tasks.values():
        out.extend(_check_task(t, plan.questions))

    seen: set[str] = set()
    for s in plan.schedules:
        who = f"schedule {s.schedule_id}"
        if s.schedule_id in seen:
            out.append(PlanViolation(who, "duplicate schedule id"))
        seen.add(s.schedule_id)
        if s.start > s.end:
            out.append(PlanViolation(who, "start after end"))
        for k, (day, tf) in enumerate(s.timeframes):
            tw = f"{who} timeframe {k} ({day.isoformat()})"
            if not tf.start_time < tf.end_time:
                out.append(PlanViolation(tw, "start_time must be before end_time"))
            if not tf.task_ids:
                out.append(PlanViolation(tw, "no tasks"))
            for tid in tf.task_ids:
                if tid not in plan.tasks:
                    out.append(PlanViolation(tw, f"unknown task {tid}"))
            if not s.start.date() <= day <= s.end.date():
                out.append(PlanViolation(tw, "date outside schedule"))
            if not plan.start_date <= day <= plan.end_date:
                out.append(PlanViolation(tw, "date outside study window"))
    for token, sid in plan.assignments.items():
        if sid not in seen:
            out.append(PlanViolation(f"assignment {token}", f"unknown schedule {sid}"))
    return out


@dataclass(frozen=True)
class Notification:
    title: str
    description: str
    fire_at: datetime


@dataclass(frozen=True)
class AvailableTask:
    task: TaskDef
    notification: Notification


def _local(plan: StudyPlan, now: datetime) -> datetime:
    tz = ZoneInfo(plan.timezone)
    if now.tzinfo is None:
        return now.replace(tzinfo=tz)
    return now.astimezone(tz)


def active_tasks(plan: StudyPlan, user_token: str, now: datetime) -> list[AvailableTask]:
    """Tasks available to *user_token* at *now*.

    A timeframe is open on its date for start_time <= t <= end_time, both
    ends included. Naive datetimes are read in the study timezone.
    """
    sid = plan.assignments.get(user_token)
    sched = plan.schedule(sid) if sid else None
    if sched is None:
        return []
    local = _local(plan, now)
    out = []
    for day, tf in sched.timeframes:
        if day != local.date() or not tf.start_time <= local.time().replace(tzinfo=None) <= tf.end_time:
            continue
        note = Notification(
            tf.notification_title,
            tf.notification_description,
            datetime.combine(day, tf.start_time, tzinfo=local.tzinfo),
        )
        out.extend(AvailableTask(plan.tasks[tid], note) for tid in tf.task_ids if tid in plan.tasks)
    return out


def notifications_for_day(plan: StudyPlan, user_token: str, day: date) -> list[tuple[Timeframe, Notification]]:
    sid = plan.assignments.get(user_token)
    sched = plan.schedule(sid) if sid else None
    if sched is None:
        return []
    tz = ZoneInfo(plan.timezone)
    return [
        (tf, Notification(tf.notification_title, tf.notification_description, datetime.combine(d, tf.start_time, tz)))
        for d, tf in sorted(sched.timeframes, key=lambda x: (x[0], x[1].start_time))
        if d == day
    ]


def shift_schedule(s: Schedule, delta_days: int) -> Schedule:
    delta = timedelta(days=delta_days)
    return replace(
        s,
        start=s.start + delta,
        end=s.end + delta,
        timeframes=tuple((d + delta, tf) for d, tf in s.timeframes),
    )


def shift_plan(plan: StudyPlan, delta_days: int) -> StudyPlan:
    """Shift the study window together with every schedule."""
    delta = timedelta(days=delta_days)
    return replace(
        plan,
        start_date=plan.start_date + delta,
        end_date=plan.end_date + delta,
        schedules=tuple(shift_schedule(s, delta_days) for s in plan.schedules),
    )


def _task_rng(task_id: str, seed: int) -> np.random.Generator:
    digest = hashlib.sha256(f"{task_id}\x00{seed}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


def order_phrases(task: TaskDef, seed: int) -> list[str]:
    """Sentence order for one run of *task*; a seeded Fisher-Yates shuffle when randomized."""
    items = list(task.sentences)
    if not task.randomize:
        return items
    rng = _task_rng(task.task_id, seed)
    for i in range(len(items) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        items[i], items[j] = items[j], items[i]
    return items


def apply_timeout(task: TaskDef, elapsed_s: float, next_index: int) -> TimeoutDecision:
    """Whether to show sentence *next_index* after *elapsed_s* seconds.

    Only the decision to start another sentence is made here; a sentence
    already on screen always runs to completion.
    """
    if next_index >= len(task.sentences):
        return TimeoutDecision.STOP
    if task.timeout_s is not None and elapsed_s > task.timeout_s:
        return TimeoutDecision.STOP
    return TimeoutDecision.PRESENT_NEXT


# -- JSON -----------------------------------------------------------------


def _time(s: str) -> time:
    return time.fromisoformat(s)


def plan_to_dict(plan: StudyPlan) -> dict[str, Any]:
    return {
        "study_id": plan.study_id,
        "title": plan.title,
        "start_date": plan.start_date.isoformat(),
        "end_date": plan.end_date.isoformat(),
        "timezone": plan.timezone,
        "schedules": [
            {
                "schedule_id": s.schedule_id,
                "start": s.start.isoformat(),
                "end": s.end.isoformat(),
                "timeframes": [
                    {
                        "date": d.isoformat(),
                        "start_time": tf.start_time.isoformat(),
                        "end_time": tf.end_time.isoformat(),
                        "notification_title": tf.notification_title,
                        "notification_description": tf.notification_description,
                        "task_ids": list(tf.task_ids),
                    }
                    for d, tf in s.timeframes
                ],
            }
            for s in plan.schedules
        ],
        "assignments": dict(plan.assignments),
        "tasks": [
            {
                "task_id": t.task_id,
                "kind": t.kind.value,
                "sentences": list(t.sentences),
                "randomize": t.randomize,
                "timeout_s": t.timeout_s,
                "questions": [{"question_id": q.question_id, "required": q.required} for q in t.questions],
                "params": dict(t.params),
            }
            for t in plan.tasks.values()
        ],
        "questions": [
            {
                "question_id": q.question_id,
                "kind": q.kind.value,
                "title": q.title,
                "description": q.description,
                "scale_min": q.scale_min,
                "scale_max": q.scale_max,
                "scale_labels": list(q.scale_labels),
                "choices": list(q.choices),
            }
            for q in plan.questions.values()
        ],
    }


def plan_from_dict(d: dict[str, Any]) -> StudyPlan:
    tasks = {}
    for t in d.get("tasks", []):
        task = TaskDef(
            task_id=t["task_id"],
            kind=TaskKind(t["kind"]),
            sentences=tuple(t.get("sentences", ())),
            randomize=bool(t.get("randomize", False)),
            timeout_s=t.get("timeout_s"),
            questions=tuple(QuestionRef(q["question_id"], bool(q.get("required", False))) for q in t.get("questions", ())),
            params=dict(t.get("params", {})),
        )
        tasks[task.task_id] = task
    questions = {}
    for q in d.get("questions", []):
        question = Question(
            question_id=q["question_id"],
            kind=QuestionKind(q["kind"]),
            title=q.get("title", ""),
            description=q.get("description", ""),
            scale_min=q.get("scale_min"),
            scale_max=q.get("scale_max"),
            scale_labels=tuple(q.get("scale_labels", ())),
            choices=tuple(q.get("choices", ())),
        )
        questions[question.question_id] = question
    return StudyPlan(
        study_id=d["study_id"],
        title=d.get("title", ""),
        start_date=date.fromisoformat(d["start_date"]),
        end_date=date.fromisoformat(d["end_date"]),
        timezone=d.get("timezone", "UTC"),
        schedules=tuple(
            Schedule(
                schedule_id=s["schedule_id"],
                start=datetime.fromisoformat(s["start"]),
                end=datetime.fromisoformat(s["end"]),
                timeframes=tuple(
                    (
                        date.fromisoformat(tf["date"]),
                        Timeframe(
                            start_time=_time(tf["start_time"]),
                            end_time=_time(tf["end_time"]),
                            notification_title=tf.get("notification_title", ""),
                            notification_description=tf.get("notification_description", ""),
                            task_ids=tuple(tf["task_ids"]),
                        ),
                    )
                    for tf in s.get("timeframes", [])
                ),
            )
            for s in d.get("schedules", [])
        ),
        assignments=dict(d.get("assignments", {})),
        tasks=tasks,
        questions=questions,
    )


def load_plan(path) -> StudyPlan:
    with open(path, encoding="utf-8") as fh:
        return plan_from_dict(json.load(fh))


def dump_plan(plan: StudyPlan, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan_to_dict(plan), fh, indent=2, ensure_ascii=False)
        fh.write("\n")
