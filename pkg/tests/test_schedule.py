from dataclasses import replace
from datetime import date, datetime, time, timezone

import numpy as np
import pytest

from keytrace.schedule import (
    Question,
    QuestionKind,
    QuestionRef,
    TaskDef,
    TaskKind,
    TimeoutDecision,
    active_tasks,
    apply_timeout,
    notifications_for_day,
    order_phrases,
    plan_from_dict,
    plan_to_dict,
    shift_plan,
    shift_schedule,
    validate_plan,
)

from conftest import may20_plan


def rules(plan):
    return [v.rule for v in validate_plan(plan)]


def test_may20_plan_is_valid():
    assert validate_plan(may20_plan()) == []


def test_inverted_timeframe_is_reported():
    plan = may20_plan()
    (s,) = plan.schedules
    ((day, tf),) = s.timeframes
    bad = replace(s, timeframes=((day, replace(tf, start_time=time(23), end_time=time(9))),))
    v = validate_plan(replace(plan, schedules=(bad,)))
    assert [x.rule for x in v] == ["start_time must be before end_time"]
    assert "schedule s1" in v[0].entity


def test_assignment_to_missing_schedule():
    v = validate_plan(replace(may20_plan(), assignments={"U9": "nope"}))
    assert [(x.entity, x.rule) for x in v] == [("assignment U9", "unknown schedule nope")]


def test_task_and_question_rules():
    plan = may20_plan()
    tasks = dict(plan.tasks)
    tasks["empty"] = TaskDef("empty", TaskKind.COMPOSITION, ())
    tasks["q"] = TaskDef("q", TaskKind.QUESTIONNAIRE, questions=(QuestionRef("mood", True), QuestionRef("gone")))
    tasks["slow"] = TaskDef("slow", TaskKind.TRANSCRIPTION, ("x",), timeout_s=0)
    questions = {
        "mood": Question("mood", QuestionKind.SLIDER_SCALE, "Mood?", scale_min=5, scale_max=1),
        "pick": Question("pick", QuestionKind.SINGLE_CHOICE, "Pick", choices=("only",)),
    }
    got = set(rules(replace(plan, tasks=tasks, questions=questions)))
    assert got == {
        "needs at least one sentence",
        "unknown question gone",
        "timeout_s must be positive",
        "scale needs min < max",
        "choice question needs at least two options",
    }


def test_study_window_and_timezone_rules():
    plan = may20_plan()
    assert "start_date after end_date" in rules(replace(plan, end_date=date(2024, 5, 19)))
    assert "unknown timezone 'Mars/Base'" in rules(replace(plan, timezone="Mars/Base"))
    assert "date outside study window" in rules(replace(plan, start_date=date(2024, 5, 21), end_date=date(2024, 5, 22)))


def test_active_tasks_may20():
    plan = may20_plan()
    (got,) = active_tasks(plan, "U1", datetime(2024, 5, 20, 10, 0))
    assert got.task.task_id == "t1" and len(got.task.sentences) == 10
    assert got.notification.fire_at == datetime(2024, 5, 20, 9, 0, tzinfo=got.notification.fire_at.tzinfo)
    assert active_tasks(plan, "U1", datetime(2024, 5, 21, 10, 0)) == []
    assert active_tasks(plan, "stranger", datetime(2024, 5, 20, 10, 0)) == []


def test_window_is_closed_on_both_ends():
    plan = may20_plan()
    for t in (time(9), time(23)):
        assert active_tasks(plan, "U1", datetime.combine(date(2024, 5, 20), t))
    assert not active_tasks(plan, "U1", datetime(2024, 5, 20, 8, 59, 59))
    assert not active_tasks(plan, "U1", datetime(2024, 5, 20, 23, 0, 1))


def test_study_timezone_applies_to_aware_times():
    plan = replace(may20_plan(), timezone="Europe/Zurich")
    # 08:30 UTC is 10:30 in Zurich in May
    assert active_tasks(plan, "U1", datetime(2024, 5, 20, 8, 30, tzinfo=timezone.utc))
    assert not active_tasks(plan, "U1", datetime(2024, 5, 20, 21, 30, tzinfo=timezone.utc))


def test_notifications_for_day():
    ((tf, note),) = notifications_for_day(may20_plan(), "U1", date(2024, 5, 20))
    assert note.title == "Typing task" and note.fire_at.hour == 9


def test_shift_by_week_keeps_weekday_and_window():
    (s,) = may20_plan().schedules
    shifted = shift_schedule(s, 7)
    ((d0, tf0),) = s.timeframes
    ((d1, tf1),) = shifted.timeframes
    assert (d1 - d0).days == 7 and d1.weekday() == d0.weekday()
    assert (tf1.start_time, tf1.end_time, tf1.task_ids) == (time(9), time(23), ("t1",))
    assert shift_schedule(s, 0) == s
    assert shift_schedule(shift_schedule(s, -1), 1) == s


def test_shift_composes():
    (s,) = may20_plan().schedules
    rng = np.random.default_rng(0)
    for a, b in rng.integers(-400, 400, size=(100, 2)):
        a, b = int(a), int(b)
        assert shift_schedule(s, a + b) == shift_schedule(shift_schedule(s, a), b)


def test_shifted_plan_stays_valid_and_active():
    plan = shift_plan(may20_plan(), 7)
    assert validate_plan(plan) == []
    assert active_tasks(plan, "U1", datetime(2024, 5, 27, 10))
    assert not active_tasks(plan, "U1", datetime(2024, 5, 20, 10))


def test_order_phrases():
    task = may20_plan().tasks["t1"]
    assert order_phrases(task, 3) == list(task.sentences)
    rand = replace(task, randomize=True)
    assert order_phrases(rand, 3) == order_phrases(rand, 3)
    assert sorted(order_phrases(rand, 3)) == sorted(task.sentences)
    # same seed, different task id: different stream
    assert order_phrases(rand, 3) != order_phrases(replace(rand, task_id="t2"), 3)


def test_order_phrases_differ_across_seeds():
    task = TaskDef("t", TaskKind.TRANSCRIPTION, tuple("abcde"), randomize=True)
    same = sum(order_phrases(task, 2 * i) == order_phrases(task, 2 * i + 1) for i in range(100))
    # 1/120 chance per pair
    assert same <= 5


def test_fisher_yates_is_uniform():
    task = TaskDef("t", TaskKind.TRANSCRIPTION, tuple("abc"), randomize=True)
    counts = {}
    for seed in range(6000):
        key = "".join(order_phrases(task, seed))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    assert all(abs(c - 1000) < 150 for c in counts.values())


@pytest.mark.parametrize(
    "timeout, elapsed, index, want",
    [
        (120, 119, 3, TimeoutDecision.PRESENT_NEXT),
        (120, 121, 3, TimeoutDecision.STOP),
        (120, 120, 3, TimeoutDecision.PRESENT_NEXT),
        (None, 10**6, 3, TimeoutDecision.PRESENT_NEXT),
        (None, 0, 10, TimeoutDecision.STOP),
    ],
)
def test_apply_timeout(timeout, elapsed, index, want):
    task = replace(may20_plan().tasks["t1"], timeout_s=timeout)
    assert apply_timeout(task, elapsed, index) is want


def test_plan_json_round_trip():
    plan = may20_plan()
    plan = replace(
        plan,
        timezone="Europe/Zurich",
        tasks={**plan.tasks, "q": TaskDef("q", TaskKind.QUESTIONNAIRE, questions=(QuestionRef("m", True),)),
               "c": TaskDef("c", TaskKind.CUSTOM, params={"url": "x", "n": 2})},
        questions={"m": Question("m", QuestionKind.BUTTON_SCALE, "Mood", "", 1, 5, ("low", "high"))},
    )
    assert plan_from_dict(plan_to_dict(plan)) == plan

