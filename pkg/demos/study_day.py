"""Walk through one study day: what is active when, and what a shift does."""

import json
from datetime import datetime
from pathlib import Path

from keytrace.schedule import active_tasks, plan_from_dict, shift_plan, validate_plan

PLAN = Path(__file__).with_name("may20_study.json")


def main():
    plan = plan_from_dict(json.loads(PLAN.read_text()))
    assert validate_plan(plan) == []
    who = next(iter(plan.assignments))
    for when in ("2024-05-20T08:00", "2024-05-20T10:00", "2024-05-20T23:30", "2024-05-21T10:00"):
        tasks = active_tasks(plan, who, datetime.fromisoformat(when))
        names = ", ".join(f"{a.task.task_id} ({len(a.task.sentences)} sentences)" for a in tasks) or "nothing"
        print(f"{when}: {names}")

    later = shift_plan(plan, 7)
    print()
    print("shifted by a week:")
    for when in ("2024-05-20T10:00", "2024-05-27T10:00"):
        print(f"{when}: {len(active_tasks(later, who, datetime.fromisoformat(when)))} active")


if __name__ == "__main__":
    main()
