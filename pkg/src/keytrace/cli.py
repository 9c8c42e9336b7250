"""Command line entry point: ``keytrace <subcommand>``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 persistence error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from datetime import date, datetime, timedelta
from pathlib import Path
from zoneinfo import ZoneInfo

from .config import STORE_ENV, Config, ConfigError, load_config
from .events import CollectionMode, iter_jsonl, write_jsonl
from .pipeline import analyze
from .report import AggregateQuery, GroupBy, aggregate
from .schedule import (
    TEXT_TASKS,
    TaskKind,
    TimeoutDecision,
    apply_timeout,
    dump_plan,
    load_plan,
    notifications_for_day,
    order_phrases,
    plan_to_dict,
    shift_plan,
    validate_plan,
)
from .simulator import TypistProfile, load_phrases, simulate, spread_over_days
from .storage import DocumentStore, NotFoundError, PersistenceError, SyncBuffer, delete_user, export_user

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PERSIST = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args) -> Config:
    return load_config(
        args.config,
        idle_timeout_ms=getattr(args, "idle_timeout_ms", None),
        max_distance=getattr(args, "max_distance", None),
        max_suggestions=getattr(args, "max_suggestions", None),
        flight_endpoints=getattr(args, "flight_endpoints", None),
        dictionary=getattr(args, "dictionary", None),
        store=getattr(args, "store", None),
        timezone=getattr(args, "timezone", None),
    )


def _store(cfg: Config) -> DocumentStore:
    path = cfg.store_path()
    if path is None:
        raise UsageError(f"no store: pass --store, set it in the config, or set {STORE_ENV}")
    return DocumentStore(path)


def _datetime(s: str, tz: str) -> datetime:
    dt = datetime.fromisoformat(s)
    return dt if dt.tzinfo else dt.replace(tzinfo=ZoneInfo(tz))


def _profile(args) -> TypistProfile:
    prof = TypistProfile.load(args.profile) if args.profile else TypistProfile()
    overrides = {
        k: getattr(args, k)
        for k in ("target_wpm", "substitution_rate", "insertion_rate", "omission_rate", "correction_probability",
                  "suggestion_use_rate", "min_error_gap")
        if getattr(args, k, None) is not None
    }
    return replace(prof, **overrides) if overrides else prof


# -- subcommands ------------------------------------------------------------


def cmd_analyze(args) -> int:
    cfg = _config(args)
    store = _store(cfg)
    buffer = SyncBuffer.open(store.root)
    t0 = time.perf_counter()
    summary = analyze(
        (item for _, item in iter_jsonl(args.input)),
        CollectionMode(args.mode),
        cfg,
        store,
        buffer,
        study_id=args.study_id,
        connectivity=not args.offline,
    )
    for line in summary.lines():
        print(line)
    for p in summary.problems:
        print(f"skipped: {p}", file=sys.stderr)
    if not args.deterministic:
        print(f"elapsed: {time.perf_counter() - t0:.3f}s")
    return EXIT_DATA if args.strict and summary.has_data_errors else EXIT_OK


def _ledger_path(out: Path, given: str | None) -> Path:
    return Path(given) if given else out.with_name(out.name + ".ledger.json")


def cmd_simulate(args) -> int:
    cfg = _config(args)
    profile = _profile(args)
    targets = [args.text] if args.text else load_phrases()
    starts = spread_over_days(_datetime(args.start, cfg.timezone), args.n, args.days)
    sessions, ledgers = [], []
    for i in range(args.n):
        target = targets[i % len(targets)]
        session, ledger = simulate(
            target, profile, args.seed + i, user_token=args.user, started_at=starts[i],
            session_id=f"sim-{args.seed}-{i}",
        )
        session = replace(session, study_id=args.study_id, task_id=args.task_id, target_phrase=target)
        sessions.append(session)
        ledgers.append({"session_id": session.session_id, **ledger.to_dict()})
    out = Path(args.out)
    write_jsonl(out, sessions)
    ledger_path = _ledger_path(out, args.ledger)
    ledger_path.write_text(json.dumps(ledgers, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(sessions)} sessions to {out}")
    print(f"wrote ground truth to {ledger_path}")
    return EXIT_OK


def cmd_study_validate(args) -> int:
    plan = load_plan(args.plan)
    problems = validate_plan(plan)
    for p in problems:
        print(p)
    if problems:
        return EXIT_DATA
    print(f"study {plan.study_id}: ok ({len(plan.schedules)} schedules, {len(plan.tasks)} tasks)")
    return EXIT_OK


def cmd_study_shift(args) -> int:
    plan = shift_plan(load_plan(args.plan), args.days)
    if args.out:
        dump_plan(plan, args.out)
        print(f"shifted {plan.study_id} by {args.days} days into {args.out}")
    else:
        print(json.dumps(plan_to_dict(plan), indent=2, ensure_ascii=False))
    return EXIT_OK


def cmd_study_simulate_day(args) -> int:
    """Walk one study day: list each participant's notifications and simulate their text tasks."""
    plan = load_plan(args.plan)
    problems = validate_plan(plan)
    if problems:
        raise DataError(f"invalid plan: {problems[0]}")
    day = date.fromisoformat(args.day)
    profile = _profile(args)
    sessions = []
    n = 0
    for token in sorted(plan.assignments):
        for tf, note in notifications_for_day(plan, token, day):
            print(f"{token} {note.fire_at.isoformat()} {note.title}: {', '.join(tf.task_ids)}")
            clock = note.fire_at + timedelta(minutes=5)
            for tid in tf.task_ids:
                task = plan.tasks[tid]
                if task.kind not in TEXT_TASKS:
                    continue
                sentences = order_phrases(task, args.seed) if task.kind is TaskKind.TRANSCRIPTION else ()
                if task.kind is TaskKind.COMPOSITION:
                    sentences = tuple(task.params.get("example_texts", ())) or tuple(load_phrases()[:1])
                elapsed = 0.0
                for k, sentence in enumerate(sentences):
                    if apply_timeout(task, elapsed, k) is TimeoutDecision.STOP:
                        break
                    session, _ = simulate(
                        sentence, profile, args.seed + n, user_token=token, started_at=clock,
                        session_id=f"{plan.study_id}-{day.isoformat()}-{n}",
                    )
                    n += 1
                    session = replace(
                        session, study_id=plan.study_id, task_id=tid,
                        target_phrase=sentence if task.kind is TaskKind.TRANSCRIPTION else None,
                    )
                    sessions.append(session)
                    took = session.keyboard_hidden_ts_ms / 1000.0
                    elapsed += took
                    clock += timedelta(seconds=took + 2)
    if args.out:
        write_jsonl(args.out, sessions)
        print(f"wrote {len(sessions)} sessions to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _config(args)
    store = _store(cfg)
    plan = store.load_plan(args.study_id)
    if args.plan:
        plan = load_plan(args.plan)
    tz = plan.timezone if plan else cfg.timezone
    q = AggregateQuery(
        args.study_id, _datetime(args.period_from, tz), _datetime(args.period_to, tz),
        GroupBy(args.group_by), args.token,
    )
    now = _datetime(args.now, tz) if args.now else None
    report = aggregate(store, q, plan, now=now)
    print(report.to_markdown() if args.format == "markdown" else report.to_json())
    return EXIT_OK


def cmd_export_user(args) -> int:
    store = _store(_config(args))
    archive = export_user(store, args.token)
    if args.out:
        archive.write_zip(args.out)
        print(f"exported {len(archive.records)} records to {args.out}")
    else:
        sys.stdout.write(archive.jsonl())
    return EXIT_OK


def cmd_delete_user(args) -> int:
    store = _store(_config(args))
    buffer = SyncBuffer.open(store.root)
    delete_user(store, args.token, buffer)
    print(f"deleted {args.token}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _common(p: argparse.ArgumentParser, store: bool = True) -> None:
    p.add_argument("--config", help="JSON config file")
    if store:
        p.add_argument("--store", help=f"store directory (default: config, then ${STORE_ENV})")


def _profile_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--profile", help="typist profile JSON")
    p.add_argument("--target-wpm", dest="target_wpm", type=float)
    p.add_argument("--substitution-rate", dest="substitution_rate", type=float)
    p.add_argument("--insertion-rate", dest="insertion_rate", type=float)
    p.add_argument("--omission-rate", dest="omission_rate", type=float)
    p.add_argument("--correction-probability", dest="correction_probability", type=float)
    p.add_argument("--suggestion-use-rate", dest="suggestion_use_rate", type=float)
    p.add_argument("--min-error-gap", dest="min_error_gap", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="keytrace", description="Typing telemetry analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="analyze a JSONL session log into the store")
    _common(p)
    p.add_argument("input")
    p.add_argument("--mode", choices=[m.value for m in CollectionMode], default="implicit")
    p.add_argument("--study-id", dest="study_id")
    p.add_argument("--idle-timeout-ms", dest="idle_timeout_ms", type=int)
    p.add_argument("--max-distance", dest="max_distance", type=int)
    p.add_argument("--max-suggestions", dest="max_suggestions", type=int)
    p.add_argument("--flight-endpoints", dest="flight_endpoints")
    p.add_argument("--dictionary")
    p.add_argument("--strict", action="store_true", help="exit 2 when any input line or session is rejected")
    p.add_argument("--offline", action="store_true", help="buffer records without flushing")
    p.add_argument("--deterministic", action="store_true", help="suppress timing output")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="generate seeded synthetic sessions")
    _common(p, store=False)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--ledger", help="ground-truth sidecar (default: <out>.ledger.json)")
    p.add_argument("--text", help="type this text instead of the bundled phrases")
    p.add_argument("--user", default="SIMULATEDUSER")
    p.add_argument("--study-id", dest="study_id")
    p.add_argument("--task-id", dest="task_id")
    p.add_argument("--start", default="2024-05-20T10:00:00")
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--timezone")
    _profile_args(p)
    p.add_argument("--deterministic", action="store_true")
    p.set_defaults(func=cmd_simulate)

    study = sub.add_parser("study", help="study plan tools")
    ssub = study.add_subparsers(dest="study_command", required=True, parser_class=_Parser)
    p = ssub.add_parser("validate")
    _common(p, store=False)
    p.add_argument("plan")
    p.set_defaults(func=cmd_study_validate)
    p = ssub.add_parser("shift")
    _common(p, store=False)
    p.add_argument("plan")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_study_shift)
    p = ssub.add_parser("simulate-day")
    _common(p, store=False)
    p.add_argument("plan")
    p.add_argument("--day", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    _profile_args(p)
    p.set_defaults(func=cmd_study_simulate_day)

    p = sub.add_parser("report", help="aggregate stored metrics")
    _common(p)
    p.add_argument("--study-id", dest="study_id", required=True)
    p.add_argument("--from", dest="period_from", required=True)
    p.add_argument("--to", dest="period_to", required=True)
    p.add_argument("--group-by", dest="group_by", choices=[g.value for g in GroupBy], default="user")
    p.add_argument("--token")
    p.add_argument("--plan", help="study plan file (default: the plan saved in the store)")
    p.add_argument("--now", help="reference time for compliance (default: end of period)")
    p.add_argument("--format", choices=["json", "markdown"], default="json")
    p.add_argument("--timezone")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export-user", help="export every record of one user")
    _common(p)
    p.add_argument("token")
    p.add_argument("--out", help="zip archive path (default: JSONL on stdout)")
    p.set_defaults(func=cmd_export_user)

    p = sub.add_parser("delete-user", help="delete every record of one user")
    _common(p)
    p.add_argument("token")
    p.set_defaults(func=cmd_delete_user)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotFoundError as exc:
        print(f"error: not found: {exc.args[0]}", file=sys.stderr)
        return EXIT_DATA
    except PersistenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PERSIST
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PERSIST if isinstance(exc, PermissionError) else EXIT_DATA
    except (DataError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
