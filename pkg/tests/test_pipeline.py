import json
from dataclasses import replace
from datetime import datetime

from keytrace.config import Config
from keytrace.events import CollectionMode, FieldContext, FieldKind, LogLineError
from keytrace.intent import default_dictionary
from keytrace.pipeline import analyze, process_session
from keytrace.privacy import RedactedMetrics, leak_check, serialize
from keytrace.segmenter import DiscardRecord
from keytrace.simulator import TypistProfile, simulate
from keytrace.storage import DocumentStore, SyncBuffer

from conftest import make_session

DICT = default_dictionary()
CFG = Config()


def run(session, mode=CollectionMode.IMPLICIT):
    return process_session(session, mode, CFG, DICT)


def test_password_session_leaves_nothing():
    recs, s = run(make_session("hunter2", field=FieldContext(FieldKind.PASSWORD)))
    assert recs == [] and s.trials_excluded == 1 and s.records_written == 0


def test_incognito_session_leaves_nothing():
    recs, s = run(make_session("hello", incognito=True))
    assert recs == [] and s.trials_excluded == 1


def test_invalid_session_is_counted():
    s = make_session("ab")
    s = replace(s, keyboard_hidden_ts_ms=0)
    recs, summary = run(s)
    assert recs == [] and summary.sessions_invalid == 1 and summary.has_data_errors


def test_transcription_needs_a_target():
    recs, s = run(make_session("ab"), CollectionMode.TRANSCRIPTION)
    assert recs == [] and s.sessions_invalid == 1


def test_records_carry_the_envelope():
    session, _ = simulate("see you soon", TypistProfile(), seed=1, user_token="TOK",
                          started_at=datetime(2024, 5, 20, 10))
    session = replace(session, study_id="st", task_id="t1")
    (rec,), s = run(session)
    assert isinstance(rec, RedactedMetrics)
    assert (rec.user_token, rec.study_id, rec.task_id) == ("TOK", "st", "t1")
    assert rec.recorded_at.startswith("2024-05-20T10:00:0")
    assert leak_check(serialize(rec), "see you soon")


def test_discard_propagates_to_later_trials():
    field = FieldContext(FieldKind.NORMAL, 10)
    s = make_session("abcd", times=[0, 100, 30_000, 30_100], cursor=[(150, 2, 2)], field=field)
    recs, summary = run(s)
    assert summary.trials_discarded == 2 and all(isinstance(r, DiscardRecord) for r in recs)


def test_continuation_trial_uses_base_length():
    field = FieldContext(FieldKind.NORMAL, 0)
    s = make_session("abcd", times=[0, 100, 30_000, 30_100], field=field)
    recs, summary = run(s, CollectionMode.COMPOSITION)
    assert summary.trials_processed == 2
    assert [r.raw_text for r in recs] == ["ab", "cd"]


def test_analyze_counts_and_stores(tmp_path):
    store = DocumentStore(tmp_path)
    buf = SyncBuffer.open(tmp_path)
    good, _ = simulate("well done", TypistProfile(), seed=2, user_token="A")
    pw = replace(make_session("secret", field=FieldContext(FieldKind.PASSWORD)), user_token="A")
    items = [good, LogLineError(3, "bad json"), pw]
    summary = analyze(items, CollectionMode.IMPLICIT, CFG, store, buf, study_id="st")
    assert (summary.sessions_read, summary.malformed_lines, summary.trials_excluded, summary.records_written) == (2, 1, 1, 1)
    assert len(list(store.records(study_id="st"))) == 1
    assert "records written: 1" in "\n".join(summary.lines())


def test_offline_analyze_buffers(tmp_path):
    store = DocumentStore(tmp_path)
    buf = SyncBuffer.open(tmp_path)
    s, _ = simulate("well done", TypistProfile(), seed=2, user_token="A")
    analyze([s], CollectionMode.IMPLICIT, CFG, store, buf, connectivity=False)
    assert list(store.records()) == [] and len(buf) == 1
    line = json.loads(buf.wal_path.read_text())
    assert "raw_text" not in line["record"]
