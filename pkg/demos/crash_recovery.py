"""Kill a flush halfway through and show that reopening loses nothing."""

import tempfile

from keytrace import CollectionMode, DocumentStore, SyncBuffer, enqueue, flush, redact
from keytrace.metrics import SessionMetrics
from keytrace.storage import SimulatedCrash


def record(token, i):
    return redact(SessionMetrics(mode=CollectionMode.IMPLICIT, user_token=token, wpm=20.0 + i))


def main():
    with tempfile.TemporaryDirectory() as root:
        store, buf = DocumentStore(root), SyncBuffer.open(root)
        for i in range(6):
            enqueue(buf, record("ALICE" if i % 2 else "BOB", i))
        print(f"queued {len(buf)} records")

        seen = []

        def crash_on_third(stage, entry):
            if stage == "after_append":
                seen.append(entry)
                if len(seen) == 3:
                    raise SimulatedCrash("power cut")

        buf.fault = crash_on_third
        try:
            flush(buf, store)
        except SimulatedCrash as exc:
            print(f"crashed during flush: {exc}")

        # a fresh process opens the same directory
        store, buf = DocumentStore(root), SyncBuffer.open(root)
        # the third record reached disk but was never acknowledged, so it is queued again
        print(f"after reopen: {len(list(store.records()))} stored, {len(buf)} still queued")
        flush(buf, store)
        keys = sorted((r.token, r.seq) for r in store.records())
        print(f"after retry: {keys}")
        assert len(keys) == len(set(keys)) == 6


if __name__ == "__main__":
    main()
