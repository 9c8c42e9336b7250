"""Simulate a week of typing for three people, analyze it, print a report.

Run with ``python demos/walkthrough.py``. Everything lands in a temporary
store that is removed afterwards.
"""

import tempfile
from datetime import datetime, timedelta, timezone

from keytrace import AggregateQuery, CollectionMode, Config, DocumentStore, GroupBy, SyncBuffer, aggregate, analyze
from keytrace.simulator import TypistProfile, load_phrases, simulate

PEOPLE = {
    "CAREFUL": TypistProfile(target_wpm=25, substitution_rate=0.01, correction_probability=0.95),
    "HASTY": TypistProfile(target_wpm=55, substitution_rate=0.06, insertion_rate=0.03,
                           omission_rate=0.03, correction_probability=0.4),
    "SUGGESTS": TypistProfile(target_wpm=35, substitution_rate=0.03, suggestion_use_rate=0.5),
}
START = datetime(2024, 5, 20, 8, tzinfo=timezone.utc)


def main():
    phrases = load_phrases()
    sessions, ledgers = [], {}
    for p, (token, prof) in enumerate(PEOPLE.items()):
        for day in range(7):
            for k in range(3):
                seed = (p * 7 + day) * 3 + k
                s, ledger = simulate(phrases[seed % len(phrases)], prof, seed, user_token=token,
                                     started_at=START + timedelta(days=day, hours=4 * k))
                sessions.append(s)
                ledgers.setdefault(token, []).append(ledger)

    with tempfile.TemporaryDirectory() as root:
        store, buf = DocumentStore(root), SyncBuffer.open(root)
        summary = analyze(sessions, CollectionMode.IMPLICIT, Config(), store, buf, study_id="demo")
        print("\n".join(summary.lines()))

        q = AggregateQuery("demo", START - timedelta(days=1), START + timedelta(days=8), GroupBy.USER)
        print()
        print(aggregate(store, q).to_markdown())

    # what the simulator knows and the stored records never see
    print()
    for token, ls in ledgers.items():
        fixed = sum(ledger.corrected_total for ledger in ls)
        left = sum(ledger.uncorrected_total for ledger in ls)
        print(f"{token}: {fixed} errors fixed, {left} left in place")


if __name__ == "__main__":
    main()
