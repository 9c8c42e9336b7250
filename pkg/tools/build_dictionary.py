"""Regenerate the bundled English frequency dictionary.

Needs ``wordfreq`` at build time only; the package reads the TSV it writes.

    python tools/build_dictionary.py src/keytrace/data/en.tsv
"""

import re
import sys

from wordfreq import top_n_list, word_frequency

WORD = re.compile(r"^[a-z]+(?:'[a-z]+)?$")


def main(out_path, n=15000):
    rows = []
    for word in top_n_list("en", n):
        if not WORD.match(word):
            continue
        freq = int(word_frequency(word, "en") * 1e9)
        if freq > 0:
            rows.append((word, freq))
    with open(out_path, "w", encoding="utf-8") as fh:
        for word, freq in rows:
            fh.write(f"{word}\t{freq}\n")
    print(f"wrote {len(rows)} entries to {out_path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "en.tsv")
