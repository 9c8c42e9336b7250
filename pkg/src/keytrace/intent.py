"""Dictionary lookup, spell-checker suggestions and intended-text inference.

The reference checker ranks dictionary words within a Damerau-Levenshtein
radius by (distance, -frequency, word). Candidates are gathered with a
symmetric-delete index: every candidate within distance d of a query shares
a string obtainable by at most d deletions from each side, and the exact
distance is then checked for each of them.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .distance import damerau_levenshtein

DEFAULT_MAX_DISTANCE = 2
DEFAULT_MAX_SUGGESTIONS = 5

_TOKEN = re.compile(r"\S+")
_EDGES = re.compile(r"^([\W_]*)(.*?)([\W_]*)$", re.S)


class Provenance(str, Enum):
    DICTIONARY_HIT = "dictionary_hit"
    SPELLCHECK_TOP = "spellcheck_top"
    UNRESOLVED = "unresolved"


def normalize(word: str) -> str:
    """Lowercase and drop leading/trailing punctuation."""
    return _EDGES.match(word).group(2).lower()


def _deletes(word: str, depth: int) -> set[str]:
    out = {word}
    n = len(word)
    for d in range(1, min(depth, n) + 1):
        for drop in combinations(range(n), d):
            out.add("".join(ch for i, ch in enumerate(word) if i not in drop))
    return out


@dataclass(frozen=True)
class Dictionary:
    entries: Mapping[str, int]
    language: str = "en"
    _index: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if not self.entries:
            raise ValueError("dictionary must not be empty")
        bad = [w for w, f in self.entries.items() if w != w.lower() or f < 0]
        if bad:
            raise ValueError(f"entries must be lowercase with non-negative frequency: {bad[:5]}")

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def delete_index(self, depth: int) -> dict[str, list[str]]:
        idx = self._index.get(depth)
        if idx is None:
            acc: dict[str, list[str]] = defaultdict(list)
            for w in self.entries:
                for d in _deletes(w, depth):
                    acc[d].append(w)
            idx = self._index[depth] = dict(acc)
        return idx


def parse_dictionary(lines: Sequence[str] | str, language: str = "en") -> Dictionary:
    """Parse ``word<TAB>frequency`` lines; a missing frequency counts as 1."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    entries: dict[str, int] = {}
    for line in lines:
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        word, _, freq = line.partition("\t")
        word = word.strip().lower()
        entries[word] = entries.get(word, 0) + (int(freq) if freq.strip() else 1)
    return Dictionary(entries, language)


def load_dictionary(path: str | Path, language: str | None = None) -> Dictionary:
    path = Path(path)
    return parse_dictionary(path.read_text(encoding="utf-8"), language or path.stem)


@lru_cache(maxsize=1)
def default_dictionary() -> Dictionary:
    text = resources.files("keytrace.data").joinpath("en.tsv").read_text(encoding="utf-8")
    return parse_dictionary(text, "en")


def lookup(dictionary: Dictionary, word: str) -> bool:
    w = normalize(word)
    return bool(w) and w in dictionary.entries


def suggest(
    dictionary: Dictionary,
    context: Sequence[str],
    word: str,
    k: int = DEFAULT_MAX_SUGGESTIONS,
    max_distance: int = DEFAULT_MAX_DISTANCE,
) -> list[str]:
    """Up to *k* dictionary words within *max_distance* of *word*, best first.

    *context* (the intent words before *word*) is accepted for checkers that
    re-rank by sentence context; the reference checker ignores it.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    w = normalize(word)
    if not w:
        return []
    idx = dictionary.delete_index(max_distance)
    seen: set[str] = set()
    scored = []
    for d in _deletes(w, max_distance):
        for cand in idx.get(d, ()):
            if cand in seen:
                continue
            seen.add(cand)
            if abs(len(cand) - len(w)) > max_distance:
                continue
            dist = damerau_levenshtein(w, cand)
            if dist <= max_distance:
                scored.append((dist, -dictionary.entries[cand], cand))
    scored.sort()
    return [c for _, _, c in scored[:k]]


SuggestFn = Callable[[Sequence[str], str], Sequence[str]]


@dataclass(frozen=True)
class IntentResult:
    intent_words: tuple[tuple[str, Provenance], ...]
    # intended text with the typed whitespace layout preserved
    text: str

    def count(self, provenance: Provenance) -> int:
        return sum(1 for _, p in self.intent_words if p is provenance)


def infer_intent(
    dictionary: Dictionary,
    transcribed: str,
    *,
    max_distance: int = DEFAULT_MAX_DISTANCE,
    max_suggestions: int = DEFAULT_MAX_SUGGESTIONS,
    checker: SuggestFn | None = None,
) -> IntentResult:
    """Guess the intended text word by word.

    Known words are kept as typed. Unknown words are replaced by the
    checker's top suggestion (surrounding punctuation kept); words with no
    suggestion stay as typed.
    """
    if checker is None:
        def checker(context, word):
            return suggest(dictionary, context, word, max_suggestions, max_distance)

    words: list[tuple[str, Provenance]] = []
    pieces: list[str] = []
    last = 0
    for m in _TOKEN.finditer(transcribed):
        token = m.group()
        lead, core, trail = _EDGES.match(token).groups()
        if core and core.lower() in dictionary.entries:
            out, prov = token, Provenance.DICTIONARY_HIT
        else:
            ranked = checker([w for w, _ in words], core) if core else []
            if ranked:
                out, prov = lead + ranked[0] + trail, Provenance.SPELLCHECK_TOP
            else:
                out, prov = token, Provenance.UNRESOLVED
        words.append((out, prov))
        pieces.append(transcribed[last:m.start()])
        pieces.append(out)
        last = m.end()
    pieces.append(transcribed[last:])
    return IntentResult(tuple(words), "".join(pieces))


def validate_intent(target: str, inferred: IntentResult) -> float:
    """Share of position-aligned words that agree, over the longer word count.

    Words compare after lowercasing and trimming edge punctuation. Two
    empty texts agree fully.
    """
    a = [normalize(w) for w in target.split()]
    b = [normalize(w) for w, _ in inferred.intent_words]
    denom = max(len(a), len(b))
    if denom == 0:
        return 1.0
    return sum(1 for x, y in zip(a, b) if x == y) / denom
