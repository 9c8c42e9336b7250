"""Minimum string distance alignment between transcribed and intended text."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class OpKind(str, Enum):
    MATCH = "match"
    SUBSTITUTION = "substitution"
    INSERTION = "insertion"  # extra character in the transcribed text
    OMISSION = "omission"  # intended character missing from the transcribed text


@dataclass(frozen=True)
class EditOp:
    kind: OpKind
    final_index: int | None
    intent_index: int | None
    final_char: str = ""
    intent_char: str = ""


@dataclass(frozen=True)
class Alignment:
    ops: tuple[EditOp, ...]
    distance: int

    def count(self, kind: OpKind) -> int:
        return sum(1 for op in self.ops if op.kind is kind)


def _table(a: str, b: str) -> list[list[int]]:
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        row, prev, ca = d[i], d[i - 1], a[i - 1]
        row[0] = i
        for j in range(1, len(b) + 1):
            row[j] = min(prev[j] + 1, row[j - 1] + 1, prev[j - 1] + (ca != b[j - 1]))
    return d


def align(final: str, intent: str) -> Alignment:
    """Optimal unit-cost alignment of *final* against *intent*.

    Ties resolve toward a diagonal step (match or substitution) first,
    walking back from the end, so gaps land as early as possible and a
    substitution always wins over an insertion/omission pair.
    """
    d = _table(final, intent)
    i, j = len(final), len(intent)
    ops: list[EditOp] = []
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            same = final[i - 1] == intent[j - 1]
            if d[i][j] == d[i - 1][j - 1] + (not same):
                kind = OpKind.MATCH if same else OpKind.SUBSTITUTION
                ops.append(EditOp(kind, i - 1, j - 1, final[i - 1], intent[j - 1]))
                i, j = i - 1, j - 1
                continue
        if i > 0 and d[i][j] == d[i - 1][j] + 1:
            ops.append(EditOp(OpKind.INSERTION, i - 1, None, final[i - 1], ""))
            i -= 1
        else:
            ops.append(EditOp(OpKind.OMISSION, None, j - 1, "", intent[j - 1]))
            j -= 1
    ops.reverse()
    return Alignment(tuple(ops), d[len(final)][len(intent)])


def consumed_by_prefix(ops: tuple[EditOp, ...], final_len: int) -> list[int]:
    """``out[k]``: intended characters accounted for by ``final[:k]``.

    Omissions sitting between ``final[k-1]`` and ``final[k]`` are not
    counted for ``k``; they belong to whatever comes next.
    """
    out = [0] * (final_len + 1)
    consumed = 0
    for op in ops:
        if op.intent_index is not None:
            consumed += 1
        if op.final_index is not None:
            out[op.final_index + 1] = consumed
    return out


def prefix_consumed(prefix: str, intent: str) -> int:
    """Best intent-prefix length for *prefix* when its future is unknown.

    Semi-global alignment: *prefix* is consumed whole, the intent may stop
    anywhere. Among equally cheap stopping points the one closest to
    ``len(prefix)`` wins, then the shorter.
    """
    last = _table(prefix, intent)[-1]
    best = min(last)
    n = len(prefix)
    return min((j for j, v in enumerate(last) if v == best), key=lambda j: (abs(j - n), j))
