from functools import lru_cache
from itertools import product

from hypothesis import given, settings
from hypothesis import strategies as st

from keytrace.alignment import OpKind, align, consumed_by_prefix, prefix_consumed


def recursive_levenshtein(a: str, b: str) -> int:
    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def test_examples():
    a = align("quixk", "quick")
    assert a.distance == 1
    (sub,) = [op for op in a.ops if op.kind is not OpKind.MATCH]
    assert (sub.kind, sub.final_char, sub.intent_char) == (OpKind.SUBSTITUTION, "x", "c")
    assert align("abc", "abc").distance == 0
    a = align("ac", "abc")
    assert a.distance == 1
    (om,) = [op for op in a.ops if op.kind is not OpKind.MATCH]
    assert (om.kind, om.intent_char) == (OpKind.OMISSION, "b")


def test_substitution_beats_gap_pair():
    a = align("axc", "abc")
    assert [op.kind for op in a.ops].count(OpKind.SUBSTITUTION) == 1
    assert a.count(OpKind.INSERTION) == a.count(OpKind.OMISSION) == 0


def test_gaps_land_early():
    # "helo" vs "hello": the omitted 'l' is the first one
    a = align("helo", "hello")
    (om,) = [op for op in a.ops if op.kind is OpKind.OMISSION]
    assert om.intent_index == 2


def test_small_exhaustive_set():
    strings = ["".join(p) for n in range(5) for p in product("abc", repeat=n)]
    for x in strings:
        for y in strings:
            assert align(x, y).distance == recursive_levenshtein(x, y)


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="abcd", max_size=10), st.text(alphabet="abcd", max_size=10))
def test_ops_rebuild_both_strings(final, intent):
    a = align(final, intent)
    assert "".join(op.final_char for op in a.ops) == final
    assert "".join(op.intent_char for op in a.ops) == intent
    assert a.distance == sum(op.kind is not OpKind.MATCH for op in a.ops)
    for op in a.ops:
        if op.kind is OpKind.MATCH:
            assert op.final_char == op.intent_char
        if op.kind is OpKind.SUBSTITUTION:
            assert op.final_char != op.intent_char


def test_consumed_by_prefix():
    a = align("hllo", "hello")
    assert consumed_by_prefix(a.ops, 4) == [0, 1, 3, 4, 5]


def test_prefix_consumed():
    assert prefix_consumed("", "hello") == 0
    assert prefix_consumed("hel", "hello") == 3
    assert prefix_consumed("hxl", "hello") == 3
    assert prefix_consumed("hllo", "hello") == 5
