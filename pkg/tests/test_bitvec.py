"""BitVec: concrete and symbolic evaluation against plain integers."""

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from microverif.aig import current_aig
from microverif.bitvec import (
    BitVec,
    WidthError,
    bv_eq,
    bv_eval,
    bv_mux,
    bv_shift,
    bv_ult,
    concat_all,
    env_for,
)
from oracles import mask, ror, shl, shr, to_signed

N_CASES = 10_000
WIDTHS = (1, 3, 4, 8, 13, 16, 32, 64)


def _sim(out, inputs):
    """Evaluate ``out`` for N_CASES assignments at once; inputs are (vec, values)."""
    pats = {}
    for vec, values in inputs:
        for i, lit in enumerate(vec.bits):
            p = 0
            for k, v in enumerate(values):
                p |= (v >> i & 1) << k
            pats[lit >> 1] = p
    cols = current_aig().simulate(out.bits, pats, len(inputs[0][1]))
    n = len(inputs[0][1])
    return [sum((cols[i] >> k & 1) << i for i in range(out.width)) for k in range(n)]


BINARY = {
    "and": (lambda a, b: a & b, lambda a, b, w: a & b),
    "or": (lambda a, b: a | b, lambda a, b, w: a | b),
    "xor": (lambda a, b: a ^ b, lambda a, b, w: a ^ b),
    "add": (lambda a, b: a + b, lambda a, b, w: (a + b) & mask(w)),
    "sub": (lambda a, b: a - b, lambda a, b, w: (a - b) & mask(w)),
    "eq": (bv_eq, lambda a, b, w: int(a == b)),
    "ult": (bv_ult, lambda a, b, w: int(a < b)),
}


@pytest.mark.parametrize("op", sorted(BINARY))
def test_binary_ops_match_integers(op):
    fn, ref = BINARY[op]
    rng = random.Random(op)
    cases = {w: [] for w in WIDTHS}
    for _ in range(N_CASES):
        w = rng.choice(WIDTHS)
        cases[w].append((rng.getrandbits(w), rng.getrandbits(w)))
    bad = 0
    for w, pairs in cases.items():
        a, b = BitVec.var(w, "a"), BitVec.var(w, "b")
        sym = _sim(fn(a, b), [(a, [x for x, _ in pairs]), (b, [y for _, y in pairs])])
        for (x, y), s in zip(pairs, sym):
            want = ref(x, y, w)
            got = fn(BitVec.const(w, x), BitVec.const(w, y)).value
            bad += (got != want) + (s != want)
    assert bad == 0


SHIFTS = {"SHL": shl, "SHR": shr, "ROR": ror}


@pytest.mark.parametrize("op", sorted(SHIFTS))
def test_shifts_match_integers(op):
    rng = random.Random(op)
    cases = {w: [] for w in WIDTHS}
    for _ in range(N_CASES):
        w = rng.choice(WIDTHS)
        cases[w].append((rng.getrandbits(w), rng.getrandbits(8)))
    bad = 0
    for w, pairs in cases.items():
        a, c = BitVec.var(w, "a"), BitVec.var(8, "c")
        sym = _sim(bv_shift(op, a, c), [(a, [x for x, _ in pairs]), (c, [k for _, k in pairs])])
        for (x, k), s in zip(pairs, sym):
            want = SHIFTS[op](x, k, w)
            got = bv_shift(op, BitVec.const(w, x), BitVec.const(8, k)).value
            bad += (got != want) + (s != want)
    assert bad == 0


def test_structural_ops_match_integers():
    rng = random.Random(7)
    bad = 0
    for _ in range(N_CASES):
        w = rng.randint(1, 64)
        x = rng.getrandbits(w)
        lo = rng.randrange(w)
        hi = rng.randrange(lo, w)
        ext = w + rng.randint(0, 16)
        y = rng.getrandbits(5)
        v = BitVec.const(w, x)
        bad += v.slice(lo, hi).value != (x >> lo) & mask(hi - lo + 1)
        bad += v.zext(ext).value != x
        bad += v.sext(ext).value != to_signed(x, w) & mask(ext)
        bad += v.concat(BitVec.const(5, y)).value != (y << w | x)
        bad += (~v).value != x ^ mask(w)
    assert bad == 0


def test_structural_ops_symbolic():
    rng = random.Random(8)
    for w in (1, 5, 16, 33):
        a = BitVec.var(w, "a")
        outs = [a.zext(w + 7), a.sext(w + 7), a.concat(a), a.slice(0, w - 1), -a]
        vals = [rng.getrandbits(w) for _ in range(500)]
        refs = [
            lambda x: x,
            lambda x: to_signed(x, w) & mask(w + 7),
            lambda x: x << w | x,
            lambda x: x,
            lambda x: -x & mask(w),
        ]
        for out, ref in zip(outs, refs):
            assert _sim(out, [(a, vals)]) == [ref(x) for x in vals]


def test_mux_and_eval():
    a, b, s = BitVec.var(8, "a"), BitVec.var(8, "b"), BitVec.var(1, "s")
    m = bv_mux(s, a, b)
    env = {**env_for(a, 0x12), **env_for(b, 0x34), **env_for(s, 1)}
    assert bv_eval(m, env) == 0x12
    env.update(env_for(s, 0))
    assert bv_eval(m, env) == 0x34


def test_constant_folding_keeps_values_concrete():
    x = BitVec.const(64, 0x0123456789ABCDEF)
    assert (x + BitVec.const(64, 1)).value == 0x0123456789ABCDF0
    assert (x ^ x).value == 0
    assert concat_all([BitVec.const(4, 0xF), BitVec.const(4, 0x1)]).value == 0x1F


def test_width_errors():
    with pytest.raises(WidthError):
        BitVec.const(4, 1) & BitVec.const(5, 1)
    with pytest.raises(WidthError):
        bv_mux(BitVec.const(2, 1), BitVec.const(4, 0), BitVec.const(4, 0))


@given(st.integers(1, 64).flatmap(lambda w: st.tuples(st.just(w), st.integers(0, (1 << w) - 1),
                                                        st.integers(0, (1 << w) - 1))))
def test_sub_is_add_of_negation(t):
    w, x, y = t
    a, b = BitVec.const(w, x), BitVec.const(w, y)
    assert (a - b).value == (a + (-b)).value


@given(st.integers(1, 64), st.data())
def test_hash_consing_makes_equal_structures_identical(w, data):
    a, b = BitVec.var(w, "a"), BitVec.var(w, "b")
    assert (a & b) == (b & a)
    assert (a ^ b) == (b ^ a)
    assert bv_eq(a, a).value == 1
