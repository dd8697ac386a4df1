import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from microverif.aig import FALSE, TRUE, Aig, MissingVariable, aig_scope, current_aig


def test_constants_and_simplification():
    g = Aig()
    x = g.new_input("x")
    assert g.and_(x, FALSE) == FALSE
    assert g.and_(x, TRUE) == x
    assert g.and_(x, x) == x
    assert g.and_(x, x ^ 1) == FALSE
    assert g.num_ands == 0


def test_structural_hashing():
    g = Aig()
    x, y = g.new_input("x"), g.new_input("y")
    a = g.and_(x, y)
    assert g.and_(y, x) == a
    assert g.num_ands == 1
    assert g.input_name(x >> 1) == "x"


def test_scope_isolation():
    outer = current_aig()
    with aig_scope() as inner:
        assert current_aig() is inner
        inner.new_input()
    assert current_aig() is outer


def test_missing_variable():
    g = Aig()
    x, y = g.new_input(), g.new_input()
    with pytest.raises(MissingVariable):
        g.evaluate([g.and_(x, y)], {x >> 1: True})


def _random_aig(rng, n_inputs, n_gates):
    g = Aig()
    lits = [g.new_input(f"i{k}") for k in range(n_inputs)]
    for _ in range(n_gates):
        a, b = rng.choice(lits) ^ rng.getrandbits(1), rng.choice(lits) ^ rng.getrandbits(1)
        lits.append(g.and_(a, b))
    return g, lits[:n_inputs], lits[-1]


@given(st.integers(0, 10_000))
def test_simulate_agrees_with_single_evaluation(seed):
    rng = random.Random(seed)
    g, ins, out = _random_aig(rng, 6, 25)
    nodes = [i >> 1 for i in ins]
    pats = {v: rng.getrandbits(64) for v in nodes}
    (col,) = g.simulate([out], pats, 64)
    for k in range(64):
        (b,) = g.evaluate([out], {v: bool(p >> k & 1) for v, p in pats.items()})
        assert b == bool(col >> k & 1)


@given(st.integers(0, 10_000))
def test_compose_substitutes_inputs(seed):
    rng = random.Random(seed)
    g, ins, out = _random_aig(rng, 5, 20)
    x0 = ins[0] >> 1
    # substituting a constant equals evaluating with that constant
    (fixed,) = g.compose([out], {x0: TRUE})
    for _ in range(20):
        env = {i >> 1: bool(rng.getrandbits(1)) for i in ins}
        env[x0] = True
        assert g.evaluate([fixed], env) == g.evaluate([out], env)
    assert x0 not in g.support([fixed])
