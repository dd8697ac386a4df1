import itertools
import random
import sys
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from microverif.aig import current_aig
from microverif.bitvec import BitVec, bv_eval, bv_eq
from microverif.sat import (
    Budget,
    Cnf,
    PartialModel,
    SolverOutputError,
    check_goal,
    check_model,
    export_dimacs,
    import_external_verdict,
    parse_dimacs,
    prove_equal,
    solve,
    solve_external,
    tseitin_encode,
)

SHIM = f"{sys.executable} {Path(__file__).parent / 'tools' / 'pysat_shim.py'}"


def _random_goal(rng, n_inputs, n_gates):
    g = current_aig()
    lits = [g.new_input(f"x{k}") for k in range(n_inputs)]
    for _ in range(n_gates):
        op = rng.random()
        a = rng.choice(lits) ^ rng.getrandbits(1)
        b = rng.choice(lits) ^ rng.getrandbits(1)
        lits.append(g.xor(a, b) if op < 0.3 else g.and_(a, b))
    return [l >> 1 for l in lits[:n_inputs]], lits[-1]


def _truth_table(nodes, lit):
    n = len(nodes)
    total = 1 << n
    pats = {}
    for i, v in enumerate(nodes):
        pats[v] = sum(1 << k for k in range(total) if k >> i & 1)
    (col,) = current_aig().simulate([lit], pats, total)
    return col, total


def _node_values(cnf, nodes, k):
    g = current_aig()
    env = {v: bool(k >> i & 1) for i, v in enumerate(nodes)}
    vals = g.evaluate([n << 1 for n in cnf.var_map], env)
    return {cnf.var_map[n]: b for n, b in zip(cnf.var_map, vals)}


def test_tseitin_exhaustive_oracle():
    """Every assignment of every random AIG: the Tseitin extension satisfies the CNF iff the goal is 1."""
    rng = random.Random(12)
    disagreements = 0
    for trial in range(60):
        n = rng.randint(1, 12)
        nodes, lit = _random_goal(rng, n, rng.randint(1, 40))
        goal = BitVec((lit,))
        cnf = tseitin_encode(goal)
        if cnf.num_vars == 0:
            continue
        col, total = _truth_table(nodes, lit)
        for k in range(total):
            model = _node_values(cnf, nodes, k)
            for v in range(1, cnf.num_vars + 1):
                model.setdefault(v, False)
            disagreements += check_model(cnf, model) != bool(col >> k & 1)
        # satisfiability of the whole CNF matches the truth table
        res = solve(cnf, seed=trial)
        disagreements += res.is_sat != (col != 0)
        if res.is_sat:
            disagreements += bv_eval(goal, cnf.env_from_model(res.model)) != 1
    assert disagreements == 0


def test_tseitin_all_assignments_small():
    """Full enumeration (no stride) over 12 inputs for a handful of AIGs."""
    rng = random.Random(3)
    for _ in range(3):
        nodes, lit = _random_goal(rng, 12, 30)
        cnf = tseitin_encode(BitVec((lit,)))
        col, total = _truth_table(nodes, lit)
        for k in range(total):
            model = _node_values(cnf, nodes, k)
            assert check_model(cnf, model) == bool(col >> k & 1)


def pigeonhole(holes):
    pigeons = holes + 1
    var = lambda p, h: p * holes + h + 1  # noqa: E731
    clauses = [[var(p, h) for h in range(holes)] for p in range(pigeons)]
    for h in range(holes):
        for p, q in itertools.combinations(range(pigeons), 2):
            clauses.append([-var(p, h), -var(q, h)])
    return Cnf(pigeons * holes, clauses)


@pytest.mark.parametrize("holes", [2, 3, 4, 5])
def test_pigeonhole_unsat(holes):
    assert solve(pigeonhole(holes), Budget(60)).is_unsat


def test_conflict_budget_gives_timeout():
    res = solve(pigeonhole(7), Budget(60, conflicts=5))
    assert res.verdict == "timeout"


@given(st.integers(0, 10_000))
def test_random_3sat_models_check(seed):
    rng = random.Random(seed)
    n = rng.randint(5, 30)
    clauses = [[rng.choice([-1, 1]) * rng.randint(1, n) for _ in range(3)] for _ in range(rng.randint(1, 5 * n))]
    cnf = Cnf(n, clauses)
    res = solve(cnf, seed=seed)
    if res.is_sat:
        assert check_model(cnf, res.model)
    else:
        # brute force agreement for small instances
        if n <= 14:
            for k in range(1 << n):
                m = {v: bool(k >> (v - 1) & 1) for v in range(1, n + 1)}
                assert not check_model(cnf, m)


def test_partial_model_rejected():
    with pytest.raises(PartialModel):
        check_model(Cnf(2, [[1, 2]]), {1: True})


def test_dimacs_round_trip(tmp_path):
    rng = random.Random(5)
    _, lit = _random_goal(rng, 8, 30)
    cnf = tseitin_encode(BitVec((lit,)))
    path = export_dimacs(cnf, tmp_path / "g.cnf")
    back = parse_dimacs(path.read_text())
    assert back.num_vars == cnf.num_vars
    assert back.clauses == cnf.clauses


def test_dimacs_header_required():
    with pytest.raises(SolverOutputError):
        parse_dimacs("1 2 0\n")


def test_prove_equal_commutativity_and_counterexample():
    a, b = BitVec.var(16, "a"), BitVec.var(16, "b")
    assert prove_equal(a + b, b + a).proved
    bad = prove_equal(a + b, a | b)
    assert bad.verdict == "counterexample"
    assert bv_eval(a + b, bad.env) != bv_eval(a | b, bad.env)


def test_prove_equal_under_assumptions():
    a, b = BitVec.var(8, "a"), BitVec.var(8, "b")
    assert prove_equal(a ^ b, a | b, assumptions=[bv_eq(a & b, BitVec.const(8, 0))]).proved


def test_check_goal_finds_rare_witness():
    x = BitVec.var(32, "x")
    res = check_goal(bv_eq(x, BitVec.const(32, 0xDEADBEEF)))
    assert res.is_sat and bv_eval(x, res.model) == 0xDEADBEEF


def test_external_solver_agrees():
    pytest.importorskip("pysat")
    rng = random.Random(9)
    for trial in range(10):
        _, lit = _random_goal(rng, 10, 40)
        cnf = tseitin_encode(BitVec((lit,)))
        if cnf.num_vars == 0:
            continue
        ours = solve(cnf, seed=trial)
        theirs = solve_external(cnf, SHIM)
        assert ours.is_sat == theirs.is_sat
        if theirs.is_sat:
            assert check_model(cnf, theirs.model)
    assert solve_external(pigeonhole(4), SHIM).is_unsat


def test_external_output_parsing(tmp_path):
    cnf = Cnf(2, [[1], [-2]])
    out = tmp_path / "out.txt"
    out.write_text("c hi\ns SATISFIABLE\nv 1 -2 0\n")
    assert import_external_verdict(out, cnf).is_sat
    out.write_text("s SATISFIABLE\nv -1 -2 0\n")
    with pytest.raises(SolverOutputError):
        import_external_verdict(out, cnf)
    out.write_text("garbage\n")
    with pytest.raises(SolverOutputError):
        import_external_verdict(out, cnf)
