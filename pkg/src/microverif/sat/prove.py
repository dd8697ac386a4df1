"""Equivalence queries over bitvectors."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..aig import FALSE, current_aig
from ..bitvec import BitVec, WidthError, bv_eval
from .cnf import tseitin_encode
from .solver import Budget, SatResult, solve

SIM_PATTERNS = 512


@dataclass
class ProofResult:
    verdict: str  # "proved" | "counterexample" | "timeout"
    env: Optional[dict[int, bool]] = None
    stats: dict = field(default_factory=dict)
    name: str = ""
    replay: Optional[dict] = None
    detail: str = ""

    @property
    def proved(self) -> bool:
        return self.verdict == "proved"


class ReplayFailure(AssertionError):
    """A counterexample did not reproduce when evaluated concretely."""


def check_goal(
    goal: BitVec,
    budget: Budget | None = None,
    seed: int = 0,
    external: str | None = None,
) -> SatResult:
    """Satisfiability of a 1-bit goal; sat results carry an AIG-input env."""
    budget = budget or Budget()
    lit = goal.bit
    if lit == FALSE:
        return SatResult("unsat", stats={"solver_calls": 0})
    env = _simulate_for_witness(goal, seed)
    if env is not None:
        return SatResult("sat", model=env, stats={"solver_calls": 0, "simulated": True})
    cnf = tseitin_encode(goal)
    if external:
        from .cnf import solve_external

        res = solve_external(cnf, external, timeout=budget.seconds)
    else:
        res = solve(cnf, budget, seed=seed)
    res.stats["solver_calls"] = 1
    res.stats["clauses"] = len(cnf.clauses)
    if res.is_sat:
        env = cnf.env_from_model(res.model)
        if bv_eval(goal, env) != 1:
            raise ReplayFailure("solver model does not satisfy the goal")
        res.model = env
    return res


def _simulate_for_witness(goal: BitVec, seed: int) -> dict[int, bool] | None:
    aig = current_aig()
    inputs = aig.support(goal.bits)
    if not inputs:
        return None
    rng = random.Random(seed)
    pats = {v: rng.getrandbits(SIM_PATTERNS) for v in inputs}
    (out,) = aig.simulate(goal.bits, pats, SIM_PATTERNS)
    if not out:
        return None
    k = (out & -out).bit_length() - 1
    return {v: bool((p >> k) & 1) for v, p in pats.items()}


def prove_valid(
    prop: BitVec,
    assumptions: Sequence[BitVec] = (),
    budget: Budget | None = None,
    seed: int = 0,
    name: str = "",
    external: str | None = None,
) -> ProofResult:
    """Prove ``AND(assumptions) -> prop`` for every input assignment."""
    aig = current_aig()
    hyp = aig.and_all(a.bit for a in assumptions)
    goal = BitVec((aig.and_(hyp, prop.bit ^ 1),))
    t0 = time.perf_counter()
    res = check_goal(goal, budget, seed, external)
    return _to_proof(res, name, t0)


def prove_equal(
    a: BitVec,
    b: BitVec,
    assumptions: Sequence[BitVec] = (),
    budget: Budget | None = None,
    seed: int = 0,
    name: str = "",
    split_outputs: bool = True,
    external: str | None = None,
) -> ProofResult:
    """Prove ``AND(assumptions) -> a == b``.

    With ``split_outputs`` each differing output bit is its own SAT query,
    which keeps cones small for wide datapaths.
    """
    if a.width != b.width:
        raise WidthError(f"width mismatch: {a.width} vs {b.width}")
    budget = budget or Budget()
    aig = current_aig()
    t0 = time.perf_counter()
    hyp = aig.and_all(x.bit for x in assumptions)
    diffs = [aig.xor(x, y) for x, y in zip(a.bits, b.bits)]
    diffs = [d for d in diffs if d != FALSE]
    stats = {"solver_calls": 0, "conflicts": 0, "outputs": len(diffs)}
    if not diffs or hyp == FALSE:
        return ProofResult("proved", stats={**stats, "seconds": time.perf_counter() - t0}, name=name)
    # cheap global witness search first
    whole = BitVec((aig.and_(hyp, aig.or_all(diffs)),))
    env = _simulate_for_witness(whole, seed)
    if env is not None:
        return ProofResult("counterexample", env=env,
                           stats={**stats, "seconds": time.perf_counter() - t0}, name=name)
    groups = [[d] for d in diffs] if split_outputs else [diffs]
    deadline = t0 + budget.seconds
    for g in groups:
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            return ProofResult("timeout", stats={**stats, "seconds": time.perf_counter() - t0}, name=name)
        goal = BitVec((aig.and_(hyp, aig.or_all(g)),))
        if goal.bit == FALSE:
            continue
        res = check_goal(goal, Budget(remaining, budget.conflicts), seed, external)
        stats["solver_calls"] += res.stats.get("solver_calls", 0)
        stats["conflicts"] += res.stats.get("conflicts", 0)
        if res.is_sat:
            return ProofResult("counterexample", env=res.model,
                               stats={**stats, "seconds": time.perf_counter() - t0}, name=name)
        if res.verdict == "timeout":
            return ProofResult("timeout", stats={**stats, "seconds": time.perf_counter() - t0}, name=name)
    stats["seconds"] = time.perf_counter() - t0
    return ProofResult("proved", stats=stats, name=name)


def _to_proof(res: SatResult, name: str, t0: float) -> ProofResult:
    stats = dict(res.stats)
    stats["seconds"] = time.perf_counter() - t0
    if res.is_unsat:
        return ProofResult("proved", stats=stats, name=name)
    if res.is_sat:
        return ProofResult("counterexample", env=res.model, stats=stats, name=name)
    return ProofResult("timeout", stats=stats, name=name)
