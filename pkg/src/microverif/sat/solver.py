"""Embedded CDCL solver.

Two watched literals, first-UIP learning with local minimisation, VSIDS
with a lazy heap, phase saving, Luby restarts and LBD-based clause
deletion. Internal literals are ``2 * var + negated``.
"""

from __future__ import annotations

import heapq
import random
import time
from dataclasses import dataclass, field
from typing import Optional

from .cnf import Cnf, check_model


@dataclass
class Budget:
    seconds: float = 300.0
    conflicts: Optional[int] = None


@dataclass
class SatResult:
    verdict: str  # "sat" | "unsat" | "timeout"
    model: Optional[dict[int, bool]] = None
    stats: dict = field(default_factory=dict)
    external: bool = False

    @property
    def is_sat(self) -> bool:
        return self.verdict == "sat"

    @property
    def is_unsat(self) -> bool:
        return self.verdict == "unsat"


class ModelCheckError(AssertionError):
    """The solver produced a model that does not satisfy its input."""


def _luby(i: int) -> int:
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) >> 1
        seq -= 1
        i %= size
    return 1 << seq


class Solver:
    def __init__(self, cnf: Cnf, seed: int = 0):
        self.cnf = cnf
        n = cnf.num_vars
        self.n = n
        self.rng = random.Random(seed)
        self.clauses: list[list[int]] = []
        self.learnt: list[bool] = []
        self.lbd: list[int] = []
        self.deleted: list[bool] = []
        self.watches: list[list[int]] = [[] for _ in range(2 * n + 2)]
        self.value = [0] * (2 * n + 2)  # per literal: 1 true, -1 false, 0 unassigned
        self.level = [0] * (n + 1)
        self.reason = [-1] * (n + 1)
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.activity = [0.0] * (n + 1)
        self.var_inc = 1.0
        self.polarity = [True] * (n + 1)  # True -> try the negative literal
        self.seen = [False] * (n + 1)
        self.heap = [(0.0, self.rng.random(), v) for v in range(1, n + 1)]
        heapq.heapify(self.heap)
        self.conflicts = 0
        self.decisions = 0
        self.propagations = 0
        self.ok = True
        for clause in cnf.clauses:
            if not self._add_input_clause(clause):
                self.ok = False
                break

    # -- clause database ----------------------------------------------------

    def _add_input_clause(self, clause: list[int]) -> bool:
        lits = sorted({2 * abs(l) + (l < 0) for l in clause})
        for a, b in zip(lits, lits[1:]):
            if a ^ 1 == b:
                return True  # tautology
        lits = [l for l in lits if self.value[l] != -1]
        if any(self.value[l] == 1 for l in lits):
            return True
        if not lits:
            return False
        if len(lits) == 1:
            self._enqueue(lits[0], -1)
            return self._propagate() < 0
        self._attach(lits, learnt=False, lbd=0)
        return True

    def _attach(self, lits: list[int], learnt: bool, lbd: int) -> int:
        ci = len(self.clauses)
        self.clauses.append(lits)
        self.learnt.append(learnt)
        self.lbd.append(lbd)
        self.deleted.append(False)
        self.watches[lits[0]].append(ci)
        self.watches[lits[1]].append(ci)
        return ci

    # -- assignment ---------------------------------------------------------

    def _enqueue(self, lit: int, reason: int) -> None:
        value = self.value
        value[lit] = 1
        value[lit ^ 1] = -1
        v = lit >> 1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self) -> int:
        """Unit propagation; returns a conflicting clause index or -1."""
        value = self.value
        watches = self.watches
        clauses = self.clauses
        trail = self.trail
        level = self.level
        reason = self.reason
        dlevel = len(self.trail_lim)
        qhead = self.qhead
        conflict = -1
        while qhead < len(trail):
            p = trail[qhead]
            qhead += 1
            false_lit = p ^ 1
            ws = watches[false_lit]
            i = j = 0
            n_ws = len(ws)
            while i < n_ws:
                ci = ws[i]
                i += 1
                c = clauses[ci]
                if c[0] == false_lit:
                    c[0] = c[1]
                    c[1] = false_lit
                first = c[0]
                if value[first] == 1:
                    ws[j] = ci
                    j += 1
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if value[lk] != -1:
                        c[1] = lk
                        c[k] = false_lit
                        watches[lk].append(ci)
                        break
                else:
                    ws[j] = ci
                    j += 1
                    if value[first] == -1:
                        conflict = ci
                        while i < n_ws:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        break
                    value[first] = 1
                    value[first ^ 1] = -1
                    v = first >> 1
                    level[v] = dlevel
                    reason[v] = ci
                    trail.append(first)
            del ws[j:]
            if conflict >= 0:
                break
        self.propagations += qhead - self.qhead
        self.qhead = qhead
        return conflict

    def _bump(self, v: int) -> None:
        act = self.activity[v] + self.var_inc
        self.activity[v] = act
        if act > 1e100:
            self.activity = [a * 1e-100 for a in self.activity]
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[u], 0.0, u) for u in range(1, self.n + 1)
                         if self.value[2 * u] == 0]
            heapq.heapify(self.heap)
            return
        if self.value[2 * v] == 0:
            heapq.heappush(self.heap, (-act, 0.0, v))

    def _analyze(self, confl: int) -> tuple[list[int], int]:
        seen = self.seen
        level = self.level
        reason = self.reason
        trail = self.trail
        dlevel = len(self.trail_lim)
        learnt = [0]
        counter = 0
        p = -1
        idx = len(trail) - 1
        to_clear = []
        while True:
            c = self.clauses[confl]
            if self.learnt[confl]:
                self.lbd[confl] = min(self.lbd[confl], self._lbd(c))
            start = 0 if p == -1 else 1
            for q in c[start:]:
                v = q >> 1
                if not seen[v] and level[v] > 0:
                    seen[v] = True
                    to_clear.append(v)
                    self._bump(v)
                    if level[v] >= dlevel:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[trail[idx] >> 1]:
                idx -= 1
            p = trail[idx]
            idx -= 1
            confl = reason[p >> 1]
            seen[p >> 1] = False
            counter -= 1
            if counter == 0:
                break
        learnt[0] = p ^ 1
        # local minimisation: drop literals implied by other learnt literals
        keep = [learnt[0]]
        for q in learnt[1:]:
            r = reason[q >> 1]
            if r < 0:
                keep.append(q)
                continue
            for x in self.clauses[r][1:]:
                if not seen[x >> 1] and level[x >> 1] > 0:
                    keep.append(q)
                    break
        for v in to_clear:
            seen[v] = False
        learnt = keep
        if len(learnt) == 1:
            back = 0
        else:
            mi = max(range(1, len(learnt)), key=lambda k: level[learnt[k] >> 1])
            learnt[1], learnt[mi] = learnt[mi], learnt[1]
            back = level[learnt[1] >> 1]
        return learnt, back

    def _lbd(self, lits: list[int]) -> int:
        level = self.level
        return len({level[l >> 1] for l in lits})

    def _cancel_until(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        value = self.value
        polarity = self.polarity
        heap = self.heap
        activity = self.activity
        stop = self.trail_lim[lvl]
        for lit in self.trail[stop:]:
            v = lit >> 1
            value[lit] = 0
            value[lit ^ 1] = 0
            polarity[v] = bool(lit & 1)
            self.reason[v] = -1
            heapq.heappush(heap, (-activity[v], 0.0, v))
        del self.trail[stop:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)
        if len(heap) > 8 * self.n + 64:
            self.heap = [(-activity[u], 0.0, u) for u in range(1, self.n + 1)
                         if value[2 * u] == 0]
            heapq.heapify(self.heap)

    def _pick(self) -> int:
        heap = self.heap
        value = self.value
        activity = self.activity
        while heap:
            neg_act, _, v = heapq.heappop(heap)
            if value[2 * v] == 0 and -neg_act == activity[v]:
                return 2 * v + (1 if self.polarity[v] else 0)
        for v in range(1, self.n + 1):
            if value[2 * v] == 0:
                return 2 * v + (1 if self.polarity[v] else 0)
        return -1

    def _reduce_db(self) -> None:
        locked = {self.reason[l >> 1] for l in self.trail}
        cands = [
            ci for ci in range(len(self.clauses))
            if self.learnt[ci] and not self.deleted[ci] and self.lbd[ci] > 2
            and ci not in locked and len(self.clauses[ci]) > 2
        ]
        cands.sort(key=lambda ci: self.lbd[ci], reverse=True)
        drop = set(cands[: len(cands) // 2])
        if not drop:
            return
        for ci in drop:
            self.deleted[ci] = True
        for lit in range(len(self.watches)):
            ws = self.watches[lit]
            if ws:
                self.watches[lit] = [ci for ci in ws if ci not in drop]

    # -- main loop ----------------------------------------------------------

    def solve(self, budget: Budget | None = None) -> SatResult:
        budget = budget or Budget()
        t0 = time.perf_counter()
        deadline = t0 + budget.seconds
        if not self.ok:
            return self._result("unsat", t0)
        if self._propagate() >= 0:
            return self._result("unsat", t0)
        restart_no = 0
        next_restart = 100 * _luby(0)
        restart_conflicts = 0
        next_reduce = 2000
        while True:
            confl = self._propagate()
            if confl >= 0:
                self.conflicts += 1
                restart_conflicts += 1
                if not self.trail_lim:
                    return self._result("unsat", t0)
                learnt, back = self._analyze(confl)
                self._cancel_until(back)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], -1)
                else:
                    ci = self._attach(learnt, learnt=True, lbd=self._lbd(learnt))
                    self._enqueue(learnt[0], ci)
                self.var_inc *= 1.0 / 0.95
                if (self.conflicts & 255) == 0 and time.perf_counter() > deadline:
                    return self._result("timeout", t0)
                if budget.conflicts is not None and self.conflicts >= budget.conflicts:
                    return self._result("timeout", t0)
                continue
            if restart_conflicts >= next_restart:
                restart_no += 1
                restart_conflicts = 0
                next_restart = 100 * _luby(restart_no)
                self._cancel_until(0)
            if self.conflicts >= next_reduce:
                next_reduce = self.conflicts + 2000 + 300 * restart_no
                self._reduce_db()
            lit = self._pick()
            if lit < 0:
                model = {v: self.value[2 * v] == 1 for v in range(1, self.n + 1)}
                if not check_model(self.cnf, model):
                    raise ModelCheckError("CDCL model fails its own CNF")
                res = self._result("sat", t0)
                res.model = model
                return res
            self.decisions += 1
            self.trail_lim.append(len(self.trail))
            self._enqueue(lit, -1)

    def _result(self, verdict: str, t0: float) -> SatResult:
        return SatResult(
            verdict,
            stats={
                "conflicts": self.conflicts,
                "decisions": self.decisions,
                "propagations": self.propagations,
                "seconds": time.perf_counter() - t0,
            },
        )


def solve(cnf: Cnf, budget: Budget | None = None, seed: int = 0) -> SatResult:
    """Decide ``cnf``. Sat models are verified against every clause."""
    return Solver(cnf, seed=seed).solve(budget)
