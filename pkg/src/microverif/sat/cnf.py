"""Tseitin encoding of AIG goals, DIMACS I/O and model checking."""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ..aig import FALSE, TRUE, current_aig
from ..bitvec import BitVec, WidthError


class PartialModel(ValueError):
    pass


class SolverOutputError(ValueError):
    """External solver output could not be parsed."""


@dataclass
class Cnf:
    num_vars: int
    clauses: list[list[int]]
    var_map: dict[int, int] = field(default_factory=dict)  # AIG node -> CNF var
    inputs: dict[int, int] = field(default_factory=dict)  # AIG input node -> CNF var

    def env_from_model(self, model: Mapping[int, bool]) -> dict[int, bool]:
        """Project a CNF model onto AIG input ids."""
        return {node: bool(model.get(v, False)) for node, v in self.inputs.items()}


def tseitin_encode(goal: BitVec) -> Cnf:
    """Equisatisfiable CNF for ``goal == 1``."""
    if goal.width != 1:
        raise WidthError("goal must be a 1-bit vector")
    lit = goal.bits[0]
    if lit == TRUE:
        return Cnf(0, [])
    if lit == FALSE:
        return Cnf(0, [[]])
    aig = current_aig()
    var_map: dict[int, int] = {}
    inputs: dict[int, int] = {}
    clauses: list[list[int]] = []
    for node in aig.cone([lit]):
        v = len(var_map) + 1
        var_map[node] = v
        if aig.is_input(node):
            inputs[node] = v
            continue
        a, b = aig.fanins(node)
        la = _cnf_lit(var_map, a)
        lb = _cnf_lit(var_map, b)
        clauses.append([-la, -lb, v])
        clauses.append([la, -v])
        clauses.append([lb, -v])
    clauses.append([_cnf_lit(var_map, lit)])
    return Cnf(len(var_map), clauses, var_map, inputs)


def _cnf_lit(var_map: dict[int, int], lit: int) -> int:
    v = var_map[lit >> 1]
    return -v if lit & 1 else v


def check_model(cnf: Cnf, model: Mapping[int, bool]) -> bool:
    """True iff every clause has a literal satisfied by ``model``."""
    for v in range(1, cnf.num_vars + 1):
        if v not in model:
            raise PartialModel(f"model does not assign variable {v}")
    for clause in cnf.clauses:
        if not any(model[abs(l)] == (l > 0) for l in clause):
            return False
    return True


def export_dimacs(cnf: Cnf, path: str | os.PathLike) -> Path:
    path = Path(path)
    lines = [f"p cnf {cnf.num_vars} {len(cnf.clauses)}"]
    lines.extend(" ".join(map(str, c + [0])) for c in cnf.clauses)
    path.write_text("\n".join(lines) + "\n")
    return path


def parse_dimacs(text: str) -> Cnf:
    num_vars = None
    clauses: list[list[int]] = []
    current: list[int] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise SolverOutputError(f"bad header: {line!r}")
            num_vars = int(parts[2])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(current)
                current = []
            else:
                current.append(lit)
    if num_vars is None:
        raise SolverOutputError("missing 'p cnf' header")
    return Cnf(num_vars, clauses)


def import_external_verdict(path: str | os.PathLike, cnf: Cnf):
    """Parse SAT-competition style solver output saved at ``path``."""
    return parse_solver_output(Path(path).read_text(), cnf)


def parse_solver_output(text: str, cnf: Cnf):
    from .solver import SatResult

    status = None
    values: list[int] = []
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("s "):
            status = line[2:].strip()
        elif line.startswith("v "):
            values.extend(int(t) for t in line[2:].split())
    if status == "UNSATISFIABLE":
        return SatResult("unsat", external=True)
    if status == "SATISFIABLE":
        model = {v: False for v in range(1, cnf.num_vars + 1)}
        for lit in values:
            if lit == 0:
                continue
            if abs(lit) > cnf.num_vars:
                raise SolverOutputError(f"model literal {lit} out of range")
            model[abs(lit)] = lit > 0
        if not check_model(cnf, model):
            raise SolverOutputError("external model does not satisfy the CNF")
        return SatResult("sat", model=model, external=True)
    if status in ("UNKNOWN", "INDETERMINATE"):
        return SatResult("timeout", external=True)
    raise SolverOutputError("no 's ...' status line in solver output")


def solve_external(cnf: Cnf, command: str, timeout: float = 300.0):
    """Run ``command <file.cnf>`` and parse its stdout."""
    from .solver import SatResult

    with tempfile.TemporaryDirectory() as tmp:
        path = export_dimacs(cnf, Path(tmp) / "goal.cnf")
        try:
            proc = subprocess.run(
                shlex.split(command) + [str(path)],
                capture_output=True,
                text=True,
                timeout=timeout,
            )
        except subprocess.TimeoutExpired:
            return SatResult("timeout", external=True)
    return parse_solver_output(proc.stdout, cnf)
