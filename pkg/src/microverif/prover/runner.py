"""Job queue for obligations, manifests and CNF export."""

from __future__ import annotations

import os
import re
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Optional, Sequence

from ..aig import aig_scope, current_aig
from ..bitvec import BitVec
from ..design.bugs import enabled_bugs, inject_bug, reset_bugs
from ..design.rom import RomImage, active_rom, set_active_rom
from ..sat import ProofResult, export_dimacs, tseitin_encode
from .obligations import ProofObligation, registry, run_obligation, symbolic_mk


def read_manifest(path: str | os.PathLike) -> list[str]:
    """Obligation ids, one per line; blank lines and ``#`` comments are skipped."""
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def write_manifest(names: Iterable[str], path: str | os.PathLike) -> Path:
    path = Path(path)
    path.write_text("".join(f"{n}\n" for n in names))
    return path


def resolve(names: Sequence[str]) -> list[ProofObligation]:
    reg = registry()
    missing = [n for n in names if n not in reg]
    if missing:
        raise KeyError(f"unknown obligation(s): {', '.join(missing)}")
    return [reg[n] for n in names]


def _worker(name: str, bugs: frozenset, rom_text: str, seed: int, external: Optional[str],
            budget: Optional[float]) -> ProofResult:
    # workers start from a clean configuration and copy the parent's
    reset_bugs()
    for b in bugs:
        inject_bug(b)
    set_active_rom(RomImage.from_text(rom_text))
    return run_obligation(registry()[name], seed, external, budget)


def run_jobs(
    obligations: Sequence[ProofObligation],
    jobs: int = 1,
    seed: int = 0,
    external: str | None = None,
    budget: float | None = None,
) -> list[tuple[ProofObligation, ProofResult]]:
    """Discharge ``obligations``; results come back in input order."""
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    if jobs == 1 or len(obligations) <= 1:
        return [(ob, run_obligation(ob, seed, external, budget)) for ob in obligations]
    bugs, rom_text = enabled_bugs(), active_rom().to_text()
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futs = [pool.submit(_worker, ob.name, bugs, rom_text, seed, external, budget) for ob in obligations]
        return [(ob, f.result()) for ob, f in zip(obligations, futs)]


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name.replace("->", "-to-")).strip("_")


def export_cnf(obligations: Sequence[ProofObligation], out_dir: str | os.PathLike) -> list[Path]:
    """One DIMACS file per obligation: satisfiable iff the obligation fails."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for ob in obligations:
        with aig_scope():
            goal = ob.build(symbolic_mk)
            a, b = goal.vectors()
            g = current_aig()
            hyp = g.and_all(x.bit for x in goal.assumptions)
            miter = g.and_(hyp, g.or_all(g.xor(x, y) for x, y in zip(a.bits, b.bits)))
            cnf = tseitin_encode(BitVec((miter,)))
        paths.append(export_dimacs(cnf, out_dir / f"{_safe(ob.name)}.cnf"))
    return paths
