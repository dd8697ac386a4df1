"""Command-line front end.

    microverif run --bytes "48 0F AC D1 10" --state s.state
    microverif trace-ucode --bytes "48 0F AC D1 10" --state s.state
    microverif prove decode|exec|xlate|instr <selector>
    microverif mutate --bug porq-ignores-opmask --prove instr VPSHRDQ/zmm-imm8
    microverif export-cnf --out cnf/ [kind selector]
    microverif report --out report.html

Output is ``key: value`` lines. The exit status is 0 only when every
requested obligation is proved and every replay reproduced.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

ENV_SOLVER = "MICROVERIF_SOLVER"
ENV_BUDGET = "MICROVERIF_BUDGET"
ENV_JOBS = "MICROVERIF_JOBS"

PROVE_KINDS = {"decode": "decode", "exec": "exec", "xlate": "xlate-ucode", "instr": "single-instruction"}


@dataclass
class Config:
    budget: Optional[float] = None  # None: each obligation's default
    jobs: int = 1
    solver: Optional[str] = None
    seed: int = 0
    bugs: list[str] = field(default_factory=list)
    state: Optional[Path] = None
    rom: Optional[Path] = None
    report_dir: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.budget is not None and self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")

    @classmethod
    def from_args(cls, a: argparse.Namespace) -> "Config":
        env = os.environ
        budget = getattr(a, "budget", None)
        if budget is None and env.get(ENV_BUDGET):
            budget = float(env[ENV_BUDGET])
        jobs = getattr(a, "jobs", None) or int(env.get(ENV_JOBS, "1"))
        return cls(
            budget=budget,
            jobs=jobs,
            solver=getattr(a, "solver", None) or env.get(ENV_SOLVER) or None,
            seed=getattr(a, "seed", 0) or 0,
            bugs=list(getattr(a, "bug", None) or []),
            state=Path(a.state) if getattr(a, "state", None) else None,
            rom=Path(a.rom) if getattr(a, "rom", None) else None,
            report_dir=Path(a.report_dir) if getattr(a, "report_dir", None) else None,
        )


class CliError(Exception):
    pass


def _emit(key: str, value: object = "") -> None:
    print(f"{key}: {value}" if value != "" else f"{key}:")


def _hex(v, width: int) -> str:
    return "<symbolic>" if v is None else f"0x{v:0{max(1, (width + 3) // 4)}X}"


# -- setup ------------------------------------------------------------------------------


def _apply(cfg: Config) -> None:
    from .design.bugs import inject_bug, reset_bugs
    from .design.rom import RomImage, assemble_rom, set_active_rom

    reset_bugs()
    for b in cfg.bugs:
        inject_bug(b)
    if cfg.rom is not None:
        text = cfg.rom.read_text()
        img = RomImage.from_text(text) if text.lstrip().startswith(("@", "# label")) else assemble_rom(text)
        set_active_rom(img)


def _load_state(cfg: Config, code_text: str):
    from .isa.decode import parse_hex_bytes
    from .isa.semantics import load_code
    from .isa.state import X86State, parse_state

    state = parse_state(cfg.state.read_text()) if cfg.state else X86State()
    code = parse_hex_bytes(code_text)
    return load_code(state, code), code


# -- run / trace ------------------------------------------------------------------------


def cmd_run(a, cfg: Config) -> int:
    from .isa.decode import x86_fetch_code
    from .isa.semantics import x86_model_step

    state, code = _load_state(cfg, a.bytes)
    if a.engine == "rtl":
        from .isa.semantics import x86_update
        from .prover.compose import rtl_step

        fetched = x86_fetch_code(state.ip, state.memory)
        dec, res = rtl_step(fetched, state)
        if res is None:
            new = x86_update(dec.exception, None, {}, state)
        else:
            new = x86_update(None, res.ex, res.rslts, state, int(dec.instr.length))
    else:
        new = x86_model_step(state)
    _emit("bytes", " ".join(f"{b:02X}" for b in code))
    _emit("engine", a.engine)
    if new.fault:
        _emit("fault", new.fault)
        return 1
    for loc, old, now in state.diff(new):
        _emit(loc, f"{_hex(old.value, old.width)} -> {_hex(now.value, now.width)}")
    return 0


def cmd_trace(a, cfg: Config) -> int:
    from .design.decoder import dut_decode
    from .design.exec_units import dut_exec
    from .design.xlate import dut_xlate
    from .isa.decode import x86_fetch_code
    from .ucode.model import UcodeState, format_trace, run_ucode_model
    from .ucode.semantics import uop_semantics

    state, _ = _load_state(cfg, a.bytes)
    dec = dut_decode(x86_fetch_code(state.ip, state.memory))
    if dec.instr is None:
        _emit("fault", dec.exception)
        return 1
    _emit("instruction", dec.instr.text())
    trace: list = []
    u = UcodeState.initial(dut_xlate(dec.instr), state)
    run_ucode_model(u, dut_exec if a.exec == "rtl" else uop_semantics, trace=trace)
    sys.stdout.write(format_trace(trace))
    return 0


# -- proving ----------------------------------------------------------------------------


def _selected(kind: str, selector: str):
    from .prover import select
    from .prover.compose import dependencies
    from .prover.obligations import registry
    from .prover.queries import default_query
    from .isa.catalog import VARIANTS

    if kind == "instr":
        vids = [v for v in VARIANTS if selector in ("all", v) or v.startswith(selector)]
        if not vids:
            raise CliError(f"no variant matches {selector!r}")
        reg, names = registry(), []
        for v in vids:
            for group in dependencies(default_query(v)).values():
                names += [n for n in group if n not in names]
        return [reg[n] for n in names], vids
    obs = select(selector, PROVE_KINDS[kind])
    if not obs:
        raise CliError(f"no {kind} obligation matches {selector!r}")
    return obs, []


def _print_result(ob, r) -> None:
    _emit(ob.name, f"{r.verdict} {float(r.stats.get('seconds', 0.0)):.2f}s")
    rep = (r.replay or {}).get("report")
    if rep is not None:
        for line in rep.lines():
            print(f"  {line}")


def _write_cex(cex_dir: Optional[str], results) -> None:
    if not cex_dir:
        return
    from .prover.runner import _safe

    d = Path(cex_dir)
    for ob, r in results:
        rep = (r.replay or {}).get("report")
        if rep is not None:
            d.mkdir(parents=True, exist_ok=True)
            path = d / f"{_safe(ob.name)}.txt"
            path.write_text(rep.text())
            _emit("counterexample-file", path)


def _prove(kind: str, selector: str, cfg: Config, a) -> tuple[int, list]:
    from .prover.compose import MissingDependency, prove_single_instruction
    from .prover.runner import read_manifest, resolve, run_jobs

    if getattr(a, "manifest", None):
        obs, vids = resolve(read_manifest(a.manifest)), []
    else:
        obs, vids = _selected(kind, selector)
    results = run_jobs(obs, cfg.jobs, cfg.seed, cfg.solver, cfg.budget)
    for ob, r in results:
        _print_result(ob, r)
    ok = all(r.proved for _, r in results)
    certs = {}
    by_name = {ob.name: r for ob, r in results}
    for vid in vids:
        try:
            cert = prove_single_instruction(vid, by_name, seed=cfg.seed, external=cfg.solver)
        except MissingDependency as e:
            _emit(f"instr/{vid}", f"refused missing {e.name}")
            ok = False
            continue
        certs[vid] = cert
        _emit(f"instr/{vid}", "certified")
        for line in cert.lines():
            print(f"  {line}")
    _write_cex(getattr(a, "cex_dir", None), results)
    if getattr(a, "save", None):
        save_results(results, a.save)
    if cfg.report_dir:
        from .prover.report import generate_report

        cfg.report_dir.mkdir(parents=True, exist_ok=True)
        (cfg.report_dir / "report.txt").write_text(generate_report(results, "text", certs))
        (cfg.report_dir / "report.html").write_text(generate_report(results, "html", certs))
        _emit("report", cfg.report_dir / "report.html")
    _emit("proved", f"{sum(r.proved for _, r in results)}/{len(results)}")
    return (0 if ok else 1), results


def cmd_prove(a, cfg: Config) -> int:
    return _prove(a.kind, a.selector, cfg, a)[0]


def cmd_mutate(a, cfg: Config) -> int:
    if not cfg.bugs:
        raise CliError("mutate needs at least one --bug")
    kind, selector = a.prove
    if kind not in PROVE_KINDS:
        raise CliError(f"unknown obligation kind {kind}")
    for b in cfg.bugs:
        _emit("bug", b)
    code, results = _prove(kind, selector, cfg, a)
    detected = any(r.verdict == "counterexample" for _, r in results)
    _emit("detected", "yes" if detected else "no")
    return code


def cmd_export(a, cfg: Config) -> int:
    from .prover.runner import export_cnf

    obs = _selected(a.kind, a.selector)[0]
    for p in export_cnf(obs, a.out):
        _emit("cnf", p)
    return 0


def cmd_report(a, cfg: Config) -> int:
    from .prover.report import generate_report

    if a.results:
        results = load_results(a.results)
    else:
        _, results = _prove(a.kind, a.selector, cfg, a)
    text = generate_report(results, a.format, timings=not a.no_timings)
    if a.out:
        Path(a.out).write_text(text)
        _emit("report", a.out)
    else:
        sys.stdout.write(text)
    return 0


# -- result files -----------------------------------------------------------------------


def save_results(results, path: str | os.PathLike) -> None:
    rows = []
    for ob, r in results:
        rep = (r.replay or {}).get("report")
        rows.append({
            "name": ob.name, "kind": ob.kind, "verdict": r.verdict,
            "seconds": float(r.stats.get("seconds", 0.0)),
            "replay": rep.lines() if rep is not None else None,
        })
    Path(path).write_text(json.dumps(rows, indent=1) + "\n")


class _Lines:
    def __init__(self, lines):
        self._lines = lines

    def lines(self):
        return self._lines

    def text(self):
        return "\n".join(self._lines) + "\n"


def load_results(path: str | os.PathLike) -> dict:
    from .sat import ProofResult

    out = {}
    for row in json.loads(Path(path).read_text()):
        r = ProofResult(row["verdict"], stats={"seconds": row["seconds"]}, name=row["name"])
        if row.get("replay"):
            r.replay = {"report": _Lines(row["replay"])}
        out[row["name"]] = r
    return out


# -- parser -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="microverif", description="x86 instruction-implementation verification")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, proving: bool = False):
        sp.add_argument("--rom", help="ROM image or routine source file")
        sp.add_argument("--bug", action="append", help="enable a seeded bug (repeatable)")
        if proving:
            sp.add_argument("--budget", type=float, help=f"seconds per obligation (env {ENV_BUDGET})")
            sp.add_argument("--jobs", type=int, help=f"parallel workers (env {ENV_JOBS})")
            sp.add_argument("--solver", help=f"external DIMACS solver command (env {ENV_SOLVER})")
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("--manifest", help="file with one obligation id per line")
            sp.add_argument("--report-dir", help="write report.txt and report.html here")
            sp.add_argument("--cex-dir", default=None, help="write counterexample reports here")
            sp.add_argument("--save", help="write verdicts as JSON")

    r = sub.add_parser("run", help="one ISA step; prints the state diff")
    r.add_argument("--bytes", required=True)
    r.add_argument("--state")
    r.add_argument("--engine", choices=("spec", "rtl"), default="spec")
    common(r)
    r.set_defaults(fn=cmd_run)

    t = sub.add_parser("trace-ucode", help="per-uop trace of the micro-program")
    t.add_argument("--bytes", required=True)
    t.add_argument("--state")
    t.add_argument("--exec", choices=("spec", "rtl"), default="spec")
    common(t)
    t.set_defaults(fn=cmd_trace)

    pr = sub.add_parser("prove", help="discharge obligations")
    pr.add_argument("kind", choices=sorted(PROVE_KINDS))
    pr.add_argument("selector", nargs="?", default="all")
    common(pr, proving=True)
    pr.set_defaults(fn=cmd_prove)

    m = sub.add_parser("mutate", help="seeded-bug campaign")
    m.add_argument("--prove", nargs=2, metavar=("KIND", "SELECTOR"), required=True)
    common(m, proving=True)
    m.set_defaults(fn=cmd_mutate, cex_dir="counterexamples")

    e = sub.add_parser("export-cnf", help="DIMACS file per obligation")
    e.add_argument("kind", nargs="?", default="exec", choices=sorted(PROVE_KINDS))
    e.add_argument("selector", nargs="?", default="all")
    e.add_argument("--out", default="cnf")
    common(e)
    e.set_defaults(fn=cmd_export)

    rp = sub.add_parser("report", help="HTML or text report")
    rp.add_argument("kind", nargs="?", default="decode", choices=sorted(PROVE_KINDS))
    rp.add_argument("selector", nargs="?", default="all")
    rp.add_argument("--results", help="JSON verdicts from `prove --save`")
    rp.add_argument("--format", choices=("text", "html"), default="text")
    rp.add_argument("--out")
    rp.add_argument("--no-timings", action="store_true", help="omit runtimes for a reproducible body")
    common(rp, proving=True)
    rp.set_defaults(fn=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    try:
        cfg = Config.from_args(a)
        _apply(cfg)
        return a.fn(a, cfg)
    except (CliError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    finally:
        from .design.bugs import reset_bugs
        from .design.rom import set_active_rom

        reset_bugs()
        set_active_rom(None)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
