"""The microcode machine: state, step function and run-to-halt interpreter."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from ..bitvec import BitVec, bv_eq, bv_mux
from ..isa.instruction import Instruction
from ..isa.semantics import ExecResult
from ..isa.state import MachineConfig, X86State, gpr_loc, zmm_loc
from .semantics import UopData, UopResults, uop_semantics
from .uop import IMM, NUM_G, NUM_T, MicroPC, Uop, UopError, ref_kind

ExecFn = Callable[[Uop, UopData], UopResults]

STEP_BOUND = 256


class StepBoundExceeded(RuntimeError):
    pass


class NotHalted(RuntimeError):
    pass


@dataclass(frozen=True)
class UcodeState:
    pc: MicroPC
    arch: X86State
    g: tuple[BitVec, ...] = ()
    t: tuple[BitVec, ...] = ()
    zf: BitVec = field(default_factory=lambda: BitVec.const(1, 0))
    written: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.g:
            object.__setattr__(self, "g", tuple(BitVec.const(64, 0) for _ in range(NUM_G)))
        if not self.t:
            object.__setattr__(self, "t", tuple(BitVec.const(256, 0) for _ in range(NUM_T)))

    @property
    def config(self) -> MachineConfig:
        return self.arch.config

    @property
    def halted(self) -> bool:
        return self.pc.halted

    @classmethod
    def initial(cls, pc: MicroPC, arch: X86State, symbolic_internals: str | None = None) -> "UcodeState":
        """Start state; with ``symbolic_internals`` the G/T files hold free inputs."""
        if symbolic_internals is None:
            return cls(pc, arch)
        p = symbolic_internals
        return cls(
            pc, arch,
            g=tuple(BitVec.var(64, f"{p}.G{i}") for i in range(NUM_G)),
            t=tuple(BitVec.var(256, f"{p}.T{i}") for i in range(NUM_T)),
            zf=BitVec.var(1, f"{p}.uZF"),
        )

    def read(self, ref: str) -> BitVec:
        kind, i = ref_kind(ref)
        if kind == "G":
            return self.g[i]
        if kind == "T":
            return self.t[i]
        if kind == "GPR":
            return self.arch.gpr[i]
        if kind == "ZMML":
            return self.arch.zmm[i].slice(0, 255)
        if kind == "ZMMH":
            return self.arch.zmm[i].slice(256, 511)
        raise UopError(f"{ref} is not a register")


# -- the five step functions --------------------------------------------------------


def ucode_get_uop(pc: MicroPC, config: MachineConfig | None = None) -> Uop:
    from ..design.sequencer import dut_ucode_read

    if pc.prelude:
        return pc.prelude[0]
    return dut_ucode_read(pc, config)


def _select_k(k_file: tuple[BitVec, ...], index: BitVec) -> BitVec:
    out = k_file[0]
    for i in range(1, len(k_file)):
        out = bv_mux(bv_eq(index, BitVec.const(index.width, i)), k_file[i], out)
    return out


def ucode_fetch_data(uop: Uop, u: UcodeState) -> UopData:
    def get(ref: Optional[str]) -> Optional[BitVec]:
        if ref is None:
            return None
        if ref == IMM:
            return uop.imm
        return u.read(ref)

    kbits = None
    if uop.mask is not None:
        kind, _ = ref_kind(uop.dst)
        lo = 4 if kind == "ZMMH" else 0
        kbits = _select_k(u.arch.k, uop.mask.opmask).slice(lo, lo + 3)
    return UopData(
        src1=get(uop.src1),
        src2=get(uop.src2),
        old_dst=get(uop.dst),
        zf=u.zf,
        kbits=kbits,
    )


def ucode_next_pc(pc: MicroPC, results: UopResults) -> MicroPC:
    from ..design.sequencer import dut_ucode_step

    if pc.prelude:
        return pc.drop_first()
    return dut_ucode_step(pc, results.branch_taken)


def ucode_update_state(results: UopResults, new_pc: MicroPC, u: UcodeState) -> UcodeState:
    g, t = list(u.g), list(u.t)
    arch = u.arch
    written = set(u.written)
    for ref, val in results.writes.items():
        kind, i = ref_kind(ref)
        if kind == "G":
            g[i] = _to_width(val, 64)
        elif kind == "T":
            t[i] = _to_width(val, 256)
        elif kind == "GPR":
            arch = arch.write_all({gpr_loc(i): _to_width(val, 64)})
            written.add(gpr_loc(i))
        elif kind in ("ZMML", "ZMMH"):
            old = arch.zmm[i]
            half = _to_width(val, 256)
            new = half.concat(old.slice(256, 511)) if kind == "ZMML" else old.slice(0, 255).concat(half)
            arch = arch.write_all({zmm_loc(i): new})
            written.add(zmm_loc(i))
        else:
            raise UopError(f"cannot write {ref}")
    zf = results.flags.get("ZF", u.zf)
    return UcodeState(new_pc, arch, tuple(g), tuple(t), zf, frozenset(written))


def _to_width(v: BitVec, width: int) -> BitVec:
    return v.trunc(width) if v.width >= width else v.zext(width)


def ucode_model_step(u: UcodeState, exec_fn: ExecFn = uop_semantics) -> UcodeState:
    if u.halted:
        return u
    uop = ucode_get_uop(u.pc, u.config)
    data = ucode_fetch_data(uop, u)
    results = exec_fn(uop, data)
    new_pc = ucode_next_pc(u.pc, results)
    return ucode_update_state(results, new_pc, u)


# -- runs ---------------------------------------------------------------------------


@dataclass
class TraceEntry:
    n: int
    uop: Uop
    results: UopResults
    labels: dict = field(default_factory=dict)

    def text(self) -> str:
        parts = []
        for ref, v in self.results.writes.items():
            parts.append(f"{ref}={_hex(v)}")
        if self.results.branch_taken is not None:
            parts.append("taken" if self.results.branch_taken.value else "not-taken")
        flags = " ".join(f"{k}={_hex(v, plain=True)}" for k, v in self.results.flags.items())
        line = f"#{self.n} {self.uop.text(self.labels)} | {' '.join(parts) or '-'}"
        return f"{line} [{flags}]" if flags else line


def _hex(v: BitVec, plain: bool = False) -> str:
    x = v.value
    if x is None:
        return "<sym>"
    return str(x) if plain else f"0x{x:X}"


def run_ucode_model(
    u: UcodeState,
    exec_fn: ExecFn = uop_semantics,
    bound: int = STEP_BOUND,
    trace: list[TraceEntry] | None = None,
) -> UcodeState:
    """Step to the halt sentinel.

    A branch whose outcome is symbolic splits the run into two guarded
    paths; the halted path states are merged with the guards at the end.
    """
    from ..design.rom import active_rom
    from ..design.sequencer import dut_ucode_step

    labels = active_rom().labels_by_addr
    paths: list[tuple[BitVec, UcodeState, int]] = [(BitVec.const(1, 1), u, 0)]
    done: list[tuple[BitVec, UcodeState]] = []
    while paths:
        guard, s, n = paths.pop()
        if s.halted:
            done.append((guard, s))
            continue
        if n >= bound:
            raise StepBoundExceeded(f"no halt after {bound} uops")
        uop = ucode_get_uop(s.pc, s.config)
        results = exec_fn(uop, ucode_fetch_data(uop, s))
        if trace is not None:
            trace.append(TraceEntry(len(trace), uop, results, labels))
        taken = results.branch_taken
        if s.pc.prelude or taken is None or taken.is_concrete:
            paths.append((guard, ucode_update_state(results, ucode_next_pc(s.pc, results), s), n + 1))
            continue
        for outcome, g in ((1, guard & taken), (0, guard & ~taken)):
            if g.value == 0:
                continue
            pc = dut_ucode_step(s.pc, BitVec.const(1, outcome))
            paths.append((g, ucode_update_state(results, pc, s), n + 1))
    return _merge(done)


def _merge(done: list[tuple[BitVec, UcodeState]]) -> UcodeState:
    guard, out = done[0]
    for g, s in done[1:]:
        pick = lambda a, b: a if a == b else bv_mux(g, b, a)
        arch = out.arch
        writes = {}
        for loc in out.arch.locations():
            a, b = out.arch.read(loc), s.arch.read(loc)
            if a != b:
                writes[loc] = pick(a, b)
        arch = arch.write_all(writes)
        out = UcodeState(
            out.pc, arch,
            tuple(pick(a, b) for a, b in zip(out.g, s.g)),
            tuple(pick(a, b) for a, b in zip(out.t, s.t)),
            pick(out.zf, s.zf),
            out.written | s.written,
        )
    return out


def extract_instr_results(u: UcodeState) -> ExecResult:
    """Architectural register writes of a finished run; internals are dropped."""
    if not u.halted:
        raise NotHalted("extract_instr_results needs a halted micro-state")
    return ExecResult(None, {loc: u.arch.read(loc) for loc in sorted(u.written)})


def run_xlate_ucode(
    instr: Instruction,
    state: X86State,
    exec_fn: ExecFn = uop_semantics,
    bound: int = STEP_BOUND,
    trace: list[TraceEntry] | None = None,
    symbolic_internals: str | None = None,
) -> ExecResult:
    from ..design.xlate import dut_xlate

    pc = dut_xlate(instr, state.config)
    u = UcodeState.initial(pc, state, symbolic_internals)
    return extract_instr_results(run_ucode_model(u, exec_fn, bound, trace))


def format_trace(trace: list[TraceEntry]) -> str:
    return "\n".join(e.text() for e in trace) + ("\n" if trace else "")
