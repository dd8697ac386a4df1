"""Translator: maps a decoded instruction to prelude uops and a ROM trap.

The translator's output is a flat port vector. Its skeleton part (valid
bit, prelude count, prelude words, trap address) is what the
fixed-sequence precheck requires to be constant; operand indices, the
immediate and the masking fields travel separately as side-params.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Callable, Iterator, Union

from ..bitvec import BitVec, and1, bv_eq, bv_mux, concat_all
from ..isa.instruction import Instruction
from ..isa.state import MachineConfig
from ..ucode.uop import HALT_ADDR, MicroPC, SideParams, Uop
from .ports import PortBinding
from .rom import RomImage, RomWord, active_rom, assemble_row
from .sequencer import ADDR_BITS, expand_word

MAX_PRELUDE = 5

XLATE_PORTS = PortBinding(
    "xlate",
    (("valid", 1), ("nprelude", 3))
    + tuple((f"w{i}", 64) for i in range(MAX_PRELUDE))
    + (("trap", ADDR_BITS), ("arg0", 5), ("arg1", 5), ("arg2", 5),
       ("imm", 8), ("opmask", 3), ("maskmode", 1)),
)
SKELETON_PORTS = ("valid", "nprelude") + tuple(f"w{i}" for i in range(MAX_PRELUDE)) + ("trap",)

ArgSource = Union[str, int, None]  # instruction field name, fixed register index, or unused
TrapSource = Union[str, Callable[[Instruction, RomImage], BitVec]]


class UnsupportedVariant(ValueError):
    pass


class NonFixedSequence(ValueError):
    """The translator skeleton depends on symbolic instruction fields."""


@dataclass(frozen=True)
class XlateRule:
    entry: int  # catalog uid the rule answers for
    size: int  # operand-size code
    prelude: tuple[str, ...]
    trap: TrapSource
    args: tuple[ArgSource, ArgSource, ArgSource]
    masked: bool = False


# Hand-maintained; entry numbers follow the catalog order.
_SHRD_IB, _SHRD_CL, _VPSHRDQ = 12, 13, 14
_S64, _S512 = 2, 3

_RULES: list[XlateRule] = [
    XlateRule(
        _SHRD_IB, _S64,
        ("MOVSX G2, ARG0 (SSZ:64 DSZ:64)", "MOVZX G3, IMM (SSZ:8 DSZ:64)"),
        "ent_shrdEvGv_64reg",
        ("rm", "reg", None),
    ),
    XlateRule(
        _SHRD_CL, _S64,
        ("MOVSX G2, ARG0 (SSZ:64 DSZ:64)", "MOVZX G3, ARG2 (SSZ:8 DSZ:64)"),
        "ent_shrdEvGv_64reg",
        ("rm", "reg", 1),
    ),
    XlateRule(
        _VPSHRDQ, _S512,
        (
            "DLSHFTCNT T26, IMM (SSZ:8 DSZ:256)",
            "PSRLQ T27, ARG1L, IMM (SSZ:256 DSZ:256)",
            "PSRLQ T29, ARG1H, IMM (SSZ:256 DSZ:256)",
            "PSLLVQ T28, ARG2L, T26 (SSZ:256 DSZ:256)",
            "PSLLVQ T30, ARG2H, T26 (SSZ:256 DSZ:256)",
        ),
        "avx_double_shift_or_q",
        ("reg", "vvvv", "rm"),
        masked=True,
    ),
]
_extra: list[XlateRule] = []


def xlate_rules() -> list[XlateRule]:
    return _extra + _RULES


@contextlib.contextmanager
def extra_xlate_rule(rule: XlateRule) -> Iterator[XlateRule]:
    """Temporarily install ``rule`` ahead of the built-in table."""
    _extra.insert(0, rule)
    try:
        yield rule
    finally:
        _extra.remove(rule)


def _c(width: int, v: int) -> BitVec:
    return BitVec.const(width, v)


def _arg(instr: Instruction, src: ArgSource) -> BitVec:
    if src is None:
        return _c(5, 0)
    if isinstance(src, int):
        return _c(5, src)
    return getattr(instr, src)


def _rule_ports(rule: XlateRule, instr: Instruction, rom: RomImage) -> dict[str, BitVec]:
    if len(rule.prelude) > MAX_PRELUDE:
        raise ValueError("prelude too long for the translator ports")
    words = [assemble_row(r, rom.labels).pack() for r in rule.prelude]
    words += [0] * (MAX_PRELUDE - len(words))
    if isinstance(rule.trap, str):
        trap = _c(ADDR_BITS, rom.address(rule.trap))
    else:
        trap = rule.trap(instr, rom)
    out = {"valid": _c(1, 1), "nprelude": _c(3, len(rule.prelude)), "trap": trap}
    out.update({f"w{i}": _c(64, w) for i, w in enumerate(words)})
    for k in range(3):
        out[f"arg{k}"] = _arg(instr, rule.args[k])
    out["imm"] = instr.imm
    out["opmask"] = instr.opmask if rule.masked else _c(3, 0)
    out["maskmode"] = instr.zmask if rule.masked else _c(1, 0)
    return out


def map_xlate(instr: Instruction, config: MachineConfig | None = None) -> BitVec:
    return instr.pack()


def sv_xlate(vec: BitVec, rom: RomImage | None = None) -> BitVec:
    """The translator block proper: instruction port vector in, xlate ports out."""
    rom = rom or active_rom()
    instr = Instruction.unpack(vec)
    out = {n: _c(w, 0) for n, w in XLATE_PORTS.fields}
    out["trap"] = _c(ADDR_BITS, HALT_ADDR)
    # lowest priority first so earlier rules win
    for rule in reversed(xlate_rules()):
        hit = and1(bv_eq(instr.entry, _c(5, rule.entry)), bv_eq(instr.size, _c(2, rule.size)))
        if hit.value == 0:
            continue
        ports = _rule_ports(rule, instr, rom)
        out = {n: bv_mux(hit, ports[n], out[n]) for n in out}
    return XLATE_PORTS.map(out)


def skeleton_of(ports: BitVec) -> BitVec:
    p = XLATE_PORTS.get(ports)
    return concat_all([p[n] for n in SKELETON_PORTS])


def get_init_pc(ports: BitVec, rom: RomImage | None = None) -> MicroPC:
    rom = rom or active_rom()
    p = XLATE_PORTS.get(ports)
    for n in SKELETON_PORTS:
        if not p[n].is_concrete:
            raise NonFixedSequence(f"translator output {n} depends on symbolic instruction fields")
    if p["valid"].value == 0:
        raise UnsupportedVariant("the translator has no rule for this instruction")
    side = SideParams(
        args=(p["arg0"], p["arg1"], p["arg2"]),
        imm=p["imm"],
        opmask=p["opmask"],
        maskmode=p["maskmode"],
    )
    n = p["nprelude"].value
    prelude = tuple(expand_word(RomWord.unpack(p[f"w{i}"].value), side) for i in range(n))
    return MicroPC(prelude, p["trap"].value, side)


def dut_xlate(instr: Instruction, config: MachineConfig | None = None, rom: RomImage | None = None) -> MicroPC:
    return get_init_pc(sv_xlate(map_xlate(instr, config), rom), rom)


def static_sequence(pc: MicroPC, rom: RomImage | None = None) -> list[Uop]:
    """Prelude uops followed by the trap routine's rows in ROM order."""
    rom = rom or active_rom()
    seq = list(pc.prelude)
    if pc.addr != HALT_ADDR:
        seq += [expand_word(w, pc.side) for _, w in rom.routine(pc.addr)]
    return seq


def imm_dependent_trap(bit: int = 0, when_set: str = "ent_nop",
                       otherwise: str = "ent_shrdEvGv_64reg") -> Callable[[Instruction, RomImage], BitVec]:
    """A trap selector that looks at one immediate bit (never used by the reference table)."""

    def trap(instr: Instruction, rom: RomImage) -> BitVec:
        return bv_mux(instr.imm[bit], _c(ADDR_BITS, rom.address(when_set)),
                      _c(ADDR_BITS, rom.address(otherwise)))

    return trap
