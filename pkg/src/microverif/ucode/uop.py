"""Uop records, register references and the micro-PC."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from ..bitvec import BitVec
from ..isa.state import GPR_INDEX, GPR_NAMES, NUM_ZMM

OPCODES = (
    "NOP", "HALT", "MOV", "MOVSX", "MOVZX", "AND", "OR", "XOR", "SUB",
    "SHR", "SHL", "ROR", "JE", "DLSHFTCNT", "PSRLQ", "PSLLVQ", "PORQ",
)
OPCODE_INDEX = {name: i for i, name in enumerate(OPCODES)}
SIZES = (8, 16, 32, 64, 256)
PREDICATES = ("none", "ZF", "!ZF")
PACKED = {"DLSHFTCNT", "PSRLQ", "PSLLVQ", "PORQ"}

NUM_G = 16
NUM_T = 32
IMM = "IMM"  # operand slot holding the uop's immediate

HALT_ADDR = 0x3FF  # reserved ROM address meaning "halted"


class UopError(ValueError):
    pass


_REF = re.compile(r"^(?:G(\d+)|T(\d+)|ZMM(\d+)([LH])|([A-Z0-9]+))$")


def ref_kind(ref: str) -> tuple[str, int]:
    """Classify a register reference: (G|T|ZMMH|ZMML|GPR|IMM, index)."""
    if ref == IMM:
        return "IMM", 0
    m = _REF.match(ref)
    if not m:
        raise UopError(f"bad register reference {ref!r}")
    g, t, z, half, gpr = m.groups()
    if g is not None:
        if int(g) >= NUM_G:
            raise UopError(f"{ref}: internal G file has {NUM_G} registers")
        return "G", int(g)
    if t is not None:
        if int(t) >= NUM_T:
            raise UopError(f"{ref}: internal T file has {NUM_T} registers")
        return "T", int(t)
    if z is not None:
        if int(z) >= NUM_ZMM:
            raise UopError(f"{ref}: no such vector register")
        return "ZMM" + half, int(z)
    if gpr in GPR_INDEX:
        return "GPR", GPR_INDEX[gpr]
    raise UopError(f"bad register reference {ref!r}")


def ref_width(ref: str) -> int:
    kind, _ = ref_kind(ref)
    return 256 if kind in ("T", "ZMML", "ZMMH") else 64


def gpr_ref(idx: int) -> str:
    return GPR_NAMES[idx]


def zmm_half_ref(idx: int, half: str) -> str:
    return f"ZMM{idx}{half}"


@dataclass(frozen=True)
class UopMask:
    maskmode: BitVec  # 1 bit: 0 merge, 1 zero
    opmask: BitVec  # 3 bits: K register index


@dataclass(frozen=True)
class Uop:
    opcode: str
    dst: Optional[str] = None
    src1: Optional[str] = None
    src2: Optional[str] = None
    imm: Optional[BitVec] = None
    predicate: str = "none"
    ssz: int = 64
    dsz: int = 64
    mask: Optional[UopMask] = None
    target: Optional[int] = None

    def __post_init__(self) -> None:
        if self.opcode not in OPCODE_INDEX:
            raise UopError(f"unknown uop opcode {self.opcode}")
        if self.predicate not in PREDICATES:
            raise UopError(f"unknown predicate {self.predicate}")
        if self.ssz not in SIZES or self.dsz not in SIZES:
            raise UopError(f"sizes must be in {SIZES}")
        if self.opcode == "JE" and self.target is None:
            raise UopError("JE needs a branch target")
        if self.opcode == "PORQ" and self.mask is None:
            raise UopError("PORQ needs mask information")
        for r in (self.dst, self.src1, self.src2):
            if r is not None:
                ref_kind(r)
        if IMM in (self.src1, self.src2) and self.imm is None:
            raise UopError(f"{self.opcode}: immediate operand without a value")

    @property
    def sources(self) -> tuple[Optional[str], Optional[str]]:
        return self.src1, self.src2

    def skeleton(self) -> tuple:
        """The parts that must not depend on symbolic instruction fields."""
        return (self.opcode, self.dst, self.src1, self.src2, self.predicate,
                self.ssz, self.dsz, self.target)

    def text(self, labels: Mapping[int, str] | None = None, imm_text: Callable | None = None) -> str:
        name = self.opcode if self.predicate == "none" else f"{self.opcode}<{self.predicate}>"
        if self.opcode in ("NOP", "HALT"):
            return name
        ops = []
        for r in (self.dst, self.src1, self.src2):
            if r is None:
                continue
            ops.append(_imm_text(self.imm, self) if r == IMM else r)
        if self.opcode == "JE":
            ops.append((labels or {}).get(self.target, f"@{self.target:03X}"))
        if self.mask is not None:
            ops.append(f"{_bits_text(self.mask.maskmode, 'MaskMode')}, {_bits_text(self.mask.opmask, 'Opmsk')}")
        return f"{name} {', '.join(ops)} (SSZ:{self.ssz} DSZ:{self.dsz})"


def _imm_text(imm: BitVec, uop: Uop) -> str:
    v = imm.value
    if v is None:
        return f"<imm{imm.width}>"
    if imm.width > 8 and v >> (imm.width - 1):
        return str(v - (1 << imm.width))
    return str(v)


def _bits_text(v: BitVec, name: str) -> str:
    return f"<{name}>" if v.value is None else str(v.value)


@dataclass(frozen=True)
class SideParams:
    """Operand information the translator hands to the microsequencer."""

    args: tuple[BitVec, ...] = ()  # register indices for ARG0..ARG2 (5 bits each)
    imm: BitVec = field(default_factory=lambda: BitVec.const(8, 0))
    opmask: BitVec = field(default_factory=lambda: BitVec.const(3, 0))
    maskmode: BitVec = field(default_factory=lambda: BitVec.const(1, 0))


@dataclass(frozen=True)
class MicroPC:
    prelude: tuple[Uop, ...]
    addr: int
    side: SideParams = field(default_factory=SideParams)

    @property
    def halted(self) -> bool:
        return not self.prelude and self.addr == HALT_ADDR

    def drop_first(self) -> "MicroPC":
        return MicroPC(self.prelude[1:], self.addr, self.side)
