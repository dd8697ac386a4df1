"""Decoded-instruction structures shared by the spec decoder and the DUT."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..bitvec import BitVec, bv_eq, bv_mux, concat_all
from .catalog import (
    DX_NAMES,
    DX_NONE,
    DX_WIDTH,
    ENTRY_WIDTH,
    EVEX,
    SIZE_FROM_CODE,
    VARIANTS,
    InstListEntry,
    entry_by_uid,
)
from .state import GPR_NAMES

# (name, width) of every instruction field, in port order
FIELD_WIDTHS: tuple[tuple[str, int], ...] = (
    ("entry", ENTRY_WIDTH),
    ("size", 2),
    ("reg", 5),
    ("rm", 5),
    ("vvvv", 5),
    ("rm_hi8", 1),
    ("imm", 8),
    ("opmask", 3),
    ("zmask", 1),
    ("length", 4),
    ("pfx", 3),  # bit0: 66 seen, bit1: REX in effect, bit2: REX.W
)
INSTR_WIDTH = sum(w for _, w in FIELD_WIDTHS)


class SymbolicFieldError(TypeError):
    """A concrete query was made on a symbolic instruction field."""


@dataclass(frozen=True)
class Instruction:
    entry: BitVec
    size: BitVec
    reg: BitVec
    rm: BitVec
    vvvv: BitVec
    rm_hi8: BitVec
    imm: BitVec
    opmask: BitVec
    zmask: BitVec
    length: BitVec
    pfx: BitVec

    def __post_init__(self) -> None:
        for name, width in FIELD_WIDTHS:
            v = getattr(self, name)
            if not isinstance(v, BitVec) or v.width != width:
                raise ValueError(f"field {name} must be a {width}-bit vector")

    @classmethod
    def make(cls, **values) -> "Instruction":
        """Build from ints or bitvectors; missing fields are zero."""
        kw = {}
        for name, width in FIELD_WIDTHS:
            v = values.pop(name, 0)
            kw[name] = v if isinstance(v, BitVec) else BitVec.const(width, v)
        if values:
            raise TypeError(f"unknown instruction fields {sorted(values)}")
        return cls(**kw)

    @classmethod
    def zero(cls) -> "Instruction":
        return cls.make()

    def replace(self, **values) -> "Instruction":
        cur = {name: getattr(self, name) for name, _ in FIELD_WIDTHS}
        for k, v in values.items():
            if k not in cur:
                raise TypeError(f"unknown instruction field {k}")
            cur[k] = v if isinstance(v, BitVec) else BitVec.const(cur[k].width, v)
        return Instruction(**cur)

    # -- flat port vector ---------------------------------------------------

    def pack(self) -> BitVec:
        return concat_all([getattr(self, n) for n, _ in FIELD_WIDTHS])

    @classmethod
    def unpack(cls, vec: BitVec) -> "Instruction":
        if vec.width != INSTR_WIDTH:
            raise ValueError(f"expected {INSTR_WIDTH} bits, got {vec.width}")
        kw, lo = {}, 0
        for name, width in FIELD_WIDTHS:
            kw[name] = vec.slice(lo, lo + width - 1)
            lo += width
        return cls(**kw)

    # -- concrete views -----------------------------------------------------

    def _int(self, name: str) -> int:
        v = getattr(self, name).value
        if v is None:
            raise SymbolicFieldError(f"instruction field {name} is symbolic")
        return v

    @property
    def is_concrete(self) -> bool:
        return all(getattr(self, n).is_concrete for n, _ in FIELD_WIDTHS)

    @property
    def catalog_entry(self) -> InstListEntry:
        return entry_by_uid(self._int("entry"))

    @property
    def mnemonic(self) -> str:
        return self.catalog_entry.mnemonic

    @property
    def size_bits(self) -> int:
        return SIZE_FROM_CODE[self._int("size")]

    @property
    def variant_id(self) -> Optional[str]:
        e = self.catalog_entry
        for v in VARIANTS.values():
            if v.mnemonic == e.mnemonic and v.form == e.form and v.size == self.size_bits:
                return v.vid
        return None

    def operands(self) -> dict[str, tuple[str, object]]:
        """Operand descriptors: OPn -> (kind, register index or imm vector)."""
        e = self.catalog_entry
        out: dict[str, tuple[str, object]] = {}
        for op in e.operands:
            if op.source == "IMM8":
                out[op.name] = ("IMM", self.imm)
            elif op.source == "CL":
                out[op.name] = ("GPR", 1)
            else:
                idx = self._int({"ModRM.reg": "reg", "ModRM.rm": "rm", "EVEX.vvvv": "vvvv"}[op.source])
                kind = "ZMM" if "ZMM" in op.kinds else "GPR"
                out[op.name] = (kind, idx)
        return out

    def text(self) -> str:
        e = self.catalog_entry
        parts = []
        for name, (kind, v) in self.operands().items():
            if kind == "IMM":
                parts.append(f"0x{v.value:X}" if v.is_concrete else "<imm8>")
            elif kind == "ZMM":
                s = f"ZMM{v}"
                if e.encoding == EVEX and name == "OP1":
                    if self.opmask.is_concrete and self.opmask.value:
                        s += f"{{k{self.opmask.value}}}"
                    if self.zmask.is_concrete and self.zmask.value:
                        s += "{z}"
                parts.append(s)
            else:
                parts.append(_gpr_text(v, self, e, name))
        return f"{e.mnemonic} " + ", ".join(parts)


def _gpr_text(idx: int, instr: Instruction, e: InstListEntry, name: str) -> str:
    op = e.operand(name)
    if op.source == "CL":
        return "CL"
    if op.width == "b":
        if instr.rm_hi8.value:
            return ("AH", "CH", "DH", "BH")[idx - 4]
        return f"{GPR_NAMES[idx]}B"
    return GPR_NAMES[idx] if instr.size_bits == 64 else f"{GPR_NAMES[idx]}:{instr.size_bits}"


@dataclass(frozen=True)
class DecodeResult:
    """``dx`` and the instruction fields; fields are all zero when dx != 0."""

    dx: BitVec
    fields_: Instruction

    def __post_init__(self) -> None:
        if self.dx.width != DX_WIDTH:
            raise ValueError("dx must be a 3-bit vector")

    @classmethod
    def fault(cls, code: int) -> "DecodeResult":
        return cls(BitVec.const(DX_WIDTH, code), Instruction.zero())

    @property
    def exception(self) -> Optional[str]:
        code = self.dx.value
        if code is None:
            raise SymbolicFieldError("dx is symbolic")
        return DX_NAMES[code]

    @property
    def instr(self) -> Optional[Instruction]:
        code = self.dx.value
        if code is None:
            raise SymbolicFieldError("dx is symbolic")
        return self.fields_ if code == DX_NONE else None

    def pack(self) -> BitVec:
        return self.dx.concat(self.fields_.pack())

    @classmethod
    def unpack(cls, vec: BitVec) -> "DecodeResult":
        return cls(vec.slice(0, DX_WIDTH - 1), Instruction.unpack(vec.slice(DX_WIDTH, vec.width - 1)))

    def normalized(self) -> "DecodeResult":
        ok = bv_eq(self.dx, BitVec.const(DX_WIDTH, DX_NONE))
        return DecodeResult(self.dx, Instruction.unpack(
            bv_mux(ok, self.fields_.pack(), BitVec.const(INSTR_WIDTH, 0))))
