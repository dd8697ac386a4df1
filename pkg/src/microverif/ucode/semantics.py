"""Operational semantics of individual uops (the ``ucode-exec`` table)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..bitvec import BitVec, bv_eq, bv_mux, bv_shift, concat_all
from ..isa.semantics import DEST, gpr_alu_spec
from .uop import Uop, UopError

LANE = 64


@dataclass(frozen=True)
class UopData:
    """Operand values fetched for one uop."""

    src1: Optional[BitVec] = None
    src2: Optional[BitVec] = None
    old_dst: Optional[BitVec] = None
    zf: BitVec = field(default_factory=lambda: BitVec.const(1, 0))
    kbits: Optional[BitVec] = None  # opmask bits for the lanes this uop covers


@dataclass
class UopResults:
    writes: dict[str, BitVec] = field(default_factory=dict)
    flags: dict[str, BitVec] = field(default_factory=dict)
    branch_taken: Optional[BitVec] = None


def _c(width: int, v: int) -> BitVec:
    return BitVec.const(width, v)


def _fit(v: BitVec, width: int) -> BitVec:
    return v.trunc(width) if v.width >= width else v.zext(width)


def predicate_holds(uop: Uop, zf: BitVec) -> BitVec:
    if uop.predicate == "ZF":
        return zf
    if uop.predicate == "!ZF":
        return ~zf
    return _c(1, 1)


def dlshftcnt(imm: BitVec, width: int = 256) -> BitVec:
    """(64 - (imm mod 64)) mod 128 in every 64-bit lane."""
    m = _fit(imm, 8).trunc(6).zext(LANE)
    count = (_c(LANE, 64) - m) & _c(LANE, 127)
    return concat_all([count] * (width // LANE))


def psrlq(value: BitVec, imm: BitVec) -> BitVec:
    count = _fit(imm, 8).trunc(6)
    return concat_all([bv_shift("SHR", lane, count) for lane in value.lanes(LANE)])


def psllvq(value: BitVec, counts: BitVec) -> BitVec:
    return concat_all([bv_shift("SHL", lane, c) for lane, c in zip(value.lanes(LANE), counts.lanes(LANE))])


def porq(a: BitVec, b: BitVec, old: BitVec, kbits: BitVec, opmask: BitVec, maskmode: BitVec) -> BitVec:
    k0 = bv_eq(opmask, _c(opmask.width, 0))
    out = []
    for i, (x, y, o) in enumerate(zip(a.lanes(LANE), b.lanes(LANE), old.lanes(LANE))):
        active = k0 | kbits[i]
        out.append(bv_mux(active, x | y, bv_mux(maskmode, _c(LANE, 0), o)))
    return concat_all(out)


def _arity(uop: Uop, data: UopData, n: int) -> None:
    have = [data.src1, data.src2][:n]
    if any(v is None for v in have):
        raise UopError(f"{uop.opcode} needs {n} source operand(s)")


def uop_semantics(uop: Uop, data: UopData) -> UopResults:
    op = uop.opcode
    ssz, dsz = uop.ssz, uop.dsz
    if op in ("NOP", "HALT"):
        return UopResults()
    if op == "JE":
        _arity(uop, data, 2)
        return UopResults(branch_taken=bv_eq(_fit(data.src1, ssz), _fit(data.src2, ssz)))
    flags: dict[str, BitVec] = {}
    if op in ("MOV", "MOVSX", "MOVZX"):
        _arity(uop, data, 1)
        val = gpr_alu_spec(op, (data.src1,), (ssz, dsz)).rslts[DEST]
    elif op in ("AND", "OR", "XOR", "SUB"):
        _arity(uop, data, 2)
        r = gpr_alu_spec(op, (data.src1, data.src2), (ssz, dsz))
        val = r.rslts[DEST]
        if op == "SUB":
            flags["ZF"] = r.rslts["ZF"]
    elif op in ("SHR", "SHL", "ROR"):
        _arity(uop, data, 2)
        val = gpr_alu_spec(op, (_fit(data.src1, ssz), data.src2), (ssz, dsz)).rslts[DEST]
    elif op == "DLSHFTCNT":
        _arity(uop, data, 1)
        val = dlshftcnt(data.src1, dsz)
    elif op == "PSRLQ":
        _arity(uop, data, 2)
        val = psrlq(_fit(data.src1, ssz), data.src2)
    elif op == "PSLLVQ":
        _arity(uop, data, 2)
        val = psllvq(_fit(data.src1, ssz), _fit(data.src2, ssz))
    elif op == "PORQ":
        _arity(uop, data, 2)
        if data.old_dst is None or data.kbits is None:
            raise UopError("PORQ needs the old destination and opmask bits")
        val = porq(_fit(data.src1, ssz), _fit(data.src2, ssz), data.old_dst, data.kbits,
                   uop.mask.opmask, uop.mask.maskmode)
    else:  # pragma: no cover - OPCODES is closed
        raise UopError(f"no semantics for {op}")
    if val.width != dsz:
        val = _fit(val, dsz)
    if uop.predicate != "none":
        if data.old_dst is None:
            raise UopError("predicated uop needs the old destination value")
        p = predicate_holds(uop, data.zf)
        val = bv_mux(p, val, _fit(data.old_dst, dsz))
        flags = {k: bv_mux(p, v, data.zf) for k, v in flags.items()}
    return UopResults(writes={uop.dst: val}, flags=flags)
