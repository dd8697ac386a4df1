"""Word-level execution semantics for the x86 subset."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from ..bitvec import BitVec, bv_eq, bv_mux, bv_shift, concat_all
from .catalog import EVEX
from .decode import x86_decode, x86_fetch_code
from .instruction import DecodeResult, Instruction
from .state import FLAG_NAMES, X86State, gpr_loc, zmm_loc

DEST = "DEST"  # placeholder destination in gpr_alu_spec results

LOGIC = {"AND", "OR", "XOR"}
ARITH = {"ADD", "SUB"}
MOVES = {"MOV", "MOVZX", "MOVSX"}
SHIFTS = {"SHL", "SHR", "ROR"}
ALU_MNEMONICS = LOGIC | ARITH | MOVES | SHIFTS


class UnimplementedInstruction(NotImplementedError):
    pass


@dataclass
class ExecResult:
    ex: Optional[str] = None
    rslts: dict[str, BitVec] = field(default_factory=dict)

    def __getitem__(self, loc: str) -> BitVec:
        return self.rslts[loc]


def _c(width: int, v: int) -> BitVec:
    return BitVec.const(width, v)


def _is_zero(v: BitVec) -> BitVec:
    return v.is_zero()


def _fit(v: BitVec, width: int) -> BitVec:
    return v.trunc(width) if v.width >= width else v.zext(width)


def _result_flags(result: BitVec) -> dict[str, BitVec]:
    return {"ZF": _is_zero(result), "SF": result[result.width - 1]}


def _keep(cond: BitVec, old: Mapping[str, BitVec], new: Mapping[str, BitVec]) -> dict[str, BitVec]:
    return {k: bv_mux(cond, old[k], v) for k, v in new.items()}


def _zero_flags() -> dict[str, BitVec]:
    return {n: _c(1, 0) for n in FLAG_NAMES}


def gpr_alu_spec(
    mnemonic: str,
    operands: tuple[BitVec, ...],
    sizes: tuple[int, int],
    old_flags: Mapping[str, BitVec] | None = None,
) -> ExecResult:
    """Truncate operands to the source size, apply the core operation,
    truncate to the destination size.

    Shifts take ``(value, count)`` and mask the count to 5 bits (6 at 64
    bits); a zero masked count leaves ``old_flags`` in place.
    """
    mnemonic = mnemonic.upper()
    if mnemonic not in ALU_MNEMONICS:
        raise UnimplementedInstruction(f"no ALU semantics for {mnemonic}")
    ssz, dsz = sizes
    old = dict(old_flags) if old_flags is not None else _zero_flags()
    arg1 = _fit(operands[0], ssz)
    if mnemonic in MOVES:
        if mnemonic == "MOVSX":
            res = arg1.sext(dsz) if dsz >= ssz else arg1.trunc(dsz)
        else:
            res = _fit(arg1, dsz)
        return ExecResult(rslts={DEST: res})
    if mnemonic in SHIFTS:
        return _shift_spec(mnemonic, operands[0], operands[1], dsz, old)
    arg2 = _fit(operands[1], ssz)
    if mnemonic in LOGIC:
        core = {"AND": arg1 & arg2, "OR": arg1 | arg2, "XOR": arg1 ^ arg2}[mnemonic]
        res = _fit(core, dsz)
        flags = {**_result_flags(res), "CF": _c(1, 0)}
        return ExecResult(rslts={DEST: res, **flags})
    a, b = arg1.zext(ssz + 1), arg2.zext(ssz + 1)
    wide = a + b if mnemonic == "ADD" else a - b
    res = _fit(wide.trunc(ssz), dsz)
    flags = {**_result_flags(res), "CF": wide[ssz]}
    return ExecResult(rslts={DEST: res, **flags})


def count_mask(width: int) -> int:
    return 63 if width == 64 else 31


def _masked_count(count: BitVec, width: int) -> BitVec:
    k = count_mask(width).bit_length()
    return _fit(count, k)


def _shift_spec(mnemonic: str, value: BitVec, count: BitVec, n: int, old: dict) -> ExecResult:
    v = _fit(value, n)
    m = _masked_count(count, n)
    res = bv_shift(mnemonic, v, m)
    zero = _is_zero(m)
    one = _c(m.width, 1)
    if mnemonic == "ROR":
        new = {"CF": res[n - 1]}
    elif mnemonic == "SHR":
        new = {**_result_flags(res), "CF": bv_shift("SHR", v, m - one)[0]}
    else:
        new = {**_result_flags(res), "CF": bv_shift("SHL", v, m - one)[n - 1]}
    flags = _keep(zero, old, new)
    return ExecResult(rslts={DEST: bv_mux(zero, v, res), **flags})


def shrd_spec(
    dest: BitVec,
    src: BitVec,
    amt: BitVec,
    n: int,
    old_flags: Mapping[str, BitVec] | None = None,
) -> tuple[BitVec, dict[str, BitVec]]:
    """Double-precision right shift of ``dest`` filled from ``src``."""
    if n not in (16, 32, 64):
        raise ValueError(f"SHRD operand size must be 16, 32 or 64, not {n}")
    old = dict(old_flags) if old_flags is not None else _zero_flags()
    d, s = _fit(dest, n), _fit(src, n)
    m = _masked_count(amt, n)
    wide = d.concat(s)  # dest in the low half
    mw = m.zext(7)
    res = bv_shift("SHR", wide, mw).trunc(n)
    cf = bv_shift("SHR", wide, mw - _c(7, 1))[0]
    zero = _is_zero(m)
    flags = _keep(zero, old, {**_result_flags(res), "CF": cf})
    return bv_mux(zero, d, res), flags


def _mask_bits(k_file: tuple[BitVec, ...] | list[BitVec], opmask_index: BitVec) -> BitVec:
    """Low 8 bits of K[opmask_index], with k0 meaning every lane active."""
    bits = _c(8, 0xFF)
    for i in range(len(k_file) - 1, 0, -1):
        bits = bv_mux(bv_eq(opmask_index, _c(3, i)), k_file[i].trunc(8), bits)
    return bits


def vpshrdq_spec(
    src1: BitVec,
    src2: BitVec,
    amt: BitVec,
    opmask_index: BitVec,
    maskmode: BitVec,
    k_file,
    old_dest: BitVec,
) -> BitVec:
    """Per 64-bit lane: low 64 bits of (src2:src1) >> (amt mod 64), then masking."""
    m = amt.trunc(6).zext(7)
    active = _mask_bits(k_file, opmask_index)
    lanes = []
    for i, (a, b, o) in enumerate(zip(src1.lanes(64), src2.lanes(64), old_dest.lanes(64))):
        r = bv_shift("SHR", a.concat(b), m).trunc(64)
        inactive = bv_mux(maskmode, _c(64, 0), o)
        lanes.append(bv_mux(active[i], r, inactive))
    return concat_all(lanes)


# -- instruction level ------------------------------------------------------------


def read_gpr(state: X86State, idx: int, n: int) -> BitVec:
    return state.gpr[idx].trunc(n)


def read_byte_reg(state: X86State, idx: int, hi8: bool) -> BitVec:
    if hi8:
        return state.gpr[idx - 4].slice(8, 15)
    return state.gpr[idx].trunc(8)


def write_gpr(old: BitVec, value: BitVec, n: int) -> BitVec:
    """x86 partial-register rules: 32-bit writes zero-extend, 16-bit writes merge."""
    if n == 64:
        return value
    if n == 32:
        return value.zext(64)
    return value.concat(old.slice(n, 63))


def _flag_writes(flags: Mapping[str, BitVec]) -> dict[str, BitVec]:
    return {k: flags[k] for k in FLAG_NAMES if k in flags}


def x86_exec(instr: Instruction, state: X86State) -> ExecResult:
    e = instr.catalog_entry
    ops = instr.operands()
    old_flags = {n: state.flag(n) for n in FLAG_NAMES}
    if e.encoding == EVEX:
        if e.mnemonic != "VPSHRDQ":
            raise UnimplementedInstruction(e.mnemonic)
        dst, src1, src2 = ops["OP1"][1], ops["OP2"][1], ops["OP3"][1]
        val = vpshrdq_spec(state.zmm[src1], state.zmm[src2], instr.imm, instr.opmask,
                           instr.zmask, state.k, state.zmm[dst])
        return ExecResult(rslts={zmm_loc(dst): val})
    n = instr.size_bits
    fam = e.family
    if fam == "alu":
        rm, reg = ops["OP1"][1], ops["OP2"][1]
        r = gpr_alu_spec(e.mnemonic, (read_gpr(state, rm, n), read_gpr(state, reg, n)), (n, n), old_flags)
        return _package(state, rm, n, r)
    if fam == "ext":
        reg, rm = ops["OP1"][1], ops["OP2"][1]
        byte = read_byte_reg(state, rm, bool(instr.rm_hi8.value))
        r = gpr_alu_spec(e.mnemonic, (byte,), (8, n), old_flags)
        return _package(state, reg, n, r)
    if fam == "shift":
        rm = ops["OP1"][1]
        r = gpr_alu_spec(e.mnemonic, (read_gpr(state, rm, n), instr.imm), (n, n), old_flags)
        return _package(state, rm, n, r)
    if fam == "shrd":
        rm, reg = ops["OP1"][1], ops["OP2"][1]
        amt = instr.imm if ops["OP3"][0] == "IMM" else state.gpr[1].trunc(8)
        res, flags = shrd_spec(read_gpr(state, rm, n), read_gpr(state, reg, n), amt, n, old_flags)
        return _package(state, rm, n, ExecResult(rslts={DEST: res, **flags}))
    raise UnimplementedInstruction(e.mnemonic)


def _package(state: X86State, idx: int, n: int, r: ExecResult) -> ExecResult:
    out = {gpr_loc(idx): write_gpr(state.gpr[idx], r.rslts[DEST], n)}
    out.update(_flag_writes(r.rslts))
    return ExecResult(r.ex, out)


def x86_update(
    dx: Optional[str],
    ex: Optional[str],
    rslts: Mapping[str, BitVec],
    state: X86State,
    length: int = 0,
) -> X86State:
    if dx is not None or ex is not None:
        return replace(state, fault=dx or ex)
    return replace(state.write_all(rslts), ip=state.ip + length, fault=None)


def x86_step(code, state: X86State) -> tuple[DecodeResult, Optional[ExecResult]]:
    """Decode and execute ``code`` against ``state`` without committing."""
    dec = x86_decode(code, state.config)
    instr = dec.instr
    if instr is None:
        return dec, None
    return dec, x86_exec(instr, state)


def x86_model_step(state: X86State) -> X86State:
    if state.fault is not None:
        return state
    code = x86_fetch_code(state.ip, state.memory)
    dec = x86_decode(code, state.config)
    if dec.instr is None:
        return x86_update(dec.exception, None, {}, state)
    res = x86_exec(dec.instr, state)
    return x86_update(None, res.ex, res.rslts, state, int(dec.instr.length))


def load_code(state: X86State, code, at: int | None = None) -> X86State:
    """Place ``code`` in memory at ``at`` (default: IP)."""
    at = state.ip if at is None else at
    mem = dict(state.memory)
    for i, b in enumerate(code):
        mem[at + i] = b
    return replace(state, memory=mem)
