"""Table-driven byte decoder.

A small state machine walks the bytes through prefix, escape, opcode,
ModR/M and immediate phases. Per-opcode behaviour comes from attribute
tables maintained by hand in this module; the outcome is assembled with
one-hot AND/OR selection and a bit-level exception encoder.

The input is a flat vector of 15 bytes plus a 4-bit count of valid
bytes. Bytes that steer the state machine must be concrete; the others
may be symbolic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..aig import FALSE, TRUE, Aig, current_aig
from ..bitvec import BitVec, concat_all
from ..isa.instruction import FIELD_WIDTHS, INSTR_WIDTH, DecodeResult, Instruction
from ..isa.state import Byte, MachineConfig
from .bugs import bug_enabled
from .ports import PortBinding

WINDOW = 15

DECODE_IN = PortBinding("decode.in", tuple((f"b{i}", 8) for i in range(WINDOW)) + (("count", 4),))
DECODE_OUT = PortBinding("decode.out", (("dx", 3),) + FIELD_WIDTHS)

# exception encoder outputs
_UD, _TRUNC, _UNSUP = 1, 4, 3

# byte classes
C_OP, C_LOCK, C_66, C_REP, C_OTHER_PFX, C_REX, C_ESC, C_EVEX = range(8)
BYTE_CLASS = [C_OP] * 256
for _b in (0x2E, 0x36, 0x3E, 0x26, 0x64, 0x65, 0x67):
    BYTE_CLASS[_b] = C_OTHER_PFX
BYTE_CLASS[0xF0] = C_LOCK
BYTE_CLASS[0x66] = C_66
BYTE_CLASS[0xF2] = BYTE_CLASS[0xF3] = C_REP
for _b in range(0x40, 0x50):
    BYTE_CLASS[_b] = C_REX
BYTE_CLASS[0x0F] = C_ESC
BYTE_CLASS[0x62] = C_EVEX

# attribute bits
A_LOCK_ANY = 1  # LOCK is illegal
A_LOCK_REG = 2  # LOCK is illegal with a register destination
A_HAS_REG = 4  # ModR/M.reg names an operand
A_BYTE_RM = 8  # ModR/M.rm names a byte register
A_IMM8 = 16


@dataclass(frozen=True)
class Row:
    ext: int  # required ModR/M.reg value, -1 for any
    entry: int  # catalog entry number
    attrs: int


_ALU = A_LOCK_REG | A_HAS_REG
_EXT = A_LOCK_ANY | A_HAS_REG | A_BYTE_RM
_GRP2 = A_LOCK_ANY | A_IMM8

# (escape map, opcode byte) -> rows; map 0: one byte, 1: 0F, 2: 0F38, 3: 0F3A
LEGACY_ROM: dict[tuple[int, int], tuple[Row, ...]] = {
    (0, 0x01): (Row(-1, 1, _ALU),),
    (0, 0x09): (Row(-1, 2, _ALU),),
    (0, 0x21): (Row(-1, 3, _ALU),),
    (0, 0x29): (Row(-1, 4, _ALU),),
    (0, 0x31): (Row(-1, 5, _ALU),),
    (0, 0x89): (Row(-1, 6, A_LOCK_ANY | A_HAS_REG),),
    (1, 0xB6): (Row(-1, 7, _EXT),),
    (1, 0xBE): (Row(-1, 8, _EXT),),
    (0, 0xC1): (Row(1, 9, _GRP2), Row(4, 10, _GRP2), Row(5, 11, _GRP2)),
    (1, 0xAC): (Row(-1, 12, A_LOCK_ANY | A_HAS_REG | A_IMM8),),
    (1, 0xAD): (Row(-1, 13, A_LOCK_ANY | A_HAS_REG),),
}


@dataclass(frozen=True)
class EvexRow:
    opcode: int
    pp: int
    w: int
    ll: int
    entry: int


# EVEX maps with entries; every map listed here carries an immediate byte
EVEX_ROM: dict[int, tuple[EvexRow, ...]] = {
    3: (EvexRow(0x73, 1, 1, 2, 14),),
}

_SIZE512 = 3


class _Out(Exception):
    def __init__(self, code: int):
        self.code = code


class _Bytes:
    def __init__(self, byte_vecs: Sequence[BitVec], count: int):
        self.b = list(byte_vecs)
        self.count = count
        self.pos = 0

    def take(self) -> BitVec:
        if self.pos >= WINDOW:
            raise _Out(_UD)
        if self.pos >= self.count:
            raise _Out(_TRUNC)
        v = self.b[self.pos]
        self.pos += 1
        return v


def _eq_const(g: Aig, bits: Sequence[int], value: int) -> int:
    acc = TRUE
    for i, b in enumerate(bits):
        acc = g.and_(acc, b if (value >> i) & 1 else b ^ 1)
    return acc


def _any(g: Aig, bits: Sequence[int]) -> int:
    acc = FALSE
    for b in bits:
        acc = g.or_(acc, b)
    return acc


def _const_bits(width: int, value: int) -> list[int]:
    return [TRUE if (value >> i) & 1 else FALSE for i in range(width)]


def _encode(g: Aig, ud: int, unsup: int) -> list[int]:
    """dx bits: #UD wins over unsupported, else none."""
    return [g.or_(ud, unsup), g.and_(ud ^ 1, unsup), FALSE]


def _assemble(g: Aig, dx: list[int], cands: list[tuple[int, dict[str, list[int]]]]) -> BitVec:
    """One-hot field selection, then zero the fields unless dx is none."""
    ok = g.and_(g.and_(dx[0] ^ 1, dx[1] ^ 1), dx[2] ^ 1)
    out = list(dx)
    for name, width in FIELD_WIDTHS:
        for i in range(width):
            terms = [g.and_(hit, f[name][i]) for hit, f in cands if name in f]
            out.append(g.and_(ok, _any(g, terms)))
    return BitVec(out)


def _fault(code: int) -> BitVec:
    return BitVec(_const_bits(3, code) + [FALSE] * INSTR_WIDTH)


def sv_decode(vec: BitVec) -> BitVec:
    """The decoder block: input ports to output ports."""
    p = DECODE_IN.get(vec)
    count = p["count"].value
    if count is None:
        raise ValueError("decoder byte count must be concrete")
    rd = _Bytes([p[f"b{i}"] for i in range(WINDOW)], count)
    if count == 0:
        return _fault(_TRUNC)
    try:
        return _run(rd)
    except _Out as o:
        return _fault(o.code)


def _run(rd: _Bytes) -> BitVec:
    g = current_aig()
    lock = op66 = rep = False
    rex: BitVec | None = None
    state = "prefix"
    opmap = 0
    while True:
        raw = rd.take()
        if state == "prefix" and raw.slice(4, 7).value == 4:
            rex = raw  # the low nibble may be symbolic
            continue
        b = raw.value
        if b is None:
            raise ValueError(f"decoder steering byte {rd.pos - 1} is symbolic")
        cls = BYTE_CLASS[b]
        if state == "prefix":
            if cls in (C_LOCK, C_66, C_REP, C_OTHER_PFX):
                lock |= cls == C_LOCK
                op66 |= cls == C_66
                rep |= cls == C_REP
                rex = None
                continue
            if cls == C_EVEX:
                return _run_evex(g, rd, lock, op66, rep, rex is not None)
            if cls == C_ESC:
                state, opmap = "escape", 1
                continue
            break
        if state == "escape":
            if b == 0x38 or b == 0x3A:
                state, opmap = "escape2", 2 if b == 0x38 else 3
                continue
            break
        break  # escape2: this byte is the opcode
    rows = LEGACY_ROM.get((opmap, b))
    if rows is None:
        raise _Out(_UD)
    modrm = list(rd.take().bits)
    imm = list(rd.take().bits) if rows[0].attrs & A_IMM8 else _const_bits(8, 0)
    rex_bits = list(rex.bits) if rex is not None else _const_bits(8, 0)
    has_rex = TRUE if rex is not None else FALSE
    w = rex_bits[3]
    is_reg = g.and_(modrm[6], modrm[7])
    lk = TRUE if lock else FALSE
    o66 = TRUE if op66 else FALSE
    size = [g.and_(w ^ 1, o66 ^ 1), w]  # 10: 64, 01: 32, 00: 16
    reg = modrm[3:6] + [rex_bits[2], FALSE]
    rm = modrm[0:3] + [rex_bits[0], FALSE]
    pfx = [TRUE if op66 else FALSE, has_rex, w]
    cands = []
    ud_any = unsup_any = FALSE
    matched = FALSE
    for row in rows:
        hit = TRUE if row.ext < 0 else _eq_const(g, modrm[3:6], row.ext)
        lock_bad = lk if row.attrs & A_LOCK_ANY else (g.and_(lk, is_reg) if row.attrs & A_LOCK_REG else FALSE)
        fields = {
            "entry": _const_bits(5, row.entry),
            "size": size,
            "reg": reg if row.attrs & A_HAS_REG else _const_bits(5, 0),
            "rm": rm,
            "rm_hi8": [g.and_(has_rex ^ 1, modrm[2]) if row.attrs & A_BYTE_RM else FALSE],
            "imm": imm,
            "length": _const_bits(4, rd.pos),
            "pfx": pfx,
        }
        cands.append((hit, fields))
        matched = g.or_(matched, hit)
        ud_any = g.or_(ud_any, g.and_(hit, lock_bad))
        unsup_any = g.or_(unsup_any, g.and_(hit, g.and_(lock_bad ^ 1, is_reg ^ 1)))
    ud = g.or_(ud_any, matched ^ 1)
    return _assemble(g, _encode(g, ud, unsup_any), cands)


def _run_evex(g: Aig, rd: _Bytes, lock: bool, op66: bool, rep: bool, rex: bool) -> BitVec:
    p0 = rd.take()
    mm = p0.slice(0, 1).value
    if mm is None:
        raise ValueError("EVEX map select is symbolic")
    rows = EVEX_ROM.get(mm)
    if not rows:
        raise _Out(_UD)
    p0b = list(p0.bits)
    p1 = list(rd.take().bits)
    p2 = list(rd.take().bits)
    opc = list(rd.take().bits)
    modrm = list(rd.take().bits)
    imm = list(rd.take().bits)
    is_reg = g.and_(modrm[6], modrm[7])
    ll = p2[5:7]
    aaa = p2[0:3]
    legacy_bad = TRUE if (lock or op66 or rep or rex) else FALSE
    reserved_bad = g.or_(g.or_(p0b[2], p0b[3]), p1[2] ^ 1)
    ll_bad = g.and_(ll[0], ll[1])
    b_bad = g.and_(p2[4], is_reg)
    zk0_bad = FALSE if bug_enabled("decode-missing-evex-exception") else g.and_(p2[7], _eq_const(g, aaa, 0))
    checks = g.or_(g.or_(legacy_bad, reserved_bad), g.or_(g.or_(ll_bad, b_bad), zk0_bad))
    reg = modrm[3:6] + [p0b[7] ^ 1, p0b[4] ^ 1]
    rm = modrm[0:3] + [p0b[5] ^ 1, p0b[6] ^ 1]
    vvvv = [x ^ 1 for x in p1[3:7]] + [p2[3] ^ 1]
    cands = []
    matched = ud_any = unsup_any = FALSE
    for row in rows:
        hit = g.and_(_eq_const(g, opc, row.opcode),
                     g.and_(_eq_const(g, p1[0:2], row.pp), p1[7] if row.w else p1[7] ^ 1))
        fields = {
            "entry": _const_bits(5, row.entry),
            "size": _const_bits(2, _SIZE512),
            "reg": reg,
            "rm": rm,
            "vvvv": vvvv,
            "imm": imm,
            "opmask": aaa,
            "zmask": [p2[7]],
            "length": _const_bits(4, rd.pos),
        }
        cands.append((hit, fields))
        wrong_ll = _eq_const(g, ll, row.ll) ^ 1
        matched = g.or_(matched, hit)
        ud_any = g.or_(ud_any, g.and_(hit, checks))
        unsup_any = g.or_(unsup_any, g.and_(hit, g.and_(checks ^ 1, g.or_(is_reg ^ 1, wrong_ll))))
    ud = g.or_(ud_any, matched ^ 1)
    return _assemble(g, _encode(g, ud, unsup_any), cands)


def map_decode(code: Sequence[Byte], config: MachineConfig | None = None) -> BitVec:
    vals = {}
    for i in range(WINDOW):
        if i < len(code):
            b = code[i]
            vals[f"b{i}"] = b if isinstance(b, BitVec) else BitVec.const(8, b)
        else:
            vals[f"b{i}"] = BitVec.const(8, 0)
    vals["count"] = BitVec.const(4, min(len(code), WINDOW))
    return DECODE_IN.map(vals)


def get_instr(vec: BitVec) -> DecodeResult:
    p = DECODE_OUT.get(vec)
    return DecodeResult(p["dx"], Instruction.unpack(concat_all([p[n] for n, _ in FIELD_WIDTHS])))


def dut_decode(code: Sequence[Byte], config: MachineConfig | None = None) -> DecodeResult:
    config = config or MachineConfig()
    config.check_supported()
    return get_instr(sv_decode(map_decode(code, config)))
