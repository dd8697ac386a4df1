"""Spec-level instruction fetch and decode.

The decoder walks the catalog: it parses prefixes and the opcode, collects
the catalog entries sharing that opcode, and evaluates each entry's
decode-phase exception conditions. Bytes may be symbolic as long as the
structural bytes (prefixes, opcode bytes, EVEX map select) are concrete;
field bytes such as ModR/M, the immediate or the EVEX payload may carry
free inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from ..bitvec import BitVec, and1, bv_eq, bv_mux, false, or1, true
from .catalog import (
    DX_NONE,
    DX_TRUNCATED,
    DX_UD,
    DX_UNSUPPORTED,
    DX_WIDTH,
    EVEX,
    LEGACY,
    MAP_0F,
    MAP_0F38,
    MAP_0F3A,
    MAP_1BYTE,
    SIZE_CODES,
    InstListEntry,
    entries_for,
    load_inst_table,
)
from .instruction import DecodeResult, Instruction
from .state import Byte, MachineConfig

MAX_LENGTH = 15

LEGACY_PREFIXES = {
    0xF0: "lock",
    0x66: "opsize",
    0x67: "addrsize",
    0xF2: "repne",
    0xF3: "rep",
    0x2E: "seg",
    0x36: "seg",
    0x3E: "seg",
    0x26: "seg",
    0x64: "seg",
    0x65: "seg",
}


class FetchError(LookupError):
    """Instruction fetch touched an unmapped address."""


class SymbolicStructureError(ValueError):
    """A byte that decides the instruction's structure is symbolic."""


def x86_fetch_code(ip: int, memory: Mapping[int, Byte]) -> list[Byte]:
    """Up to 15 sequential bytes starting at ``ip``."""
    if ip not in memory:
        raise FetchError(f"no code mapped at {ip:#x}")
    out = []
    for a in range(ip, ip + MAX_LENGTH):
        if a not in memory:
            break
        out.append(memory[a])
    return out


def as_byte(b: Byte) -> BitVec:
    if isinstance(b, BitVec):
        if b.width != 8:
            raise ValueError("instruction bytes are 8 bits wide")
        return b
    return BitVec.const(8, b)


class _Stop(Exception):
    def __init__(self, code: int):
        self.code = code


class _Reader:
    def __init__(self, code: Sequence[Byte]):
        self.code = [as_byte(b) for b in code]
        self.pos = 0

    def next(self) -> BitVec:
        if self.pos >= MAX_LENGTH:
            raise _Stop(DX_UD)
        if self.pos >= len(self.code):
            raise _Stop(DX_TRUNCATED)
        b = self.code[self.pos]
        self.pos += 1
        return b

    def next_concrete(self, what: str) -> int:
        b = self.next()
        if b.value is None:
            raise SymbolicStructureError(f"{what} byte at offset {self.pos - 1} is symbolic")
        return b.value


@dataclass
class _Ctx:
    """Everything the decode-phase condition table may look at."""

    lock: BitVec
    opsize: BitVec
    rep: BitVec
    rex: BitVec
    modrm: BitVec
    p0: BitVec | None = None
    p1: BitVec | None = None
    p2: BitVec | None = None

    @property
    def mod_reg(self) -> BitVec:
        return and1(self.modrm[6], self.modrm[7])


def _bits(v: BitVec, lo: int, hi: int) -> BitVec:
    return v.slice(lo, hi)


def _is(v: BitVec, value: int) -> BitVec:
    return bv_eq(v, BitVec.const(v.width, value))


CONDITIONS: dict[str, Callable[[_Ctx], BitVec]] = {
    "lock-prefix": lambda c: c.lock,
    "lock-prefix-reg-dest": lambda c: and1(c.lock, c.mod_reg),
    "evex-illegal-prefix": lambda c: or1(c.lock, c.opsize, c.rep, c.rex),
    "evex-reserved-bits": lambda c: or1(c.p0[2], c.p0[3], ~c.p1[2]),
    "evex-ll-reserved": lambda c: _is(_bits(c.p2, 5, 6), 3),
    "evex-b-reg": lambda c: and1(c.p2[4], c.mod_reg),
    "evex-zero-mask-k0": lambda c: and1(c.p2[7], _is(_bits(c.p2, 0, 2), 0)),
}


def _const(width: int, v: int) -> BitVec:
    return BitVec.const(width, v)


def _pick(cands: list[tuple[BitVec, BitVec, Instruction]]) -> DecodeResult:
    """Priority-combine (match, dx, fields) triples; no match means #UD."""
    dx = _const(DX_WIDTH, DX_UD)
    vec = Instruction.zero().pack()
    for match, cdx, fields in reversed(cands):
        dx = bv_mux(match, cdx, dx)
        vec = bv_mux(match, fields.pack(), vec)
    return DecodeResult(dx, Instruction.unpack(vec)).normalized()


def _entry_dx(e: InstListEntry, ctx: _Ctx, unsupported: BitVec) -> BitVec:
    dx = bv_mux(unsupported, _const(DX_WIDTH, DX_UNSUPPORTED), _const(DX_WIDTH, DX_NONE))
    for spec in reversed(e.decode_exceptions()):
        cond = CONDITIONS[spec.condition](ctx)
        dx = bv_mux(cond, _const(DX_WIDTH, DX_UD), dx)
    return dx


def x86_decode(code: Sequence[Byte], config: MachineConfig | None = None) -> DecodeResult:
    config = config or MachineConfig()
    config.check_supported()
    if not code:
        return DecodeResult.fault(DX_TRUNCATED)
    rd = _Reader(code)
    try:
        return _decode(rd)
    except _Stop as stop:
        return DecodeResult.fault(stop.code)


def _decode(rd: _Reader) -> DecodeResult:
    seen = set()
    rex: BitVec | None = None  # REX byte in effect
    while True:
        b = rd.next()
        hi = _bits(b, 4, 7).value
        if hi is None:
            raise SymbolicStructureError(f"byte {rd.pos - 1} is symbolic")
        if hi == 4:
            rex = b
            continue
        v = b.value
        if v is None:
            raise SymbolicStructureError(f"byte {rd.pos - 1} is symbolic")
        if v in LEGACY_PREFIXES:
            seen.add(LEGACY_PREFIXES[v])
            rex = None  # REX only counts right before the opcode
            continue
        break
    flag = lambda name: true() if name in seen else false()
    ctx = dict(lock=flag("lock"), opsize=flag("opsize"), rep=or1(flag("rep"), flag("repne")),
               rex=true() if rex is not None else false())
    if v == 0x62:
        return _decode_evex(rd, ctx)
    opmap = MAP_1BYTE
    if v == 0x0F:
        v = rd.next_concrete("opcode")
        opmap = MAP_0F
        if v in (0x38, 0x3A):
            opmap = MAP_0F38 if v == 0x38 else MAP_0F3A
            v = rd.next_concrete("opcode")
    cands = entries_for(LEGACY, opmap, v)
    if not cands:
        return DecodeResult.fault(DX_UD)
    modrm = rd.next()
    imm_bytes = {e.imm_bytes for e in cands}
    assert len(imm_bytes) == 1, "entries sharing an opcode must agree on immediate size"
    imm = rd.next() if imm_bytes.pop() else _const(8, 0)
    c = _Ctx(modrm=modrm, **ctx)

    rex_b = rex if rex is not None else _const(8, 0)
    w, r, bb = rex_b[3], rex_b[2], rex_b[0]
    size = bv_mux(w, _const(2, SIZE_CODES[64]),
                  bv_mux(c.opsize, _const(2, SIZE_CODES[16]), _const(2, SIZE_CODES[32])))
    reg = _bits(modrm, 3, 5).concat(r).zext(5)
    rm = _bits(modrm, 0, 2).concat(bb).zext(5)
    pfx = c.opsize.concat(c.rex).concat(w)
    triples = []
    for e in cands:
        match = true() if e.modrm_ext is None else _is(_bits(modrm, 3, 5), e.modrm_ext)
        unsupported = ~c.mod_reg
        hi8 = and1(~c.rex, modrm[2]) if e.has_byte_rm else false()
        fields = Instruction.make(
            entry=e.uid,
            size=size,
            reg=reg if e.operand_from("ModRM.reg") else 0,
            rm=rm,
            rm_hi8=hi8,
            imm=imm,
            length=rd.pos,
            pfx=pfx,
        )
        triples.append((match, _entry_dx(e, c, unsupported), fields))
    return _pick(triples)


def _decode_evex(rd: _Reader, ctx: dict) -> DecodeResult:
    p0 = rd.next()
    mm = _bits(p0, 0, 1).value
    if mm is None:
        raise SymbolicStructureError("EVEX map select is symbolic")
    opmap = {1: MAP_0F, 2: MAP_0F38, 3: MAP_0F3A}.get(mm)
    table = [e for e in load_inst_table() if e.encoding == EVEX and e.opcode_map == opmap]
    if opmap is None or not table:
        return DecodeResult.fault(DX_UD)
    p1 = rd.next()
    p2 = rd.next()
    opcode = rd.next()
    modrm = rd.next()
    imm = rd.next() if opmap == MAP_0F3A else _const(8, 0)
    c = _Ctx(modrm=modrm, p0=p0, p1=p1, p2=p2, **ctx)

    # P0: R X B R' 0 0 m m   P1: W vvvv 1 p p   P2: z L'L b V' aaa
    reg = _bits(modrm, 3, 5).concat(~p0[7]).concat(~p0[4])
    rm = _bits(modrm, 0, 2).concat(~p0[5]).concat(~p0[6])
    vvvv = (~_bits(p1, 3, 6)).concat(~p2[3])
    ll = _bits(p2, 5, 6)
    triples = []
    for e in table:
        match = and1(
            _is(opcode, e.opcode),
            _is(_bits(p1, 0, 1), e.evex.pp),
            _is(p1[7], e.evex.w),
        )
        unsupported = or1(~c.mod_reg, ~_is(ll, e.evex.ll))
        fields = Instruction.make(
            entry=e.uid,
            size=SIZE_CODES[512],
            reg=reg,
            rm=rm,
            vvvv=vvvv,
            imm=imm,
            opmask=_bits(p2, 0, 2),
            zmask=p2[7],
            length=rd.pos,
        )
        triples.append((match, _entry_dx(e, c, unsupported), fields))
    return _pick(triples)


# -- encoding (concrete) ---------------------------------------------------------


def encode_instruction(instr: Instruction) -> bytes:
    """Bytes that decode back to ``instr`` (register forms only)."""
    e = instr.catalog_entry
    reg = e.modrm_ext if e.modrm_ext is not None else instr.reg.value
    rm = instr.rm.value
    imm = [instr.imm.value] if e.imm_bytes else []
    if e.encoding == EVEX:
        vvvv = instr.vvvv.value
        p0 = ((~reg >> 3 & 1) << 7) | ((~rm >> 4 & 1) << 6) | ((~rm >> 3 & 1) << 5) \
            | ((~reg >> 4 & 1) << 4) | {MAP_0F: 1, MAP_0F38: 2, MAP_0F3A: 3}[e.opcode_map]
        p1 = (e.evex.w << 7) | ((~vvvv & 0xF) << 3) | 0x4 | e.evex.pp
        p2 = (instr.zmask.value << 7) | (e.evex.ll << 5) | ((~vvvv >> 4 & 1) << 3) | instr.opmask.value
        modrm = 0xC0 | ((reg & 7) << 3) | (rm & 7)
        return bytes([0x62, p0, p1, p2, e.opcode, modrm] + imm)
    out = []
    size = instr.size_bits
    if size == 16:
        out.append(0x66)
    w = 1 if size == 64 else 0
    r, b = (reg >> 3) & 1, (rm >> 3) & 1
    needs_rex = w or r or b or (e.has_byte_rm and not instr.rm_hi8.value and rm & 7 >= 4)
    if needs_rex:
        out.append(0x40 | (w << 3) | (r << 2) | b)
    if e.opcode_map != MAP_1BYTE:
        out.append(0x0F)
        if e.opcode_map in (MAP_0F38, MAP_0F3A):
            out.append(0x38 if e.opcode_map == MAP_0F38 else 0x3A)
    out.append(e.opcode)
    out.append(0xC0 | ((reg & 7) << 3) | (rm & 7))
    return bytes(out + imm)


def parse_hex_bytes(text: str) -> list[int]:
    """``"48 0F AC D1 10"`` or ``"480FACD110"`` to a byte list."""
    s = text.replace(",", " ").replace("0x", " ").split()
    if len(s) == 1 and len(s[0]) > 2:
        s = [s[0][i:i + 2] for i in range(0, len(s[0]), 2)]
    try:
        out = [int(t, 16) for t in s]
    except ValueError:
        raise ValueError(f"not a hex byte string: {text!r}") from None
    if any(not 0 <= b <= 0xFF for b in out):
        raise ValueError(f"not a hex byte string: {text!r}")
    return out
