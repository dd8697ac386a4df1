"""Declarative instruction catalog (the ``inst.lst`` analogue).

Each entry records the encoding, operand sources and exception specs of
one instruction form. Both decoders and the candidate-population
machinery read from here.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

LEGACY, EVEX = "legacy", "EVEX"

# opcode maps
MAP_1BYTE, MAP_0F, MAP_0F38, MAP_0F3A = 0, 1, 2, 3
MAP_NAMES = {MAP_1BYTE: "", MAP_0F: "0F", MAP_0F38: "0F38", MAP_0F3A: "0F3A"}

DECODE, EXECUTE, OUT_OF_SCOPE = "decode", "execute", "out-of-scope"

# decode-result exception codes (3-bit)
DX_NONE, DX_UD, DX_GP0, DX_UNSUPPORTED, DX_TRUNCATED = 0, 1, 2, 3, 4
DX_NAMES = {
    DX_NONE: None,
    DX_UD: "#UD",
    DX_GP0: "#GP(0)",
    DX_UNSUPPORTED: "unsupported-variant",
    DX_TRUNCATED: "truncated",
}
DX_WIDTH = 3

# operand-size codes (2-bit)
SIZE_CODES = {16: 0, 32: 1, 64: 2, 512: 3}
SIZE_FROM_CODE = {v: k for k, v in SIZE_CODES.items()}


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class OperandSpec:
    name: str  # OP1, OP2, ...
    source: str  # ModRM.reg | ModRM.rm | EVEX.vvvv | IMM8 | CL
    kinds: tuple[str, ...]  # GPR | MEM | ZMM | IMM
    width: str = "v"  # v: operand size, b: byte, z: 512-bit vector, ib: imm8


@dataclass(frozen=True)
class ExceptionSpec:
    exception: str  # "#UD", "#GP(0)"
    condition: str  # key into the decoders' condition tables
    phase: str  # decode | execute | out-of-scope
    text: str = ""


@dataclass(frozen=True)
class EvexSpec:
    pp: int  # 0: none, 1: 66, 2: F3, 3: F2
    w: int
    ll: int  # 2 -> 512-bit
    type_class: str = "E4NF"


@dataclass(frozen=True)
class InstListEntry:
    mnemonic: str
    form: str
    encoding: str
    opcode_map: int
    opcode: int
    operands: tuple[OperandSpec, ...]
    exceptions: tuple[ExceptionSpec, ...]
    sizes: tuple[int, ...]
    modrm_ext: Optional[int] = None  # /digit in ModRM.reg
    imm_bytes: int = 0
    evex: Optional[EvexSpec] = None
    family: str = "alu"
    uid: int = field(default=0, compare=False)

    @property
    def opcode_text(self) -> str:
        parts = [] if self.opcode_map == MAP_1BYTE else [MAP_NAMES[self.opcode_map]]
        parts.append(f"{self.opcode:02X}")
        text = "0x" + "_".join(parts)
        if self.modrm_ext is not None:
            text += f" /{self.modrm_ext}"
        return text

    @property
    def key(self) -> tuple:
        return (self.encoding, self.opcode_map, self.opcode, self.modrm_ext)

    def operand(self, name: str) -> OperandSpec:
        for op in self.operands:
            if op.name == name:
                return op
        raise KeyError(name)

    def operand_from(self, source: str) -> Optional[OperandSpec]:
        for op in self.operands:
            if op.source == source:
                return op
        return None

    def decode_exceptions(self) -> tuple[ExceptionSpec, ...]:
        return tuple(e for e in self.exceptions if e.phase == DECODE)

    @property
    def has_byte_rm(self) -> bool:
        op = self.operand_from("ModRM.rm")
        return op is not None and op.width == "b"


_UD_LOCK = ExceptionSpec("#UD", "lock-prefix", DECODE, "if LOCK prefix used")
_UD_LOCK_REG = ExceptionSpec(
    "#UD", "lock-prefix-reg-dest", DECODE, "if LOCK prefix used with a register destination"
)
_GP_CANON = ExceptionSpec(
    "#GP(0)", "non-canonical-address", OUT_OF_SCOPE, "if the memory address is non-canonical"
)

_EV = OperandSpec("OP1", "ModRM.rm", ("GPR", "MEM"))
_GV = OperandSpec("OP2", "ModRM.reg", ("GPR",))
_GSZ = (16, 32, 64)


def _alu(mnemonic: str, opcode: int, lockable: bool = True) -> InstListEntry:
    return InstListEntry(
        mnemonic, "Ev, Gv", LEGACY, MAP_1BYTE, opcode,
        (_EV, _GV),
        (_UD_LOCK_REG if lockable else _UD_LOCK, _GP_CANON),
        _GSZ,
    )


def _ext(mnemonic: str, opcode: int, form: str) -> InstListEntry:
    return InstListEntry(
        mnemonic, "Gv, Eb", LEGACY, MAP_0F, opcode,
        (OperandSpec("OP1", "ModRM.reg", ("GPR",)), OperandSpec("OP2", "ModRM.rm", ("GPR", "MEM"), "b")),
        (_UD_LOCK, _GP_CANON),
        _GSZ,
        family="ext",
    )


def _shift(mnemonic: str, ext: int) -> InstListEntry:
    return InstListEntry(
        mnemonic, "Ev, Ib", LEGACY, MAP_1BYTE, 0xC1,
        (_EV, OperandSpec("OP2", "IMM8", ("IMM",), "ib")),
        (_UD_LOCK, _GP_CANON),
        _GSZ,
        modrm_ext=ext,
        imm_bytes=1,
        family="shift",
    )


_ENTRIES: tuple[InstListEntry, ...] = (
    _alu("ADD", 0x01),
    _alu("OR", 0x09),
    _alu("AND", 0x21),
    _alu("SUB", 0x29),
    _alu("XOR", 0x31),
    _alu("MOV", 0x89, lockable=False),
    _ext("MOVZX", 0xB6, "Gv, Eb"),
    _ext("MOVSX", 0xBE, "Gv, Eb"),
    _shift("ROR", 1),
    _shift("SHL", 4),
    _shift("SHR", 5),
    InstListEntry(
        "SHRD", "Ev, Gv, Ib", LEGACY, MAP_0F, 0xAC,
        (_EV, _GV, OperandSpec("OP3", "IMM8", ("IMM",), "ib")),
        (_UD_LOCK, _GP_CANON),
        _GSZ,
        imm_bytes=1,
        family="shrd",
    ),
    InstListEntry(
        "SHRD", "Ev, Gv, CL", LEGACY, MAP_0F, 0xAD,
        (_EV, _GV, OperandSpec("OP3", "CL", ("GPR",), "b")),
        (_UD_LOCK, _GP_CANON),
        _GSZ,
        family="shrd",
    ),
    InstListEntry(
        "VPSHRDQ", "Vz{k}{z}, Hz, Wz, Ib", EVEX, MAP_0F3A, 0x73,
        (
            OperandSpec("OP1", "ModRM.reg", ("ZMM",), "z"),
            OperandSpec("OP2", "EVEX.vvvv", ("ZMM",), "z"),
            OperandSpec("OP3", "ModRM.rm", ("ZMM", "MEM"), "z"),
            OperandSpec("OP4", "IMM8", ("IMM",), "ib"),
        ),
        (
            ExceptionSpec("#UD", "evex-illegal-prefix", DECODE,
                          "if a LOCK, 66, F2, F3 or REX prefix precedes EVEX"),
            ExceptionSpec("#UD", "evex-reserved-bits", DECODE, "if EVEX reserved bits are wrong"),
            ExceptionSpec("#UD", "evex-ll-reserved", DECODE, "if EVEX.L'L = 11"),
            ExceptionSpec("#UD", "evex-b-reg", DECODE, "if EVEX.b set with a register operand"),
            ExceptionSpec("#UD", "evex-zero-mask-k0", DECODE,
                          "if zero-masking is requested with opmask k0"),
            ExceptionSpec("#UD", "avx512-disabled", EXECUTE, "if AVX512 is not enabled"),
            _GP_CANON,
        ),
        (512,),
        imm_bytes=1,
        evex=EvexSpec(pp=1, w=1, ll=2),
        family="vpshrdq",
    ),
)


@lru_cache(maxsize=None)
def load_inst_table() -> tuple[InstListEntry, ...]:
    """The catalog; entry ``uid`` is its 1-based index (0 means no entry)."""
    seen: set[tuple] = set()
    out = []
    for i, e in enumerate(_ENTRIES, 1):
        if e.key in seen:
            raise CatalogError(f"duplicate catalog key {e.key}")
        seen.add(e.key)
        sources = [op.source for op in e.operands]
        if len(set(sources)) != len(sources):
            raise CatalogError(f"{e.mnemonic}: operand sources must be distinct")
        out.append(replace(e, uid=i))
    return tuple(out)


ENTRY_WIDTH = 5


def entry_by_uid(uid: int) -> InstListEntry:
    table = load_inst_table()
    if not 1 <= uid <= len(table):
        raise KeyError(f"no catalog entry {uid}")
    return table[uid - 1]


def lookup(mnemonic: str, form: str | None = None) -> InstListEntry:
    hits = [e for e in load_inst_table() if e.mnemonic == mnemonic]
    if form is not None:
        hits = [e for e in hits if e.form == form]
    if not hits:
        raise KeyError(f"{mnemonic} {form or ''}".strip())
    return hits[0]


def entries_for(encoding: str, opcode_map: int, opcode: int) -> list[InstListEntry]:
    return [
        e for e in load_inst_table()
        if e.encoding == encoding and e.opcode_map == opcode_map and e.opcode == opcode
    ]


def catalog_opcodes() -> set[tuple[str, int, int]]:
    return {(e.encoding, e.opcode_map, e.opcode) for e in load_inst_table()}


# Named variants used by queries, selectors and the translator.
@dataclass(frozen=True)
class Variant:
    vid: str  # MNEMONIC/variant
    mnemonic: str
    form: str
    size: int
    op1_kind: str


VARIANTS: dict[str, Variant] = {
    v.vid: v
    for v in (
        Variant("SHRD/reg64-imm8", "SHRD", "Ev, Gv, Ib", 64, "GPR"),
        Variant("SHRD/reg64-cl", "SHRD", "Ev, Gv, CL", 64, "GPR"),
        Variant("VPSHRDQ/zmm-imm8", "VPSHRDQ", "Vz{k}{z}, Hz, Wz, Ib", 512, "ZMM"),
    )
}
