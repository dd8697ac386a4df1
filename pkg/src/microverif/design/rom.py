"""Compact microcode ROM: word layout, routine assembler and image files.

A ROM word is 64 bits, least-significant field first::

    opcode 8 | dst 6 | src1 6 | src2 6 | immsel 1 | small_imm 16 |
    pred 2 | ssz 3 | dsz 3 | seq 2 | target 10 | reserved 1

Register fields hold template codes. ``ARGn`` codes name instruction
operands and are resolved by the microsequencer against the side-params
of the micro-PC; ``LIT`` selects the word's small immediate and ``IMM``
the instruction immediate.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Optional

from ..ucode.uop import HALT_ADDR, OPCODE_INDEX, OPCODES, PREDICATES, SIZES

WORD_FIELDS: tuple[tuple[str, int], ...] = (
    ("opcode", 8),
    ("dst", 6),
    ("src1", 6),
    ("src2", 6),
    ("immsel", 1),  # 0: small_imm zero-extends, 1: sign-extends
    ("small_imm", 16),
    ("pred", 2),
    ("ssz", 3),
    ("dsz", 3),
    ("seq", 2),
    ("target", 10),
    ("reserved", 1),
)
WORD_WIDTH = sum(w for _, w in WORD_FIELDS)
assert WORD_WIDTH == 64

SEQ_NEXT, SEQ_BRANCH, SEQ_HALT = 0, 1, 2
SIZE_CODE = {s: i for i, s in enumerate(SIZES)}

# template register codes
T_G, T_T = 0, 16
T_ARG = {"ARG0": 48, "ARG1": 49, "ARG2": 50,
         "ARG0L": 51, "ARG0H": 52, "ARG1L": 53, "ARG1H": 54, "ARG2L": 55, "ARG2H": 56}
T_LIT, T_IMM, T_NONE = 57, 58, 63


class RomError(ValueError):
    pass


def template_code(name: str) -> int:
    m = re.fullmatch(r"([GT])(\d+)", name)
    if m:
        idx = int(m.group(2))
        limit = 16 if m.group(1) == "G" else 32
        if idx >= limit:
            raise RomError(f"no internal register {name}")
        return (T_G if m.group(1) == "G" else T_T) + idx
    if name in T_ARG:
        return T_ARG[name]
    raise RomError(f"unknown register template {name!r}")


def template_name(code: int) -> str:
    if code < 16:
        return f"G{code}"
    if code < 48:
        return f"T{code - 16}"
    for k, v in T_ARG.items():
        if v == code:
            return k
    return {T_LIT: "LIT", T_IMM: "IMM", T_NONE: "-"}.get(code, f"?{code}")


@dataclass(frozen=True)
class RomWord:
    opcode: int = 0
    dst: int = T_NONE
    src1: int = T_NONE
    src2: int = T_NONE
    immsel: int = 0
    small_imm: int = 0
    pred: int = 0
    ssz: int = SIZE_CODE[64]
    dsz: int = SIZE_CODE[64]
    seq: int = SEQ_NEXT
    target: int = 0
    reserved: int = 0

    def __post_init__(self) -> None:
        for name, width in WORD_FIELDS:
            v = getattr(self, name)
            if not 0 <= v < (1 << width):
                raise RomError(f"field {name}={v} does not fit {width} bits")
        if self.reserved:
            raise RomError("reserved bit must be zero")

    def pack(self) -> int:
        out, lo = 0, 0
        for name, width in WORD_FIELDS:
            out |= getattr(self, name) << lo
            lo += width
        return out

    @classmethod
    def unpack(cls, word: int) -> "RomWord":
        if not 0 <= word < (1 << WORD_WIDTH):
            raise RomError("ROM words are 64 bits")
        kw, lo = {}, 0
        for name, width in WORD_FIELDS:
            kw[name] = (word >> lo) & ((1 << width) - 1)
            lo += width
        return cls(**kw)

    @property
    def mnemonic(self) -> str:
        if self.opcode >= len(OPCODES):
            raise RomError(f"bad uop opcode {self.opcode}")
        return OPCODES[self.opcode]

    def lit_value(self, width: int = 64) -> int:
        v = self.small_imm
        if self.immsel and v >> 15:
            v -= 1 << 16
        return v & ((1 << width) - 1)


# -- routine source ---------------------------------------------------------------

_ROW = re.compile(
    r"^(?P<op>[A-Z0-9]+)(?:<(?P<pred>!?ZF)>)?"
    r"(?:\s+(?P<args>[^()\[]*?))?"
    r"\s*(?:\(\s*SSZ\s*:\s*(?P<ssz>\d+)\s+DSZ\s*:\s*(?P<dsz>\d+)\s*\))?"
    r"\s*(?P<halt>\[halt\])?$"
)

_SHAPES = {
    "NOP": 0, "HALT": 0,
    "MOV": 2, "MOVSX": 2, "MOVZX": 2, "DLSHFTCNT": 2,
    "JE": 3,
}


@dataclass
class SourceRow:
    label: Optional[str]
    text: str
    line: int


def _strip(line: str) -> str:
    return re.split(r"[#;]", line, maxsplit=1)[0].strip()


def parse_routines(source: str) -> list[tuple[str, list[SourceRow]]]:
    """Split source text into ``(entry label, rows)`` routines."""
    routines: list[tuple[str, list[SourceRow]]] = []
    for n, raw in enumerate(source.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        if line.endswith(":"):
            routines.append((line[:-1].strip(), []))
            continue
        if not routines:
            raise RomError(f"line {n}: row outside any routine")
        routines[-1][1].append(SourceRow(routines[-1][0], line, n))
    for name, rows in routines:
        if not rows:
            raise RomError(f"routine {name} is empty")
    return routines


def _literal(tok: str) -> Optional[int]:
    try:
        return int(tok, 0)
    except ValueError:
        return None


def assemble_row(text: str, labels: Mapping[str, int] | None = None, halt: bool = False) -> RomWord:
    """One mnemonic row to a RomWord; ``labels`` resolves JE targets."""
    m = _ROW.match(text.strip())
    if not m:
        raise RomError(f"cannot parse uop row {text!r}")
    op = m.group("op")
    if op not in OPCODE_INDEX:
        raise RomError(f"unknown uop {op}")
    args = [a.strip() for a in (m.group("args") or "").split(",") if a.strip()]
    # PORQ may spell out its mask operands; they always come from side-params
    if op == "PORQ":
        args = [a for a in args if a not in ("<MaskMode>", "<Opmsk>")]
    want = _SHAPES.get(op, 3)
    if len(args) != want:
        raise RomError(f"{op} takes {want} operands, got {len(args)} in {text!r}")
    kw: dict = dict(opcode=OPCODE_INDEX[op])
    pred = m.group("pred")
    kw["pred"] = PREDICATES.index(pred) if pred else 0
    ssz = int(m.group("ssz") or 64)
    dsz = int(m.group("dsz") or ssz)
    if ssz not in SIZE_CODE or dsz not in SIZE_CODE:
        raise RomError(f"bad operand size in {text!r}")
    kw["ssz"], kw["dsz"] = SIZE_CODE[ssz], SIZE_CODE[dsz]
    seq = SEQ_HALT if (halt or m.group("halt") or op == "HALT") else SEQ_NEXT

    if op == "JE":
        if halt:
            raise RomError("a routine may not end in a branch")
        target = args.pop()
        if labels is None or target not in labels:
            raise RomError(f"unknown branch target {target!r}")
        kw["target"], seq = labels[target], SEQ_BRANCH
        slots = ["src1", "src2"]
    elif want == 2:
        slots = ["dst", "src1"]
    elif want == 3:
        slots = ["dst", "src1", "src2"]
    else:
        slots = []
    have_lit = False
    for slot, tok in zip(slots, args):
        lit = _literal(tok)
        if lit is not None:
            if slot == "dst":
                raise RomError(f"literal destination in {text!r}")
            if have_lit:
                raise RomError(f"at most one literal per row: {text!r}")
            if not -(1 << 15) <= lit < (1 << 16):
                raise RomError(f"literal {lit} does not fit the small immediate")
            have_lit = True
            kw[slot] = T_LIT
            kw["immsel"] = 1 if lit < 0 else 0
            kw["small_imm"] = lit & 0xFFFF
        elif tok in ("IMM", "<imm8>"):
            if slot == "dst":
                raise RomError(f"immediate destination in {text!r}")
            kw[slot] = T_IMM
        else:
            kw[slot] = template_code(tok)
    kw["seq"] = seq
    return RomWord(**kw)


def disassemble(word: RomWord, labels_by_addr: Mapping[int, str] | None = None) -> str:
    op = word.mnemonic
    name = op if word.pred == 0 else f"{op}<{PREDICATES[word.pred]}>"
    ops = []
    for slot in ("dst", "src1", "src2"):
        code = getattr(word, slot)
        if code == T_NONE:
            continue
        if code == T_LIT:
            v = word.lit_value(64)
            ops.append(str(v - (1 << 64) if v >> 63 else v))
        else:
            ops.append(template_name(code))
    if word.seq == SEQ_BRANCH:
        ops.append((labels_by_addr or {}).get(word.target, f"@{word.target:03X}"))
    text = name
    if ops:
        text += " " + ", ".join(ops)
    if op != "HALT":
        text += f" (SSZ:{SIZES[word.ssz]} DSZ:{SIZES[word.dsz]})"
    if word.seq == SEQ_HALT and op != "HALT":
        text += " [halt]"
    return text


@dataclass
class RomImage:
    words: dict[int, int] = field(default_factory=dict)
    labels: dict[str, int] = field(default_factory=dict)

    def word(self, addr: int) -> RomWord:
        if addr not in self.words:
            raise RomError(f"no ROM word at {addr:#05x}")
        return RomWord.unpack(self.words[addr])

    def address(self, label: str) -> int:
        try:
            return self.labels[label]
        except KeyError:
            raise RomError(f"no ROM entry point {label!r}") from None

    @property
    def labels_by_addr(self) -> dict[int, str]:
        return {a: n for n, a in self.labels.items()}

    def routine(self, start: int | str) -> list[tuple[int, RomWord]]:
        """Words from ``start`` up to and including the first halt word."""
        addr = self.address(start) if isinstance(start, str) else start
        out = []
        while True:
            w = self.word(addr)
            out.append((addr, w))
            if w.seq == SEQ_HALT:
                return out
            addr += 1

    def validate(self) -> None:
        for a, raw in self.words.items():
            w = RomWord.unpack(raw)
            w.mnemonic
            if w.seq == SEQ_BRANCH and w.target not in self.words:
                raise RomError(f"word {a:#05x} branches to empty address {w.target:#05x}")
        for name, a in self.labels.items():
            seen = set()
            while True:
                if a in seen or a not in self.words:
                    raise RomError(f"routine {name} does not reach a halt word")
                seen.add(a)
                if RomWord.unpack(self.words[a]).seq == SEQ_HALT:
                    break
                a += 1

    def listing(self) -> str:
        names = self.labels_by_addr
        lines = []
        for a in sorted(self.words):
            if a in names:
                lines.append(f"{names[a]}:")
            lines.append(f"  {a:03X}  {self.words[a]:016X}  {disassemble(self.word(a), names)}")
        return "\n".join(lines)

    # -- image files ------------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"# label {n} {a:03X}" for n, a in sorted(self.labels.items(), key=lambda kv: kv[1])]
        lines += [f"@{a:03X} {self.words[a]:016X}" for a in sorted(self.words)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RomImage":
        img = cls()
        for n, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            m = re.fullmatch(r"#\s*label\s+(\S+)\s+([0-9A-Fa-f]+)", line)
            if m:
                img.labels[m.group(1)] = int(m.group(2), 16)
                continue
            if line.startswith("#"):
                continue
            m = re.fullmatch(r"@([0-9A-Fa-f]+)\s+([0-9A-Fa-f]{16})", line)
            if not m:
                raise RomError(f"line {n}: expected '@<addr> <16 hex digits>'")
            addr = int(m.group(1), 16)
            if addr >= HALT_ADDR:
                raise RomError(f"line {n}: address {addr:#x} is reserved")
            img.words[addr] = int(m.group(2), 16)
            RomWord.unpack(img.words[addr])
        img.validate()
        return img

    def save(self, path: str | os.PathLike) -> Path:
        p = Path(path)
        p.write_text(self.to_text())
        return p

    @classmethod
    def load(cls, path: str | os.PathLike) -> "RomImage":
        return cls.from_text(Path(path).read_text())


def assemble_rom(source: str | Iterable[tuple[str, list[str]]], base: int = 0) -> RomImage:
    """Pack routines into a ROM image, laid out in source order from ``base``.

    ``source`` is routine source text or ``(label, rows)`` pairs. The last
    row of every routine becomes a halt word.
    """
    if isinstance(source, str):
        routines = [(name, [r.text for r in rows]) for name, rows in parse_routines(source)]
    else:
        routines = [(name, list(rows)) for name, rows in source]
    labels, addr = {}, base
    for name, rows in routines:
        if name in labels:
            raise RomError(f"duplicate routine {name}")
        labels[name] = addr
        addr += len(rows)
    if addr > HALT_ADDR:
        raise RomError("routines overflow the ROM")
    img = RomImage(labels=dict(labels))
    addr = base
    for name, rows in routines:
        for i, row in enumerate(rows):
            try:
                img.words[addr] = assemble_row(row, labels, halt=i == len(rows) - 1).pack()
            except RomError as e:
                raise RomError(f"{name}+{i}: {e}") from None
            addr += 1
    img.validate()
    return img


ROUTINE_SOURCE = """\
# double-precision right shift, 64-bit register form
ent_shrdEvGv_64reg:
    AND G3, G3, 63 (SSZ:8 DSZ:64)
    MOV G10, -1 (SSZ:64 DSZ:64)
    JE G3, 0, ent_nop (SSZ:16 DSZ:16)
    SUB G5, 0, G3 (SSZ:32 DSZ:32)
    SHR<!ZF> G10, G10, G5 (SSZ:64 DSZ:64)
    AND<ZF> G10, G10, 0 (SSZ:64 DSZ:64)
    AND G6, ARG1, G10 (SSZ:64 DSZ:64)
    SHR G7, G2, G3 (SSZ:64 DSZ:64)
    SHL G2, G7, G3 (SSZ:64 DSZ:64)
    OR G2, G2, G6 (SSZ:64 DSZ:64)
    ROR G7, G2, G3 (SSZ:64 DSZ:64)
    OR ARG0, G7, G7 (SSZ:64 DSZ:64)

ent_nop:
    HALT

# merge the two shifted halves of each ZMM half under the opmask
avx_double_shift_or_q:
    PORQ ARG0L, T27, T28, <MaskMode>, <Opmsk> (SSZ:256 DSZ:256)
    PORQ ARG0H, T29, T30, <MaskMode>, <Opmsk> (SSZ:256 DSZ:256)
"""


@lru_cache(maxsize=1)
def _default_rom_text() -> str:
    return assemble_rom(ROUTINE_SOURCE).to_text()


def default_rom() -> RomImage:
    """A fresh copy of the reference ROM image."""
    return RomImage.from_text(_default_rom_text())


_active: list[RomImage] = []


def active_rom() -> RomImage:
    if not _active:
        _active.append(default_rom())
    return _active[-1]


def set_active_rom(img: RomImage | None) -> None:
    """Install ``img`` as the ROM the microsequencer reads (None restores the default)."""
    _active.clear()
    if img is not None:
        img.validate()
        _active.append(img)
