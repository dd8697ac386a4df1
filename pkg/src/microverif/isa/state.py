"""Architectural state of the x86 subset and its text file format."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Union

from ..bitvec import BitVec

GPR_NAMES = (
    "RAX", "RCX", "RDX", "RBX", "RSP", "RBP", "RSI", "RDI",
    "R8", "R9", "R10", "R11", "R12", "R13", "R14", "R15",
)
GPR_INDEX = {name: i for i, name in enumerate(GPR_NAMES)}
FLAG_NAMES = ("ZF", "SF", "CF")
NUM_ZMM = 32
NUM_K = 8

Byte = Union[int, BitVec]


class StateFileError(ValueError):
    pass


def gpr_loc(i: int) -> str:
    return f"GPR[{GPR_NAMES[i]}]"


def zmm_loc(i: int) -> str:
    return f"ZMM[ZMM{i}]"


def k_loc(i: int) -> str:
    return f"K[K{i}]"


@dataclass(frozen=True)
class MachineConfig:
    mode: int = 64  # only 64-bit mode is modelled; 16/32 are reserved values

    def __post_init__(self) -> None:
        if self.mode not in (16, 32, 64):
            raise ValueError(f"unknown machine mode {self.mode}")

    def check_supported(self) -> None:
        if self.mode != 64:
            raise NotImplementedError("only 64-bit mode is modelled")


@dataclass(frozen=True)
class X86State:
    ip: int = 0
    config: MachineConfig = field(default_factory=MachineConfig)
    gpr: tuple[BitVec, ...] = ()
    zmm: tuple[BitVec, ...] = ()
    k: tuple[BitVec, ...] = ()
    flags: tuple[BitVec, ...] = ()
    memory: Mapping[int, Byte] = field(default_factory=dict)
    fault: str | None = None

    def __post_init__(self) -> None:
        if not self.gpr:
            object.__setattr__(self, "gpr", tuple(BitVec.const(64, 0) for _ in range(16)))
        if not self.zmm:
            object.__setattr__(self, "zmm", tuple(BitVec.const(512, 0) for _ in range(NUM_ZMM)))
        if not self.k:
            object.__setattr__(self, "k", tuple(BitVec.const(64, 0) for _ in range(NUM_K)))
        if not self.flags:
            object.__setattr__(self, "flags", tuple(BitVec.const(1, 0) for _ in FLAG_NAMES))
        assert len(self.gpr) == 16 and all(r.width == 64 for r in self.gpr)
        assert len(self.zmm) == NUM_ZMM and all(r.width == 512 for r in self.zmm)
        assert len(self.k) == NUM_K and all(r.width == 64 for r in self.k)
        assert len(self.flags) == len(FLAG_NAMES) and all(f.width == 1 for f in self.flags)

    @classmethod
    def symbolic(cls, prefix: str = "s", **kw) -> "X86State":
        """Every register and flag is a fresh input vector."""
        return cls(
            gpr=tuple(BitVec.var(64, f"{prefix}.{n}") for n in GPR_NAMES),
            zmm=tuple(BitVec.var(512, f"{prefix}.ZMM{i}") for i in range(NUM_ZMM)),
            k=tuple(BitVec.var(64, f"{prefix}.K{i}") for i in range(NUM_K)),
            flags=tuple(BitVec.var(1, f"{prefix}.{n}") for n in FLAG_NAMES),
            **kw,
        )

    # -- locations ----------------------------------------------------------

    def read(self, loc: str) -> BitVec:
        kind, idx = _split_loc(loc)
        if kind == "GPR":
            return self.gpr[idx]
        if kind == "ZMM":
            return self.zmm[idx]
        if kind == "K":
            return self.k[idx]
        return self.flags[idx]

    def locations(self) -> list[str]:
        return (
            [gpr_loc(i) for i in range(16)]
            + [zmm_loc(i) for i in range(NUM_ZMM)]
            + [k_loc(i) for i in range(NUM_K)]
            + list(FLAG_NAMES)
        )

    def write_all(self, writes: Mapping[str, BitVec]) -> "X86State":
        gpr, zmm, k, flags = list(self.gpr), list(self.zmm), list(self.k), list(self.flags)
        for loc, val in writes.items():
            kind, idx = _split_loc(loc)
            target = {"GPR": gpr, "ZMM": zmm, "K": k, "FLAG": flags}[kind]
            if val.width != target[idx].width:
                raise ValueError(f"{loc}: width {val.width} != {target[idx].width}")
            target[idx] = val
        return replace(self, gpr=tuple(gpr), zmm=tuple(zmm), k=tuple(k), flags=tuple(flags))

    def flag(self, name: str) -> BitVec:
        return self.flags[FLAG_NAMES.index(name)]

    def diff(self, other: "X86State") -> list[tuple[str, BitVec, BitVec]]:
        out = []
        if self.ip != other.ip:
            out.append(("IP", BitVec.const(64, self.ip), BitVec.const(64, other.ip)))
        for loc in self.locations():
            a, b = self.read(loc), other.read(loc)
            if a != b:
                out.append((loc, a, b))
        return out


_LOC = re.compile(r"^(GPR|ZMM|K)\[([A-Z0-9]+)\]$")


def _split_loc(loc: str) -> tuple[str, int]:
    if loc in FLAG_NAMES:
        return "FLAG", FLAG_NAMES.index(loc)
    m = _LOC.match(loc)
    if not m:
        raise KeyError(f"unknown location {loc!r}")
    kind, name = m.groups()
    if kind == "GPR":
        if name not in GPR_INDEX:
            raise KeyError(f"unknown location {loc!r}")
        return kind, GPR_INDEX[name]
    prefix = "ZMM" if kind == "ZMM" else "K"
    limit = NUM_ZMM if kind == "ZMM" else NUM_K
    if not name.startswith(prefix) or not name[len(prefix):].isdigit():
        raise KeyError(f"unknown location {loc!r}")
    idx = int(name[len(prefix):])
    if idx >= limit:
        raise KeyError(f"unknown location {loc!r}")
    return kind, idx


def loc_width(loc: str) -> int:
    kind, _ = _split_loc(loc)
    return {"GPR": 64, "ZMM": 512, "K": 64, "FLAG": 1}[kind]


# -- state file ------------------------------------------------------------------

_MEM = re.compile(r"^MEM\[0x([0-9A-Fa-f]+)\]$")


def parse_state(text: str) -> X86State:
    """Parse ``NAME=0x<hex>`` lines; unknown names are rejected."""
    writes: dict[str, BitVec] = {}
    memory: dict[int, int] = {}
    ip = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise StateFileError(f"line {lineno}: expected NAME=0x<hex>")
        name, val = (s.strip() for s in line.split("=", 1))
        try:
            value = int(val.replace("_", ""), 16) if val.lower().startswith("0x") else None
        except ValueError:
            value = None
        if value is None:
            raise StateFileError(f"line {lineno}: value must be 0x<hex>")
        if name == "IP":
            ip = value
            continue
        m = _MEM.match(name)
        if m:
            if value > 0xFF:
                raise StateFileError(f"line {lineno}: memory cell holds one byte")
            memory[int(m.group(1), 16)] = value
            continue
        try:
            width = loc_width(name)
        except KeyError:
            raise StateFileError(f"line {lineno}: unknown name {name!r}") from None
        if value >> width:
            raise StateFileError(f"line {lineno}: {name} is only {width} bits")
        writes[name] = BitVec.const(width, value)
    return X86State(ip=ip, memory=memory).write_all(writes)


def format_state(state: X86State, only_nonzero: bool = True) -> str:
    lines = [f"IP=0x{state.ip:X}"]
    for loc in state.locations():
        v = state.read(loc)
        if v.value is None:
            lines.append(f"{loc}=<symbolic>")
        elif v.value or not only_nonzero:
            digits = max(1, (v.width + 3) // 4)
            lines.append(f"{loc}=0x{v.value:0{digits}X}")
    for addr in sorted(state.memory):
        b = state.memory[addr]
        b = b if isinstance(b, int) else b.value
        lines.append(f"MEM[0x{addr:X}]=0x{b:02X}" if b is not None else f"MEM[0x{addr:X}]=<symbolic>")
    return "\n".join(lines) + "\n"
