"""Fixed-width bitvectors whose bits are AIG literals.

A bit is either a constant literal (0/1) or an edge into the current
:class:`~microverif.aig.Aig`, so the same code runs concretely and
symbolically. Bit 0 is the least significant bit.
"""

from __future__ import annotations

import random
from typing import Iterable, Mapping, Sequence

from .aig import FALSE, TRUE, MissingVariable, current_aig

Env = Mapping[int, bool]

__all__ = [
    "BitVec",
    "Env",
    "MissingVariable",
    "WidthError",
    "bv_arith",
    "bv_bitwise",
    "bv_concat",
    "bv_const",
    "bv_eq",
    "bv_eval",
    "bv_mux",
    "bv_sext",
    "bv_shift",
    "bv_slice",
    "bv_structural",
    "bv_var",
    "bv_zext",
    "random_env",
]


class WidthError(ValueError):
    pass


class BitVec:
    """Immutable vector of AIG literals, index 0 least significant."""

    __slots__ = ("bits", "_value")

    def __init__(self, bits: Iterable[int]):
        bits = tuple(bits)
        if not bits:
            raise WidthError("bitvector width must be positive")
        self.bits = bits
        self._value: int | None = -1

    # -- construction -------------------------------------------------------

    @classmethod
    def const(cls, width: int, value: int) -> "BitVec":
        if width <= 0:
            raise WidthError("bitvector width must be positive")
        if value < 0 or value >> width:
            raise ValueError(f"value {value:#x} does not fit in {width} bits")
        bv = cls((value >> i) & 1 for i in range(width))
        bv._value = value
        return bv

    @classmethod
    def const_wrap(cls, width: int, value: int) -> "BitVec":
        """Constant from any integer, reduced modulo ``2**width``."""
        return cls.const(width, value & ((1 << width) - 1))

    @classmethod
    def var(cls, width: int, name: str = "") -> "BitVec":
        if width <= 0:
            raise WidthError("bitvector width must be positive")
        aig = current_aig()
        return cls(aig.new_input(f"{name}[{i}]") for i in range(width))

    # -- basic queries ------------------------------------------------------

    @property
    def width(self) -> int:
        return len(self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def value(self) -> int | None:
        """Unsigned value if every bit is constant, else ``None``."""
        if self._value == -1:
            v = 0
            for i, b in enumerate(self.bits):
                if b > TRUE:
                    self._value = None
                    return None
                v |= b << i
            self._value = v
        return self._value

    @property
    def is_concrete(self) -> bool:
        return self.value is not None

    def __int__(self) -> int:
        v = self.value
        if v is None:
            raise TypeError("symbolic bitvector has no integer value")
        return v

    def signed(self) -> int:
        v = int(self)
        return v - (1 << self.width) if v >> (self.width - 1) else v

    def __eq__(self, other: object) -> bool:  # structural identity
        return isinstance(other, BitVec) and self.bits == other.bits

    def __hash__(self) -> int:
        return hash(self.bits)

    def __repr__(self) -> str:
        v = self.value
        if v is not None:
            return f"BitVec({self.width}, {v:#x})"
        return f"BitVec({self.width}, <symbolic>)"

    def __getitem__(self, i: int) -> "BitVec":
        return BitVec((self.bits[i],))

    @property
    def bit(self) -> int:
        if self.width != 1:
            raise WidthError("expected a 1-bit vector")
        return self.bits[0]

    # -- operators ----------------------------------------------------------

    def _check(self, other: "BitVec") -> None:
        if self.width != other.width:
            raise WidthError(f"width mismatch: {self.width} vs {other.width}")

    def __and__(self, other: "BitVec") -> "BitVec":
        self._check(other)
        a, b = self.value, other.value
        if a is not None and b is not None:
            return BitVec.const(self.width, a & b)
        g = current_aig()
        return BitVec(g.and_(x, y) for x, y in zip(self.bits, other.bits))

    def __or__(self, other: "BitVec") -> "BitVec":
        self._check(other)
        a, b = self.value, other.value
        if a is not None and b is not None:
            return BitVec.const(self.width, a | b)
        g = current_aig()
        return BitVec(g.or_(x, y) for x, y in zip(self.bits, other.bits))

    def __xor__(self, other: "BitVec") -> "BitVec":
        self._check(other)
        a, b = self.value, other.value
        if a is not None and b is not None:
            return BitVec.const(self.width, a ^ b)
        g = current_aig()
        return BitVec(g.xor(x, y) for x, y in zip(self.bits, other.bits))

    def __invert__(self) -> "BitVec":
        return BitVec(b ^ 1 for b in self.bits)

    def __add__(self, other: "BitVec") -> "BitVec":
        return _add(self, other, FALSE)

    def __sub__(self, other: "BitVec") -> "BitVec":
        return _add(self, ~other, TRUE)

    def __neg__(self) -> "BitVec":
        return BitVec.const(self.width, 0) - self

    # -- structure ----------------------------------------------------------

    def slice(self, lo: int, hi: int) -> "BitVec":
        if not 0 <= lo <= hi < self.width:
            raise IndexError(f"slice [{lo}, {hi}] outside width {self.width}")
        return BitVec(self.bits[lo : hi + 1])

    def trunc(self, width: int) -> "BitVec":
        if width >= self.width:
            return self.zext(width)
        return BitVec(self.bits[:width])

    def zext(self, width: int) -> "BitVec":
        if width < self.width:
            raise WidthError(f"cannot zero-extend {self.width} bits to {width}")
        return BitVec(self.bits + (FALSE,) * (width - self.width))

    def sext(self, width: int) -> "BitVec":
        if width < self.width:
            raise WidthError(f"cannot sign-extend {self.width} bits to {width}")
        return BitVec(self.bits + (self.bits[-1],) * (width - self.width))

    def concat(self, high: "BitVec") -> "BitVec":
        """``self`` in the low bits, ``high`` above it."""
        return BitVec(self.bits + high.bits)

    def lanes(self, lane_width: int) -> list["BitVec"]:
        return [
            BitVec(self.bits[i : i + lane_width])
            for i in range(0, self.width, lane_width)
        ]

    # -- reductions ---------------------------------------------------------

    def any(self) -> "BitVec":
        return BitVec((current_aig().or_all(self.bits),))

    def all(self) -> "BitVec":
        return BitVec((current_aig().and_all(self.bits),))

    def is_zero(self) -> "BitVec":
        return ~self.any()


def _add(a: BitVec, b: BitVec, carry: int) -> BitVec:
    a._check(b)
    av, bv = a.value, b.value
    if av is not None and bv is not None:
        return BitVec.const_wrap(a.width, av + bv + carry)
    g = current_aig()
    out = []
    for x, y in zip(a.bits, b.bits):
        t = g.xor(x, y)
        out.append(g.xor(t, carry))
        carry = g.or_(g.and_(x, y), g.and_(t, carry))
    return BitVec(out)


def concat_all(parts: Sequence[BitVec]) -> BitVec:
    """Concatenate with ``parts[0]`` in the least significant position."""
    bits: list[int] = []
    for p in parts:
        bits.extend(p.bits)
    return BitVec(bits)


def bit(lit: int) -> BitVec:
    return BitVec((lit,))


def true() -> BitVec:
    return BitVec((TRUE,))


def false() -> BitVec:
    return BitVec((FALSE,))


def and1(*xs: BitVec) -> BitVec:
    return BitVec((current_aig().and_all(x.bit for x in xs),))


def or1(*xs: BitVec) -> BitVec:
    return BitVec((current_aig().or_all(x.bit for x in xs),))


def implies(a: BitVec, b: BitVec) -> BitVec:
    return or1(~a, b)


# -- spec-facing operations -----------------------------------------------------


def bv_const(width: int, value: int) -> BitVec:
    return BitVec.const(width, value)


def bv_var(width: int, name: str = "") -> BitVec:
    return BitVec.var(width, name)


def bv_bitwise(op: str, a: BitVec, b: BitVec | None = None) -> BitVec:
    op = op.upper()
    if op == "NOT":
        return ~a
    if b is None:
        raise TypeError(f"{op} needs two operands")
    if op == "AND":
        return a & b
    if op == "OR":
        return a | b
    if op == "XOR":
        return a ^ b
    raise ValueError(f"unknown bitwise op {op!r}")


def bv_arith(op: str, a: BitVec, b: BitVec) -> BitVec:
    op = op.upper()
    if op == "ADD":
        return a + b
    if op == "SUB":
        return a - b
    raise ValueError(f"unknown arithmetic op {op!r}")


def bv_shift(op: str, a: BitVec, count: BitVec) -> BitVec:
    """Zero-filling SHL/SHR (count >= width gives 0) and ROR (count mod width)."""
    op = op.upper()
    n = a.width
    c = count.value
    if c is not None:
        if op == "ROR":
            k = c % n
            return BitVec(a.bits[k:] + a.bits[:k])
        if c >= n:
            return BitVec.const(n, 0)
        if op == "SHL":
            return BitVec((FALSE,) * c + a.bits[: n - c])
        if op == "SHR":
            return BitVec(a.bits[c:] + (FALSE,) * c)
        raise ValueError(f"unknown shift op {op!r}")
    g = current_aig()
    bits = list(a.bits)
    if op == "ROR":
        for j, sel in enumerate(count.bits):
            k = (1 << j) % n
            if k == 0:
                continue
            rotated = bits[k:] + bits[:k]
            bits = [g.mux(sel, r, o) for r, o in zip(rotated, bits)]
        return BitVec(bits)
    if op not in ("SHL", "SHR"):
        raise ValueError(f"unknown shift op {op!r}")
    overflow = FALSE
    for j, sel in enumerate(count.bits):
        k = 1 << j
        if k >= n:
            overflow = g.or_(overflow, sel)
            continue
        if op == "SHR":
            shifted = bits[k:] + [FALSE] * k
        else:
            shifted = [FALSE] * k + bits[: n - k]
        bits = [g.mux(sel, s, o) for s, o in zip(shifted, bits)]
    return BitVec(g.and_(b, overflow ^ 1) for b in bits)


def bv_slice(a: BitVec, lo: int, hi: int) -> BitVec:
    return a.slice(lo, hi)


def bv_concat(low: BitVec, high: BitVec) -> BitVec:
    return low.concat(high)


def bv_zext(a: BitVec, width: int) -> BitVec:
    return a.zext(width)


def bv_sext(a: BitVec, width: int) -> BitVec:
    return a.sext(width)


def bv_structural(op: str, a: BitVec, *args) -> BitVec:
    op = op.lower()
    if op == "slice":
        return a.slice(*args)
    if op == "concat":
        return a.concat(*args)
    if op == "zext":
        return a.zext(*args)
    if op == "sext":
        return a.sext(*args)
    raise ValueError(f"unknown structural op {op!r}")


def bv_mux(sel: BitVec, then: BitVec, other: BitVec) -> BitVec:
    if sel.width != 1:
        raise WidthError("mux select must be 1 bit")
    then._check(other)
    s = sel.bits[0]
    if s == TRUE:
        return then
    if s == FALSE:
        return other
    g = current_aig()
    return BitVec(g.mux(s, t, e) for t, e in zip(then.bits, other.bits))


def bv_eq(a: BitVec, b: BitVec) -> BitVec:
    a._check(b)
    av, bv = a.value, b.value
    if av is not None and bv is not None:
        return BitVec.const(1, int(av == bv))
    g = current_aig()
    return BitVec((g.and_all(g.xor(x, y) ^ 1 for x, y in zip(a.bits, b.bits)),))


def bv_ult(a: BitVec, b: BitVec) -> BitVec:
    """Unsigned a < b, as the borrow out of a - b."""
    a._check(b)
    av, bv = a.value, b.value
    if av is not None and bv is not None:
        return BitVec.const(1, int(av < bv))
    g = current_aig()
    borrow = FALSE
    for x, y in zip(a.bits, b.bits):
        # borrow' = (~x & y) | (~(x ^ y) & borrow)
        borrow = g.or_(g.and_(x ^ 1, y), g.and_(g.xor(x, y) ^ 1, borrow))
    return BitVec((borrow,))


def bv_eval(v: BitVec, env: Env) -> int:
    """Unsigned value of ``v`` under ``env`` (var id -> bool)."""
    if v.value is not None:
        return v.value
    bits = current_aig().evaluate(v.bits, env)
    return sum(1 << i for i, b in enumerate(bits) if b)


def bv_eval_many(vs: Sequence[BitVec], env: Env) -> list[int]:
    flat = [b for v in vs for b in v.bits]
    bits = current_aig().evaluate(flat, env)
    out, i = [], 0
    for v in vs:
        out.append(sum(1 << k for k, b in enumerate(bits[i : i + v.width]) if b))
        i += v.width
    return out


def support(*vs: BitVec) -> list[int]:
    return current_aig().support(b for v in vs for b in v.bits)


def env_for(vec: BitVec, value: int) -> dict[int, bool]:
    """Environment fragment assigning ``value`` to a vector of fresh inputs."""
    env = {}
    for i, lit in enumerate(vec.bits):
        if lit <= TRUE:
            continue
        if lit & 1:
            raise ValueError("env_for needs a vector of plain input literals")
        env[lit >> 1] = bool((value >> i) & 1)
    return env


def random_env(vars: Iterable[int], rng: random.Random) -> dict[int, bool]:
    return {v: bool(rng.getrandbits(1)) for v in vars}
