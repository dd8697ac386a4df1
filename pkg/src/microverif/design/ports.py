"""Flat signal vectors and the adapters that give them structure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from ..bitvec import BitVec, concat_all


@dataclass(frozen=True)
class PortBinding:
    """Named fields packed least-significant first into one vector."""

    name: str
    fields: tuple[tuple[str, int], ...]

    @property
    def width(self) -> int:
        return sum(w for _, w in self.fields)

    def offsets(self) -> dict[str, tuple[int, int]]:
        out, lo = {}, 0
        for n, w in self.fields:
            out[n] = (lo, w)
            lo += w
        return out

    def map(self, values: Mapping[str, BitVec | int]) -> BitVec:
        parts = []
        for n, w in self.fields:
            v = values.get(n, 0)
            if not isinstance(v, BitVec):
                v = BitVec.const(w, v)
            if v.width != w:
                raise ValueError(f"{self.name}.{n}: expected {w} bits, got {v.width}")
            parts.append(v)
        extra = set(values) - {n for n, _ in self.fields}
        if extra:
            raise KeyError(f"{self.name}: unknown ports {sorted(extra)}")
        return concat_all(parts)

    def get(self, vec: BitVec) -> dict[str, BitVec]:
        if vec.width != self.width:
            raise ValueError(f"{self.name}: expected {self.width} bits, got {vec.width}")
        return {n: vec.slice(lo, lo + w - 1) for n, (lo, w) in self.offsets().items()}

    def fresh(self, prefix: str = "") -> BitVec:
        """A vector of new inputs, one per port bit."""
        return concat_all([BitVec.var(w, f"{prefix or self.name}.{n}") for n, w in self.fields])
