"""Hash-consed and-inverter graph store.

Literals are plain ints: ``2 * node + negated``. Node 0 is the constant, so
literal 0 is false and literal 1 is true. Inputs are nodes without fanins;
their node index doubles as the variable id used in environments.

Nodes are appended in topological order (fanins always have smaller
indices), which lets evaluation walk a cone in ascending index order.
"""

from __future__ import annotations

import contextlib
from typing import Iterable, Iterator, Mapping

FALSE = 0
TRUE = 1

_INPUT = -1


class MissingVariable(KeyError):
    """An environment did not assign an input the expression depends on."""


class Aig:
    """Append-only AIG store. One writer at a time; reads are lock-free."""

    def __init__(self) -> None:
        self._left: list[int] = [_INPUT - 1]  # node 0: constant
        self._right: list[int] = [0]
        self._strash: dict[int, int] = {}
        self._names: dict[int, str] = {}

    # -- construction -------------------------------------------------------

    def __len__(self) -> int:
        return len(self._left)

    @property
    def num_ands(self) -> int:
        return len(self._strash)

    def new_input(self, name: str = "") -> int:
        node = len(self._left)
        self._left.append(_INPUT)
        self._right.append(0)
        self._names[node] = name
        return node << 1

    def and_(self, a: int, b: int) -> int:
        if a > b:
            a, b = b, a
        # a <= b from here; constants sort first
        if a == FALSE:
            return FALSE
        if a == TRUE:
            return b
        if a == b:
            return a
        if a ^ 1 == b:
            return FALSE
        key = (a << 32) | b
        hit = self._strash.get(key)
        if hit is not None:
            return hit
        node = len(self._left)
        self._left.append(a)
        self._right.append(b)
        lit = node << 1
        self._strash[key] = lit
        return lit

    def or_(self, a: int, b: int) -> int:
        return self.and_(a ^ 1, b ^ 1) ^ 1

    def xor(self, a: int, b: int) -> int:
        if a <= TRUE:
            return b ^ a
        if b <= TRUE:
            return a ^ b
        if a == b:
            return FALSE
        if a ^ 1 == b:
            return TRUE
        return self.or_(self.and_(a, b ^ 1), self.and_(a ^ 1, b))

    def mux(self, sel: int, then: int, other: int) -> int:
        if sel == TRUE or then == other:
            return then
        if sel == FALSE:
            return other
        if then == TRUE and other == FALSE:
            return sel
        if then == FALSE and other == TRUE:
            return sel ^ 1
        return self.or_(self.and_(sel, then), self.and_(sel ^ 1, other))

    def and_all(self, lits: Iterable[int]) -> int:
        acc = TRUE
        for lit in lits:
            acc = self.and_(acc, lit)
            if acc == FALSE:
                return FALSE
        return acc

    def or_all(self, lits: Iterable[int]) -> int:
        acc = FALSE
        for lit in lits:
            acc = self.or_(acc, lit)
            if acc == TRUE:
                return TRUE
        return acc

    # -- inspection ---------------------------------------------------------

    def is_input(self, node: int) -> bool:
        return self._left[node] == _INPUT

    def is_and(self, node: int) -> bool:
        return self._left[node] >= 0

    def fanins(self, node: int) -> tuple[int, int]:
        return self._left[node], self._right[node]

    def input_name(self, node: int) -> str:
        return self._names.get(node, "")

    def cone(self, lits: Iterable[int]) -> list[int]:
        """Nodes (ascending) in the transitive fanin of ``lits``, inputs included."""
        left, right = self._left, self._right
        seen: set[int] = set()
        stack = [lit >> 1 for lit in lits if lit > TRUE]
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            l = left[node]
            if l >= 0:
                if l > TRUE:
                    stack.append(l >> 1)
                r = right[node]
                if r > TRUE:
                    stack.append(r >> 1)
        return sorted(seen)

    def support(self, lits: Iterable[int]) -> list[int]:
        """Input node ids the literals depend on."""
        left = self._left
        return [n for n in self.cone(lits) if left[n] == _INPUT]

    # -- evaluation ---------------------------------------------------------

    def simulate(
        self, lits: Iterable[int], patterns: Mapping[int, int], nbits: int = 1
    ) -> list[int]:
        """Bit-parallel evaluation: each input carries an ``nbits``-wide pattern."""
        lits = list(lits)
        mask = (1 << nbits) - 1
        left, right = self._left, self._right
        val: dict[int, int] = {0: 0}
        for node in self.cone(lits):
            l = left[node]
            if l == _INPUT:
                try:
                    val[node] = patterns[node] & mask
                except KeyError:
                    raise MissingVariable(node) from None
                continue
            r = right[node]
            a = val[l >> 1] ^ (mask if l & 1 else 0)
            b = val[r >> 1] ^ (mask if r & 1 else 0)
            val[node] = a & b
        return [val[lit >> 1] ^ (mask if lit & 1 else 0) for lit in lits]

    def evaluate(self, lits: Iterable[int], env: Mapping[int, bool]) -> list[bool]:
        patterns = {k: int(bool(v)) for k, v in env.items()}
        return [bool(v) for v in self.simulate(lits, patterns, 1)]

    def compose(self, lits: Iterable[int], mapping: Mapping[int, int]) -> list[int]:
        """Rebuild ``lits`` with input nodes replaced by literals from ``mapping``.

        Inputs absent from ``mapping`` are kept as they are.
        """
        lits = list(lits)
        left, right = self._left, self._right
        new: dict[int, int] = {0: FALSE}
        for node in self.cone(lits):
            l = left[node]
            if l == _INPUT:
                new[node] = mapping.get(node, node << 1)
                continue
            r = right[node]
            new[node] = self.and_(new[l >> 1] ^ (l & 1), new[r >> 1] ^ (r & 1))
        return [new[lit >> 1] ^ (lit & 1) for lit in lits]


_stack: list[Aig] = [Aig()]


def current_aig() -> Aig:
    return _stack[-1]


@contextlib.contextmanager
def aig_scope(aig: Aig | None = None) -> Iterator[Aig]:
    """Install a fresh (or given) store for the duration of the block.

    Values built inside the block must not escape it.
    """
    aig = aig or Aig()
    _stack.append(aig)
    try:
        yield aig
    finally:
        _stack.pop()
