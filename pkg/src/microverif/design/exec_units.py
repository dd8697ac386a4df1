"""Gate-level execution units.

Every (uop opcode, ssz, dsz) shape gets its own combinational netlist over
fresh input ports. ``dut_exec`` binds a uop's operand values to those
ports and reads the outputs back. The netlists are written directly in
AND/inverter gates and avoid the word-level helpers the uop semantics use:
subtraction is a carry-select adder, logical shifts are one-hot crossbars,
rotates and variable packed shifts are mux ladders that apply the largest
stage first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from ..aig import FALSE, TRUE, Aig, current_aig
from ..bitvec import BitVec
from ..isa.state import MachineConfig
from ..ucode.semantics import UopData, UopResults
from ..ucode.uop import PREDICATES, Uop
from .bugs import bug_enabled, enabled_bugs
from .ports import PortBinding

LATENCY = {
    "NOP": 1, "HALT": 1, "MOV": 1, "MOVSX": 1, "MOVZX": 1,
    "AND": 1, "OR": 1, "XOR": 1, "JE": 1,
    "SHR": 2, "SHL": 2, "ROR": 2,
    "DLSHFTCNT": 2, "PSRLQ": 2, "PSLLVQ": 2, "PORQ": 2,
    "SUB": 3,
}

LOGIC = ("AND", "OR", "XOR")
SHIFTS = ("SHR", "SHL", "ROR")
MOVES = ("MOV", "MOVSX", "MOVZX")


class MissingCircuit(KeyError):
    pass


Lits = list[int]


# -- gate helpers ---------------------------------------------------------------------


def _or(g: Aig, a: int, b: int) -> int:
    return g.and_(a ^ 1, b ^ 1) ^ 1


def _xor(g: Aig, a: int, b: int) -> int:
    return g.and_(_or(g, a, b), g.and_(a, b) ^ 1)


def _tree_or(g: Aig, xs: Sequence[int]) -> int:
    xs = list(xs)
    if not xs:
        return FALSE
    while len(xs) > 1:
        nxt = [_or(g, xs[i], xs[i + 1]) for i in range(0, len(xs) - 1, 2)]
        if len(xs) % 2:
            nxt.append(xs[-1])
        xs = nxt
    return xs[0]


def _sel(g: Aig, s: int, a: int, b: int) -> int:
    """s ? a : b as an AND/OR pair."""
    return _or(g, g.and_(s, a), g.and_(s ^ 1, b))


def _fit(bits: Lits, width: int) -> Lits:
    return list(bits[:width]) + [FALSE] * (width - len(bits))


def _full_add(g: Aig, a: int, b: int, c: int) -> tuple[int, int]:
    t = _xor(g, a, b)
    return _xor(g, t, c), _or(g, g.and_(a, b), g.and_(t, c))


def _carry_select_sub(g: Aig, a: Lits, b: Lits, block: int = 8) -> tuple[Lits, int]:
    """a - b as a + ~b + 1 with precomputed carry-in 0/1 sums per block."""
    nb = [x ^ 1 for x in b]
    out: Lits = []
    carry = TRUE
    for lo in range(0, len(a), block):
        hi = min(lo + block, len(a))
        res = {}
        for cin in (FALSE, TRUE):
            c, s = cin, []
            for i in range(lo, hi):
                bit, c = _full_add(g, a[i], nb[i], c)
                s.append(bit)
            res[cin] = (s, c)
        (s0, c0), (s1, c1) = res[FALSE], res[TRUE]
        out += [_sel(g, carry, x1, x0) for x0, x1 in zip(s0, s1)]
        carry = _sel(g, carry, c1, c0)
    return out, carry


def _onehot(g: Aig, count: Lits) -> Lits:
    """Line j is high iff count == j."""
    lines = []
    for j in range(1 << len(count)):
        terms = [c if (j >> i) & 1 else c ^ 1 for i, c in enumerate(count)]
        acc = TRUE
        for t in terms:
            acc = g.and_(acc, t)
        lines.append(acc)
    return lines


def _crossbar(g: Aig, v: Lits, lines: Lits, right: bool) -> Lits:
    n = len(v)
    out = []
    for i in range(n):
        terms = []
        for j, line in enumerate(lines):
            src = i + j if right else i - j
            if 0 <= src < n:
                terms.append(g.and_(line, v[src]))
        out.append(_tree_or(g, terms))
    return out


def _ladder(g: Aig, v: Lits, count: Lits, op: str) -> Lits:
    n = len(v)
    bits = list(v)
    for j in reversed(range(len(count))):
        k = 1 << j
        if op == "ROR":
            k %= n
            if k == 0:
                continue
            moved = bits[k:] + bits[:k]
        elif k >= n:
            moved = [FALSE] * n
        elif op == "SHR":
            moved = bits[k:] + [FALSE] * k
        else:
            moved = [FALSE] * k + bits[: n - k]
        bits = [_sel(g, count[j], m, o) for m, o in zip(moved, bits)]
    return bits


def _count_bits(width: int) -> int:
    return 6 if width == 64 else 5


# -- circuits -------------------------------------------------------------------------


@dataclass
class ExecCircuit:
    key: tuple[str, int, int]
    inputs: PortBinding
    outputs: PortBinding
    input_vec: BitVec  # the fresh input literals, in ``inputs`` order
    output_vec: BitVec
    latency: int

    @property
    def name(self) -> str:
        op, ssz, dsz = self.key
        return f"{op}@{ssz}->{dsz}"

    def evaluate(self, values: dict[str, BitVec]) -> dict[str, BitVec]:
        """Bind ``values`` to the input ports and return the output ports."""
        g = current_aig()
        bound = self.inputs.map(values)
        mapping = {lit >> 1: b for lit, b in zip(self.input_vec.bits, bound.bits)}
        return self.outputs.get(BitVec(g.compose(self.output_vec.bits, mapping)))

    def size(self) -> int:
        return len(current_aig().cone(self.output_vec.bits))


def input_widths(op: str, ssz: int, dsz: int) -> tuple[int, int]:
    """Widths of the a/b operand ports (0 when the port is absent)."""
    if op in MOVES or op == "DLSHFTCNT":
        return ssz, 0
    if op in SHIFTS or op == "PSRLQ":
        return ssz, 8
    return ssz, ssz


def _ports(op: str, ssz: int, dsz: int) -> tuple[PortBinding, PortBinding]:
    wa, wb = input_widths(op, ssz, dsz)
    ins = [("a", wa)]
    if wb:
        ins.append(("b", wb))
    ins += [("old", dsz), ("zf", 1), ("pred", 2)]
    if op == "PORQ":
        ins += [("kbits", dsz // 64), ("opmask", 3), ("maskmode", 1)]
    if op == "AND" and bug_enabled("exec-dontcare-src2"):
        ins.append(("dontcare", wb))
    outs = (("result", dsz), ("zf_we", 1), ("zf_out", 1), ("taken", 1))
    return PortBinding(f"{op}.in", tuple(ins)), PortBinding(f"{op}.out", outs)


def _build(key: tuple[str, int, int]) -> ExecCircuit:
    op, ssz, dsz = key
    if op not in LATENCY or op in ("NOP", "HALT"):
        raise MissingCircuit(f"no execution unit for {op}")
    g = current_aig()
    ins, outs = _ports(op, ssz, dsz)
    vec = ins.fresh(f"exec.{op}")
    p = {k: list(v.bits) for k, v in ins.get(vec).items()}
    a, old = p["a"], p["old"]
    b = p.get("b", [])
    zf_we = zf_out = taken = FALSE
    res: Lits

    if op == "MOV":
        res = _fit(a, dsz)
    elif op == "MOVZX":
        res = _fit(a, dsz)
    elif op == "MOVSX":
        res = a[:dsz] + [a[-1]] * max(0, dsz - len(a))
    elif op in LOGIC:
        bb = p["dontcare"] if "dontcare" in p else b
        if op == "AND":
            core = [g.and_(x, y) for x, y in zip(a, bb)]
        elif op == "OR":
            core = [_or(g, x, y) for x, y in zip(a, b)]
        else:
            core = [_xor(g, x, y) for x, y in zip(a, b)]
        res = _fit(core, dsz)
    elif op == "SUB":
        diff, _ = _carry_select_sub(g, a, b)
        res = _fit(diff, dsz)
        zf_out = _tree_or(g, res) ^ 1
        zf_we = TRUE
    elif op in ("SHR", "SHL"):
        v = _fit(a, dsz)
        lines = _onehot(g, b[: _count_bits(dsz)])
        res = _crossbar(g, v, lines, right=op == "SHR")
    elif op == "ROR":
        v = _fit(a, dsz)
        res = _ladder(g, v, b[: _count_bits(dsz)], "ROR")
    elif op == "JE":
        taken = _tree_or(g, [_xor(g, x, y) for x, y in zip(a, b)]) ^ 1
        res = list(old)
    elif op == "DLSHFTCNT":
        m = _fit(a, 6)
        below, neg = FALSE, []
        for x in m:
            neg.append(_xor(g, x, below))
            below = _or(g, below, x)
        lane = neg + [below ^ 1] + [FALSE] * 57
        res = _fit(lane * (dsz // 64), dsz)
    elif op == "PSRLQ":
        lines = _onehot(g, b[:6])
        res = []
        for lo in range(0, dsz, 64):
            res += _crossbar(g, _fit(a, dsz)[lo:lo + 64], lines, right=True)
    elif op == "PSLLVQ":
        v = _fit(a, dsz)
        res = []
        for lo in range(0, dsz, 64):
            cnt = b[lo:lo + 64]
            too_big = _tree_or(g, cnt[6:])
            shifted = _ladder(g, v[lo:lo + 64], cnt[:6], "SHL")
            res += [g.and_(x, too_big ^ 1) for x in shifted]
    elif op == "PORQ":
        k0 = _tree_or(g, p["opmask"]) ^ 1
        keep = p["maskmode"][0] ^ 1
        res = []
        for lane, lo in enumerate(range(0, dsz, 64)):
            act = _or(g, k0, p["kbits"][lane])
            for i in range(lo, lo + 64):
                merged = _or(g, a[i], b[i])
                res.append(_or(g, g.and_(act, merged), g.and_(g.and_(act ^ 1, keep), old[i])))
    else:  # pragma: no cover
        raise MissingCircuit(op)

    if op != "JE":
        pr = p["pred"]
        always = g.and_(pr[0] ^ 1, pr[1] ^ 1)
        on_zf = g.and_(pr[0], pr[1] ^ 1)
        on_nzf = g.and_(pr[0] ^ 1, pr[1])
        zf = p["zf"][0]
        fire = _or(g, always, _or(g, g.and_(on_zf, zf), g.and_(on_nzf, zf ^ 1)))
        res = [_sel(g, fire, r, o) for r, o in zip(res, old)]
        zf_we = g.and_(zf_we, fire)
    out = BitVec(res + [zf_we, zf_out, taken])
    return ExecCircuit(key, ins, outs, vec, out, LATENCY[op])


def get_circuit(key: tuple[str, int, int]) -> ExecCircuit:
    """The netlist for ``key`` in the current AIG store (built once per store and bug set)."""
    g = current_aig()
    cache = g.__dict__.setdefault("_exec_circuits", {})
    ck = (key, enabled_bugs())
    if ck not in cache:
        cache[ck] = _build(key)
    return cache[ck]


def build_exec_circuits(keys: Iterable[tuple[str, int, int]] | None = None) -> dict[tuple[str, int, int], ExecCircuit]:
    if keys is None:
        from ..prover.obligations import used_uop_shapes

        keys = used_uop_shapes()
    return {k: get_circuit(k) for k in keys}


def _fitv(v: Optional[BitVec], width: int) -> BitVec:
    if v is None:
        return BitVec.const(width, 0)
    return v.trunc(width) if v.width >= width else v.zext(width)


def map_exec(uop: Uop, data: UopData, circuit: ExecCircuit) -> dict[str, BitVec]:
    widths = dict(circuit.inputs.fields)
    vals = {
        "a": _fitv(data.src1, widths["a"]),
        "old": _fitv(data.old_dst, widths["old"]),
        "zf": data.zf,
        "pred": BitVec.const(2, PREDICATES.index(uop.predicate)),
    }
    if "b" in widths:
        vals["b"] = _fitv(data.src2, widths["b"])
    if "kbits" in widths:
        vals["kbits"] = _fitv(data.kbits, widths["kbits"])
        vals["opmask"] = uop.mask.opmask
        vals["maskmode"] = uop.mask.maskmode
    if "dontcare" in widths:
        vals["dontcare"] = BitVec.var(widths["dontcare"], "exec.dontcare")
    return vals


def get_results(uop: Uop, ports: dict[str, BitVec], zf: BitVec) -> UopResults:
    if uop.opcode == "JE":
        return UopResults(branch_taken=ports["taken"])
    flags = {}
    if uop.opcode == "SUB":
        we = ports["zf_we"]
        flags["ZF"] = (we & ports["zf_out"]) | (~we & zf)
    return UopResults(writes={uop.dst: ports["result"]}, flags=flags)


def dut_exec(uop: Uop, data: UopData, config: MachineConfig | None = None) -> UopResults:
    if uop.opcode in ("NOP", "HALT"):
        return UopResults()
    c = get_circuit((uop.opcode, uop.ssz, uop.dsz))
    return get_results(uop, c.evaluate(map_exec(uop, data, c)), data.zf)


# -- writeback scheduling ---------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleResult:
    ok: bool
    cycle: Optional[int] = None  # writeback cycle of the first collision
    pair: Optional[tuple[int, int]] = None  # indices of the colliding dispatches


def latency_of(item: Union[Uop, str, int]) -> int:
    if isinstance(item, int):
        if item < 1:
            raise ValueError("latency must be at least one cycle")
        return item
    op = item.opcode if isinstance(item, Uop) else item
    return LATENCY[op]


def check_dispatch_schedule(dispatches: Iterable[tuple[int, Union[Uop, str, int]]]) -> ScheduleResult:
    """Flag two dispatches that would use the writeback port in the same cycle."""
    seen: dict[int, int] = {}
    for i, (cycle, item) in enumerate(dispatches):
        wb = cycle + latency_of(item)
        if wb in seen:
            return ScheduleResult(False, wb, (seen[wb], i))
        seen[wb] = i
    return ScheduleResult(True)
