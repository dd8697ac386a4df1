"""Variant queries, legal-instance search and the fixed-sequence precheck.

A query names an instruction variant, pins some operand registers and
lists the fields that should stay symbolic. ``find_legal_instance`` asks
the solver for byte strings that decode without an exception;
``generalize_instance`` turns the answer back into a symbolic instruction
and checks that every filling is still legal; ``check_fixed_uop_sequence``
makes sure the translator emits the same uop skeleton for all fillings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from ..bitvec import BitVec, and1, bv_eq, bv_eval, concat_all, support
from ..design.decoder import dut_decode
from ..design.xlate import dut_xlate, map_xlate, skeleton_of, static_sequence, sv_xlate
from ..isa.catalog import (
    DX_NONE,
    EVEX,
    MAP_0F,
    MAP_0F38,
    MAP_0F3A,
    MAP_1BYTE,
    SIZE_CODES,
    VARIANTS,
    InstListEntry,
    lookup,
)
from ..isa.instruction import FIELD_WIDTHS as _INSTR_FIELDS
from ..isa.instruction import Instruction
from ..sat import Budget, check_goal, prove_equal

LEGACY_PREFIX_BYTES = {"LOCK": 0xF0, "66": 0x66, "REP": 0xF3, "REPNE": 0xF2}


class PrecheckError(RuntimeError):
    """A precheck failed; the symbolic run must not be attempted."""


@dataclass(frozen=True)
class VariantQuery:
    vid: str
    mnemonic: str
    form: str
    size: int
    indices: tuple[tuple[str, int], ...] = ()  # (OPn, register index)
    symbolic: tuple[str, ...] = ("imm",)
    prefixes: tuple[str, ...] = ()  # extra legacy prefixes to force into the bytes
    mode: int = 64

    @property
    def entry(self) -> InstListEntry:
        return lookup(self.mnemonic, self.form)

    @property
    def label(self) -> str:
        return self.vid


def default_query(vid: str) -> VariantQuery:
    """The standard query for a named variant."""
    v = VARIANTS[vid]
    if v.mnemonic == "VPSHRDQ":
        return VariantQuery(vid, v.mnemonic, v.form, v.size,
                            (("OP1", 1), ("OP2", 2), ("OP3", 3)), ("imm", "opmask", "zmask"))
    symbolic = ("imm",) if v.form.endswith("Ib") else ()
    return VariantQuery(vid, v.mnemonic, v.form, v.size, (("OP1", 1), ("OP2", 2)), symbolic)


# -- byte templates -----------------------------------------------------------------


@dataclass
class ByteTemplate:
    """Instruction bytes, some of them free, with field locations."""

    code: list[BitVec]
    fields: dict[str, tuple[int, int, int]] = field(default_factory=dict)  # name -> (byte, lo bit, width)

    def field_value(self, name: str) -> BitVec:
        pos, lo, w = self.fields[name]
        return self.code[pos].slice(lo, lo + w - 1)

    def concrete(self, env: dict[int, bool]) -> list[int]:
        return [_eval_default(b, env) for b in self.code]


def _eval_default(v: BitVec, env: dict[int, bool]) -> int:
    full = {n: env.get(n, False) for n in support(v)}
    return bv_eval(v, full)


def _free_byte(name: str, fixed: dict[int, int] | None = None) -> BitVec:
    """Eight bits, free except for the ``fixed`` bit positions."""
    fixed = fixed or {}
    bits = []
    for i in range(8):
        if i in fixed:
            bits.append(BitVec.const(1, fixed[i]))
        else:
            bits.append(BitVec.var(1, f"{name}.{i}"))
    return concat_all(bits)


def byte_template(q: VariantQuery) -> ByteTemplate:
    e = q.entry
    code: list[BitVec] = [BitVec.const(8, LEGACY_PREFIX_BYTES[p]) for p in q.prefixes]
    t = ByteTemplate(code)
    if e.encoding == EVEX:
        mm = {MAP_0F: 1, MAP_0F38: 2, MAP_0F3A: 3}[e.opcode_map]
        code.append(BitVec.const(8, 0x62))
        code.append(_free_byte("P0", {0: mm & 1, 1: mm >> 1}))
        code.append(_free_byte("P1"))
        code.append(_free_byte("P2"))
        p2 = len(code) - 1
        t.fields.update(opmask=(p2, 0, 3), zmask=(p2, 7, 1))
        t.fields["opcode"] = (len(code), 0, 8)
        code.append(BitVec.const(8, e.opcode))
        code.append(_free_byte("ModRM"))
        if e.imm_bytes:
            t.fields["imm"] = (len(code), 0, 8)
            code.append(_free_byte("imm"))
        return t
    code.append(_free_byte("REX", {4: 0, 5: 0, 6: 1, 7: 0}))
    if e.opcode_map != MAP_1BYTE:
        code.append(BitVec.const(8, 0x0F))
        if e.opcode_map in (MAP_0F38, MAP_0F3A):
            code.append(BitVec.const(8, 0x38 if e.opcode_map == MAP_0F38 else 0x3A))
    t.fields["opcode"] = (len(code), 0, 8)
    code.append(BitVec.const(8, e.opcode))
    code.append(_free_byte("ModRM"))
    if e.imm_bytes:
        t.fields["imm"] = (len(code), 0, 8)
        code.append(_free_byte("imm"))
    return t


def _wanted(q: VariantQuery, instr: Instruction) -> BitVec:
    """Decoded fields agree with what the query pins down."""
    e = q.entry
    conds = [bv_eq(instr.entry, BitVec.const(5, e.uid)),
             bv_eq(instr.size, BitVec.const(2, SIZE_CODES[q.size]))]
    slot = {"ModRM.reg": "reg", "ModRM.rm": "rm", "EVEX.vvvv": "vvvv"}
    for opname, idx in q.indices:
        src = e.operand(opname).source
        if src in slot:
            conds.append(bv_eq(getattr(instr, slot[src]), BitVec.const(5, idx)))
    return and1(*conds)


def _legal(q: VariantQuery, code: list[BitVec]) -> BitVec:
    dec = dut_decode(code)
    ok = bv_eq(dec.dx, BitVec.const(3, DX_NONE))
    return and1(ok, _wanted(q, dec.fields_))


@dataclass
class Instance:
    query: VariantQuery
    code: list[int]
    instr: Instruction


def find_legal_instance(q: VariantQuery, budget: Budget | None = None, seed: int = 0) -> Optional[Instance]:
    """A concrete exception-free instance of ``q``, or None when the query is inconsistent."""
    t = byte_template(q)
    res = check_goal(_legal(q, t.code), budget, seed)
    if res.verdict == "timeout":
        raise TimeoutError(f"{q.vid}: legal-instance search timed out")
    if not res.is_sat:
        return None
    code = t.concrete(res.model)
    dec = dut_decode(code)
    assert dec.instr is not None
    return Instance(q, code, dec.instr)


# Decode-time exception conditions expressible over instruction fields alone.
FIELD_CONDITIONS: dict[str, Callable[[dict[str, BitVec]], BitVec]] = {
    "evex-zero-mask-k0": lambda f: and1(f["zmask"], bv_eq(f["opmask"], BitVec.const(3, 0))),
}


@dataclass
class Generalized:
    query: VariantQuery
    template: ByteTemplate
    instr: Instruction
    assumptions: list[BitVec]
    excluded: list[str]  # catalog conditions turned into assumptions


class GeneralizationError(RuntimeError):
    def __init__(self, msg: str, witness: list[int]):
        super().__init__(msg)
        self.witness = witness


def generalize_instance(inst: Instance, q: VariantQuery | None = None,
                        budget: Budget | None = None, seed: int = 0) -> Generalized:
    """Re-symbolize the query's fields and check every filling stays legal."""
    q = q or inst.query
    t = byte_template(q)
    code = [BitVec.const(8, b) for b in inst.code]
    if len(code) != len(t.code):
        raise ValueError("instance does not match the query template")
    sym = {}
    for name in q.symbolic:
        if name not in t.fields:
            raise ValueError(f"{q.vid}: no byte location for field {name}")
        pos, lo, w = t.fields[name]
        v = BitVec.var(w, f"gen.{name}")
        b = code[pos]
        parts = [b.slice(0, lo - 1)] if lo else []
        parts.append(v)
        if lo + w < 8:
            parts.append(b.slice(lo + w, 7))
        code[pos] = concat_all(parts)
        sym[name] = v
    gt = ByteTemplate(code, t.fields)
    values = {n: gt.field_value(n) for n in t.fields}
    excluded, assumptions = [], []
    for spec in q.entry.decode_exceptions():
        fn = FIELD_CONDITIONS.get(spec.condition)
        if fn is not None and all(n in sym for n in ("zmask", "opmask")):
            excluded.append(spec.condition)
            assumptions.append(~fn(values))
    instr = inst.instr.replace(**{n: v for n, v in sym.items() if n in dict(_INSTR_FIELDS)})
    dec = dut_decode(code)
    expect = concat_all([BitVec.const(3, DX_NONE), instr.pack()])
    res = prove_equal(dec.pack(), expect, assumptions, budget, seed, name=f"generalize {q.vid}")
    if not res.proved:
        if res.env is None:
            raise TimeoutError(f"{q.vid}: generalization check timed out")
        witness = gt.concrete(res.env)
        raise GeneralizationError(
            f"{q.vid}: generalizing {', '.join(q.symbolic)} admits " + bytes(witness).hex(" ").upper(),
            witness)
    return Generalized(q, gt, instr, assumptions, excluded)


# -- fixed uop sequence -------------------------------------------------------------


@dataclass
class SequenceCheck:
    ok: bool
    skeleton: Optional[list[str]] = None
    witnesses: list[list[str]] = field(default_factory=list)
    witness_instrs: list[str] = field(default_factory=list)
    detail: str = ""


def _concrete_instr(instr: Instruction, env: dict[int, bool]) -> Instruction:
    return Instruction.make(**{n: _eval_default(getattr(instr, n), env) for n, _ in _INSTR_FIELDS})


def _listing(instr: Instruction) -> list[str]:
    from ..design.rom import active_rom

    labels = active_rom().labels_by_addr
    return [u.text(labels) for u in static_sequence(dut_xlate(instr))]


def check_fixed_uop_sequence(g: Generalized, budget: Budget | None = None, seed: int = 0) -> SequenceCheck:
    """The translator skeleton must be one constant for every legal filling."""
    ports = sv_xlate(map_xlate(g.instr))
    skel = skeleton_of(ports)
    hyp = g.assumptions
    # a reference skeleton: the one at any legal filling
    found = check_goal(and1(*hyp) if hyp else BitVec.const(1, 1), budget, seed)
    env = found.model if found.is_sat else {}
    ref_instr = _concrete_instr(g.instr, env)
    ref = BitVec.const(skel.width, _eval_default(skel, env))
    res = prove_equal(skel, ref, hyp, budget, seed, name=f"fixed-sequence {g.query.vid}")
    if res.proved:
        return SequenceCheck(True, _listing(ref_instr))
    if res.env is None:
        return SequenceCheck(False, detail="timeout while checking the skeleton")
    other = _concrete_instr(g.instr, res.env)
    return SequenceCheck(
        False,
        witnesses=[_listing(ref_instr), _listing(other)],
        witness_instrs=[ref_instr.text(), other.text()],
        detail="translator skeleton depends on symbolic instruction fields",
    )


def prechecks(q: VariantQuery, budget: Budget | None = None, seed: int = 0) -> Generalized:
    """Legal instance, generalization and fixed skeleton; any failure raises PrecheckError."""
    inst = find_legal_instance(q, budget, seed)
    if inst is None:
        raise PrecheckError(f"{q.vid}: query is inconsistent (every filling raises a decode exception)")
    try:
        g = generalize_instance(inst, q, budget, seed)
    except GeneralizationError as e:
        raise PrecheckError(str(e)) from e
    sc = check_fixed_uop_sequence(g, budget, seed)
    if not sc.ok:
        raise PrecheckError(f"{q.vid}: {sc.detail}")
    return g
