"""Proof obligations: decode, exec and xlate/ucode correctness goals.

Every obligation is a named goal builder. A builder receives an input
factory ``mk(width, name)``; while proving, the factory hands out fresh
AIG inputs, and during replay it hands out the constants a counterexample
assigned to those names, so the same code path produces both the symbolic
goal and the concrete re-run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..aig import aig_scope, current_aig
from ..bitvec import BitVec, and1, bv_eq, bv_mux, concat_all
from ..design.bugs import enabled_bugs
from ..design.decoder import BYTE_CLASS, C_OP, dut_decode
from ..design.exec_units import get_circuit, map_exec
from ..design.rom import SEQ_BRANCH, active_rom, assemble_row
from ..design.sequencer import expand_word
from ..design.xlate import xlate_rules
from ..isa.catalog import (
    DX_UD,
    EVEX,
    LEGACY,
    MAP_0F,
    MAP_0F38,
    MAP_0F3A,
    MAP_1BYTE,
    MAP_NAMES,
    SIZE_CODES,
    VARIANTS,
    catalog_opcodes,
    lookup,
)
from ..isa.decode import x86_decode
from ..isa.semantics import x86_exec
from ..isa.state import FLAG_NAMES, NUM_K, NUM_ZMM, GPR_NAMES, X86State
from ..sat import Budget, ProofResult, prove_equal
from ..ucode.model import UcodeState, run_ucode_model, extract_instr_results
from ..ucode.semantics import UopData, UopResults, uop_semantics
from ..ucode.uop import NUM_G, NUM_T, PREDICATES, SideParams, Uop, UopMask

Mk = Callable[[int, str], BitVec]

KINDS = ("decode", "exec", "xlate-ucode", "single-instruction")
DEFAULT_BUDGETS = {"decode": 60.0, "exec": 120.0, "xlate-ucode": 600.0, "single-instruction": 1800.0}


def symbolic_mk(width: int, name: str) -> BitVec:
    return BitVec.var(width, name)


@dataclass
class Goal:
    """Spec and DUT observations that must agree under the assumptions."""

    spec: dict[str, BitVec]
    dut: dict[str, BitVec]
    assumptions: list[BitVec] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.spec.keys() != self.dut.keys():
            raise ValueError("spec and DUT observe different locations")
        for k in self.spec:
            if self.spec[k].width != self.dut[k].width:
                raise ValueError(f"{k}: width {self.spec[k].width} vs {self.dut[k].width}")

    def keys(self) -> list[str]:
        return list(self.spec)

    def vectors(self) -> tuple[BitVec, BitVec]:
        ks = self.keys()
        return concat_all([self.spec[k] for k in ks]), concat_all([self.dut[k] for k in ks])


@dataclass(frozen=True)
class ProofObligation:
    name: str
    kind: str
    build: Callable[[Mk], Goal]
    budget: float
    variant: Optional[str] = None  # for xlate obligations
    shape: Optional[tuple[str, int, int]] = None  # for exec obligations

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown obligation kind {self.kind}")
        if self.budget <= 0:
            raise ValueError("budget must be positive")


# -- decode -----------------------------------------------------------------------------

PREFIX_SET = (("LOCK", 0xF0), ("66", 0x66), ("REP", 0xF3), ("REX", None))


def _prefix_subsets():
    for mask in range(1 << len(PREFIX_SET)):
        yield [PREFIX_SET[i] for i in range(len(PREFIX_SET)) if mask >> i & 1]


def _prefix_bytes(mk: Mk, subset, tag: str) -> list[BitVec]:
    out = []
    for name, byte in subset:
        if byte is None:  # REX with a free low nibble
            out.append(mk(4, f"{tag}.rex").concat(BitVec.const(4, 4)))
        else:
            out.append(BitVec.const(8, byte))
    return out


def _decode_pair(code: list[BitVec]) -> tuple[BitVec, BitVec]:
    return x86_decode(code).pack(), dut_decode(code).pack()


def _opcode_bytes(opmap: int, opcode: int) -> list[int]:
    esc = {MAP_1BYTE: [], MAP_0F: [0x0F], MAP_0F38: [0x0F, 0x38], MAP_0F3A: [0x0F, 0x3A]}[opmap]
    return esc + [opcode]


def _legacy_case(opmap: int, opcode: int, imm: bool) -> Callable[[Mk], Goal]:
    """All prefix subsets times every byte count up to one past the full length."""

    def build(mk: Mk) -> Goal:
        spec, dut, info = {}, {}, {}
        op = [BitVec.const(8, b) for b in _opcode_bytes(opmap, opcode)]
        for s, subset in enumerate(_prefix_subsets()):
            tag = f"p{s}"
            body = _prefix_bytes(mk, subset, tag) + op
            tail = [mk(8, f"{tag}.modrm")] + ([mk(8, f"{tag}.imm")] if imm else []) + [mk(8, f"{tag}.extra")]
            code = body + tail
            for n in range(1, len(code) + 1):
                key = f"{tag}.n{n}"
                spec[key], dut[key] = _decode_pair(code[:n])
                info[key] = code[:n]
        return Goal(spec, dut, info={"bytes": info})

    return build


def _evex_case(mm: int) -> Callable[[Mk], Goal]:
    def build(mk: Mk) -> Goal:
        spec, dut, info = {}, {}, {}
        for s, subset in enumerate(_prefix_subsets()):
            tag = f"p{s}"
            p0 = BitVec.const(2, mm).concat(mk(6, f"{tag}.P0hi"))
            code = _prefix_bytes(mk, subset, tag) + [BitVec.const(8, 0x62), p0]
            code += [mk(8, f"{tag}.{n}") for n in ("P1", "P2", "opcode", "modrm", "imm", "extra")]
            for n in range(1, len(code) + 1):
                key = f"{tag}.n{n}"
                spec[key], dut[key] = _decode_pair(code[:n])
                info[key] = code[:n]
        return Goal(spec, dut, info={"bytes": info})

    return build


def _absent_opcodes() -> list[tuple[int, int]]:
    present = {(m, o) for enc, m, o in catalog_opcodes() if enc == LEGACY}
    out = []
    for b in range(256):
        if BYTE_CLASS[b] == C_OP and (MAP_1BYTE, b) not in present:
            out.append((MAP_1BYTE, b))
    for m in (MAP_0F, MAP_0F38, MAP_0F3A):
        out += [(m, b) for b in range(256) if (m, b) not in present]
    return [p for p in out if not (p[0] == MAP_0F and p[1] in (0x38, 0x3A))]


def _no_match(mk: Mk) -> Goal:
    """Opcodes outside the catalog and unused EVEX maps raise #UD on both sides."""
    spec, dut, info = {}, {}, {}
    for m, op in _absent_opcodes():
        key = f"{MAP_NAMES[m] or '1B'}_{op:02X}"
        code = [BitVec.const(8, b) for b in _opcode_bytes(m, op)] + [mk(8, f"{key}.{i}") for i in range(3)]
        spec[key], dut[key] = _decode_pair(code)
        info[key] = code
    for mm in range(3):
        key = f"EVEX.mm{mm}"
        p0 = BitVec.const(2, mm).concat(mk(6, f"{key}.P0hi"))
        code = [BitVec.const(8, 0x62), p0] + [mk(8, f"{key}.{i}") for i in range(5)]
        spec[key], dut[key] = _decode_pair(code)
        info[key] = code
    return Goal(spec, dut, info={"bytes": info})


def _ud_pair(code: list[BitVec]) -> tuple[BitVec, BitVec]:
    """(spec dx, DUT dx) next to the constant #UD pair they must both equal."""
    s, d = x86_decode(code).dx, dut_decode(code).dx
    return s.concat(d), BitVec.const(3, DX_UD).concat(BitVec.const(3, DX_UD))


def _lock_ud(mk: Mk) -> Goal:
    """LOCK on the shifts and on register-destination ALU forms is #UD."""
    spec, dut, info = {}, {}, {}
    cases = [(lookup("SHRD", "Ev, Gv, Ib"), None), (lookup("SHRD", "Ev, Gv, CL"), None)]
    cases += [(lookup(m), 3) for m in ("ADD", "OR", "AND", "SUB", "XOR")]
    for e, mod in cases:
        for rex in (False, True):
            key = f"{e.mnemonic}.{e.opcode_text}{'.rex' if rex else ''}"
            code = [BitVec.const(8, 0xF0)]
            if rex:
                code.append(mk(4, f"{key}.rex").concat(BitVec.const(4, 4)))
            code += [BitVec.const(8, b) for b in _opcode_bytes(e.opcode_map, e.opcode)]
            modrm = mk(8, f"{key}.modrm") if mod is None else mk(6, f"{key}.modrm").concat(BitVec.const(2, mod))
            code.append(modrm)
            if e.imm_bytes:
                code.append(mk(8, f"{key}.imm"))
            # dut side carries both decoders, spec side the required constant
            got, want = _ud_pair(code)
            spec[key], dut[key] = want, got
            info[key] = code
    return Goal(spec, dut, info={"bytes": info})


def _evex_zero_mask_k0(mk: Mk) -> Goal:
    """EVEX.z set with opmask k0 is #UD for VPSHRDQ."""
    e = lookup("VPSHRDQ")
    p0 = BitVec.const(2, 3).concat(mk(6, "P0hi"))
    p2 = BitVec.const(3, 0).concat(mk(4, "P2mid")).concat(BitVec.const(1, 1))
    code = [BitVec.const(8, 0x62), p0, mk(8, "P1"), p2, BitVec.const(8, e.opcode), mk(8, "modrm"), mk(8, "imm")]
    got, want = _ud_pair(code)
    return Goal({"evex": want}, {"evex": got}, info={"bytes": {"evex": code}})


def decode_obligations() -> list[ProofObligation]:
    out = []
    seen = set()
    for enc, m, op in sorted(catalog_opcodes()):
        if enc == EVEX:
            name = f"decode/EVEX.{MAP_NAMES[m]}_{op:02X}"
            build = _evex_case({MAP_0F: 1, MAP_0F38: 2, MAP_0F3A: 3}[m])
        else:
            name = "decode/" + "_".join(f"{b:02X}" for b in _opcode_bytes(m, op))
            imm = any(e.imm_bytes for e in _entries(enc, m, op))
            build = _legacy_case(m, op, imm)
        if name in seen:
            continue
        seen.add(name)
        out.append(ProofObligation(name, "decode", build, DEFAULT_BUDGETS["decode"]))
    out.append(ProofObligation("decode/no-match", "decode", _no_match, DEFAULT_BUDGETS["decode"]))
    out.append(ProofObligation("decode/lock-ud", "decode", _lock_ud, DEFAULT_BUDGETS["decode"]))
    out.append(ProofObligation("decode/evex-zero-mask-k0", "decode", _evex_zero_mask_k0,
                               DEFAULT_BUDGETS["decode"]))
    return out


def _entries(enc, m, op):
    from ..isa.catalog import entries_for

    return entries_for(enc, m, op)


# -- exec -------------------------------------------------------------------------------


def _side() -> SideParams:
    return SideParams(args=tuple(BitVec.const(5, i + 1) for i in range(3)))


def _rule_words(rule) -> list:
    rom = active_rom()
    words = [assemble_row(r, rom.labels) for r in rule.prelude]
    starts = [rule.trap] if isinstance(rule.trap, str) else []
    seen = set()
    while starts:
        s = starts.pop()
        addr = rom.address(s) if isinstance(s, str) else s
        if addr in seen:
            continue
        seen.add(addr)
        for _, w in rom.routine(addr):
            words.append(w)
            if w.seq == SEQ_BRANCH:
                starts.append(w.target)
    return words


def shapes_for_rule(rule) -> list[tuple[str, int, int]]:
    out = []
    for w in _rule_words(rule):
        u = expand_word(w, _side())
        key = (u.opcode, u.ssz, u.dsz)
        if u.opcode not in ("NOP", "HALT") and key not in out:
            out.append(key)
    return out


def rule_for_variant(vid: str):
    v = VARIANTS[vid]
    uid = lookup(v.mnemonic, v.form).uid
    for rule in xlate_rules():
        if rule.entry == uid and rule.size == SIZE_CODES[v.size]:
            return rule
    raise KeyError(f"no translator rule for {vid}")


def used_uop_shapes() -> list[tuple[str, int, int]]:
    """(opcode, ssz, dsz) of every uop the translator table can reach."""
    out = []
    for rule in xlate_rules():
        for k in shapes_for_rule(rule):
            if k not in out:
                out.append(k)
    return out


def exec_name(key: tuple[str, int, int]) -> str:
    op, ssz, dsz = key
    return f"exec/{op}@{ssz}->{dsz}"


def _exec_build(key: tuple[str, int, int]) -> Callable[[Mk], Goal]:
    op, ssz, dsz = key

    def build(mk: Mk) -> Goal:
        c = get_circuit(key)
        widths = dict(c.inputs.fields)
        src1 = mk(widths["a"], "a")
        src2 = mk(widths["b"], "b") if "b" in widths else None
        old = mk(dsz, "old")
        zf = mk(1, "zf")
        kbits = mk(dsz // 64, "kbits") if op == "PORQ" else None
        mask = UopMask(mk(1, "maskmode"), mk(3, "opmask")) if op == "PORQ" else None
        data = UopData(src1, src2, old, zf, kbits)
        target = 0 if op == "JE" else None
        preds = ("none",) if op == "JE" else PREDICATES
        pred = mk(2, "pred") if op != "JE" else BitVec.const(2, 0)

        def uop(p: str) -> Uop:
            return Uop(op, "T0", "T1", "T2" if src2 is not None else None, predicate=p,
                       ssz=ssz, dsz=dsz, mask=mask, target=target)

        def observe(r: UopResults) -> dict[str, BitVec]:
            obs = {"zf": r.flags.get("ZF", zf)}
            if op == "JE":
                obs["taken"] = r.branch_taken
            else:
                obs["result"] = r.writes["T0"]
            return obs

        spec = observe(uop_semantics(uop("none"), data))
        for i, p in enumerate(preds[1:], start=1):
            alt = observe(uop_semantics(uop(p), data))
            hit = bv_eq(pred, BitVec.const(2, i))
            spec = {k: bv_mux(hit, alt[k], spec[k]) for k in spec}
        # the DUT sees the predicate as a port value, not per-uop
        vals = map_exec(uop("none"), data, c)
        vals["pred"] = pred
        ports = c.evaluate(vals)
        dut = {"zf": bv_mux(ports["zf_we"], ports["zf_out"], zf)}
        if op == "JE":
            dut["taken"] = ports["taken"]
        else:
            dut["result"] = ports["result"]
        assumptions = [] if op == "JE" else [~bv_eq(pred, BitVec.const(2, 3))]
        return Goal(spec, dut, assumptions)

    return build


def exec_obligations(keys=None) -> list[ProofObligation]:
    keys = keys if keys is not None else used_uop_shapes()
    return [ProofObligation(exec_name(k), "exec", _exec_build(k), DEFAULT_BUDGETS["exec"], shape=k)
            for k in keys]


# -- xlate / ucode ----------------------------------------------------------------------


def symbolic_state(mk: Mk, prefix: str = "s") -> X86State:
    return X86State(
        gpr=tuple(mk(64, f"{prefix}.{n}") for n in GPR_NAMES),
        zmm=tuple(mk(512, f"{prefix}.ZMM{i}") for i in range(NUM_ZMM)),
        k=tuple(mk(64, f"{prefix}.K{i}") for i in range(NUM_K)),
        flags=tuple(mk(1, f"{prefix}.{n}") for n in FLAG_NAMES),
    )


def _internals(mk: Mk, pc, state: X86State) -> UcodeState:
    return UcodeState(
        pc, state,
        g=tuple(mk(64, f"u.G{i}") for i in range(NUM_G)),
        t=tuple(mk(256, f"u.T{i}") for i in range(NUM_T)),
        zf=mk(1, "u.ZF"),
    )


def xlate_goal(instr, state: X86State, ucode_state: UcodeState, assumptions: list[BitVec],
               exec_fn=uop_semantics) -> Goal:
    """x86_exec against the finished micro-program on the architectural registers."""
    ref = x86_exec(instr, state)
    got = extract_instr_results(run_ucode_model(ucode_state, exec_fn))
    if ref.ex is not None or got.ex is not None:
        raise ValueError("execute-time exceptions are outside the modelled subset")
    locs = [loc for loc in ref.rslts if loc not in FLAG_NAMES]
    locs += [loc for loc in got.rslts if loc not in locs]
    spec = {"ex": BitVec.const(1, 0)}
    dut = {"ex": BitVec.const(1, 0)}  # both sides raise nothing at execute time
    for loc in locs:
        spec[loc] = ref.rslts.get(loc, state.read(loc))
        dut[loc] = got.rslts.get(loc, state.read(loc))
    return Goal(spec, dut, assumptions)


def _xlate_build(q) -> Callable[[Mk], Goal]:
    from ..design.xlate import dut_xlate
    from .queries import prechecks

    def build(mk: Mk) -> Goal:
        g = prechecks(q)
        sym = {n: mk(getattr(g.instr, n).width, f"gen.{n}") for n in g.query.symbolic}
        instr = g.instr.replace(**sym)
        hyp = []
        if "evex-zero-mask-k0" in g.excluded:
            hyp.append(~and1(instr.zmask, bv_eq(instr.opmask, BitVec.const(3, 0))))
        state = symbolic_state(mk)
        u = _internals(mk, dut_xlate(instr), state)
        goal = xlate_goal(instr, state, u, hyp)
        goal.info["instr"] = instr
        goal.info["state"] = state
        return goal

    return build


def xlate_obligation(q) -> ProofObligation:
    budget = 1800.0 if q.size == 512 else DEFAULT_BUDGETS["xlate-ucode"]
    return ProofObligation(f"xlate/{q.vid}", "xlate-ucode", _xlate_build(q), budget, variant=q.vid)


def xlate_obligations() -> list[ProofObligation]:
    from .queries import default_query

    return [xlate_obligation(default_query(vid)) for vid in VARIANTS]


def prove_xlate_ucode_correctness(q, seed: int = 0, external: str | None = None) -> ProofResult:
    """Prechecks, then the symbolic run; a failed precheck raises before any solving."""
    from .queries import prechecks

    with aig_scope():
        prechecks(q)
    return run_obligation(xlate_obligation(q), seed, external)


# -- registry and running ---------------------------------------------------------------


def all_obligations() -> list[ProofObligation]:
    return decode_obligations() + exec_obligations() + xlate_obligations()


def registry() -> dict[str, ProofObligation]:
    return {o.name: o for o in all_obligations()}


def select(selector: str, kind: str | None = None) -> list[ProofObligation]:
    """Obligations whose name matches ``selector`` (exact, prefix, or ``all``)."""
    obs = [o for o in all_obligations() if kind is None or o.kind == kind]
    if selector in ("all", "*", ""):
        return obs
    exact = [o for o in obs if o.name == selector or o.name.split("/", 1)[1] == selector]
    if exact:
        return exact
    return [o for o in obs if o.name.split("/", 1)[1].startswith(selector)]


def run_obligation(ob: ProofObligation, seed: int = 0, external: str | None = None,
                   budget: float | None = None, replay: bool = True) -> ProofResult:
    """Build the goal in a fresh AIG store and discharge it."""
    from .replay import replay_counterexample

    with aig_scope():
        t0 = time.perf_counter()
        goal = ob.build(symbolic_mk)
        a, b = goal.vectors()
        res = prove_equal(a, b, goal.assumptions, Budget(budget or ob.budget), seed, name=ob.name,
                          external=external)
        res.stats["build_seconds"] = round(time.perf_counter() - t0 - res.stats.get("seconds", 0.0), 3)
        res.stats["aig_nodes"] = len(current_aig())
        res.stats["bugs"] = sorted(enabled_bugs())
        if res.verdict == "counterexample":
            names = named_env(res.env)
            res.env = None  # node ids are meaningless outside this store
            res.replay = {"names": names}
    if res.verdict == "counterexample" and replay:
        report = replay_counterexample(ob, res.replay["names"])
        res.replay.update(report=report)
        res.detail = report.summary()
    return res


def named_env(env: dict[int, bool]) -> dict[str, bool]:
    aig = current_aig()
    return {aig.input_name(n): v for n, v in env.items() if aig.input_name(n)}


def case_counts() -> dict[str, int]:
    """Number of sub-cases per decode obligation (for reports)."""
    out = {}
    for ob in decode_obligations():
        with aig_scope():
            out[ob.name] = len(ob.build(symbolic_mk).spec)
    return out


__all__ = [
    "DEFAULT_BUDGETS",
    "Goal",
    "KINDS",
    "ProofObligation",
    "all_obligations",
    "case_counts",
    "decode_obligations",
    "exec_name",
    "exec_obligations",
    "named_env",
    "registry",
    "rule_for_variant",
    "run_obligation",
    "select",
    "shapes_for_rule",
    "symbolic_mk",
    "symbolic_state",
    "used_uop_shapes",
    "xlate_goal",
    "prove_xlate_ucode_correctness",
    "xlate_obligation",
    "xlate_obligations",
]
