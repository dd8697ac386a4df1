"""Single-instruction correctness from the component lemmas.

The decode lemma says the DUT decoder agrees with the ISA decoder on the
variant's bytes, the exec lemmas say every execution unit the
micro-program touches agrees with its uop semantics, and the xlate/ucode
lemma says the micro-program computed with uop semantics agrees with the
ISA step. Chaining them gives ``rtl_step = x86_step`` for the variant. The
certificate records which lemmas were used, and a batch of concrete
``rtl_step`` runs is compared against ``x86_step`` as a sanity check.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from ..aig import aig_scope
from ..design.decoder import dut_decode
from ..design.exec_units import dut_exec
from ..design.xlate import dut_xlate
from ..isa.catalog import EVEX, MAP_NAMES
from ..isa.decode import encode_instruction
from ..isa.instruction import DecodeResult
from ..isa.semantics import ExecResult, x86_step
from ..isa.state import FLAG_NAMES, X86State
from ..sat import ProofResult
from ..ucode.model import UcodeState, extract_instr_results, run_ucode_model
from .obligations import exec_name, registry, rule_for_variant, run_obligation, shapes_for_rule
from .queries import VariantQuery, default_query, prechecks


class MissingDependency(RuntimeError):
    def __init__(self, name: str, verdict: str):
        super().__init__(f"lemma {name} is not proved ({verdict})")
        self.name = name
        self.verdict = verdict


def rtl_step(code: Sequence, state: X86State) -> tuple[DecodeResult, Optional[ExecResult]]:
    """Decode, translate and run the micro-program on the execution units."""
    dec = dut_decode(code, state.config)
    instr = dec.instr
    if instr is None:
        return dec, None
    u = UcodeState.initial(dut_xlate(instr, state.config), state)
    return dec, extract_instr_results(run_ucode_model(u, dut_exec))


def decode_lemmas(q: VariantQuery) -> list[str]:
    e = q.entry
    if e.encoding == EVEX:
        names = [f"decode/EVEX.{MAP_NAMES[e.opcode_map]}_{e.opcode:02X}"]
        if any(x.condition == "evex-zero-mask-k0" for x in e.decode_exceptions()):
            names.append("decode/evex-zero-mask-k0")
        return names
    esc = {0: "", 1: "0F_", 2: "0F_38_", 3: "0F_3A_"}[e.opcode_map]
    names = [f"decode/{esc}{e.opcode:02X}"]
    if any(x.condition.startswith("lock-prefix") for x in e.decode_exceptions()):
        names.append("decode/lock-ud")
    return names


def dependencies(q: VariantQuery) -> dict[str, list[str]]:
    shapes = shapes_for_rule(rule_for_variant(q.vid))
    return {
        "decode": decode_lemmas(q),
        "exec": [exec_name(k) for k in shapes],
        "xlate-ucode": [f"xlate/{q.vid}"],
    }


@dataclass
class Certificate:
    variant: str
    lemmas: dict[str, list[tuple[str, str, float]]]  # kind -> (name, verdict, seconds)
    assumptions: list[str] = field(default_factory=list)
    spot_checks: int = 0
    skeleton: list[str] = field(default_factory=list)

    @property
    def lemma_names(self) -> list[str]:
        return [n for group in self.lemmas.values() for n, _, _ in group]

    def lines(self) -> list[str]:
        out = [f"certificate: {self.variant}", "statement: x86_step(bytes, state) = rtl_step(bytes, state)"]
        for kind, group in self.lemmas.items():
            out.append(f"{kind}-lemmas: {len(group)}")
            out += [f"  {n}: {v} {s:.2f}s" for n, v, s in group]
        out += [f"assumption: {a}" for a in self.assumptions]
        out.append(f"spot-checks: {self.spot_checks} concrete rtl_step runs match x86_step")
        return out

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"


def _random_state(rng: random.Random) -> X86State:
    base = X86State()
    from ..bitvec import BitVec

    return X86State(
        gpr=tuple(BitVec.const(64, rng.getrandbits(64)) for _ in base.gpr),
        zmm=tuple(BitVec.const(512, rng.getrandbits(512)) for _ in base.zmm),
        k=tuple(BitVec.const(64, rng.getrandbits(64)) for _ in base.k),
    )


def _spot_check(q: VariantQuery, instr, n: int, seed: int) -> int:
    rng = random.Random(seed)
    done = 0
    for _ in range(n):
        with aig_scope():
            fill = {}
            for f in q.symbolic:
                width = getattr(instr, f).width
                fill[f] = rng.getrandbits(width)
            if fill.get("zmask") and fill.get("opmask") == 0:
                fill["opmask"] = 1
            concrete = instr.replace(**fill)
            code = list(encode_instruction(concrete))
            state = _random_state(rng)
            want_dec, want = x86_step(code, state)
            got_dec, got = rtl_step(code, state)
            if want_dec.pack().value != got_dec.pack().value:
                raise AssertionError(f"{q.vid}: decode mismatch on {bytes(code).hex(' ')}")
            for loc, v in want.rslts.items():
                if loc in FLAG_NAMES:
                    continue
                if got.rslts.get(loc, state.read(loc)).value != v.value:
                    raise AssertionError(f"{q.vid}: {loc} mismatch on {bytes(code).hex(' ')}")
            done += 1
    return done


def prove_single_instruction(
    q: VariantQuery | str,
    results: Mapping[str, ProofResult] | None = None,
    spot_checks: int = 8,
    seed: int = 0,
    external: str | None = None,
) -> Certificate:
    """Compose the component lemmas for ``q``.

    Lemmas missing from ``results`` are run here. Any lemma that is not
    proved stops the composition with MissingDependency.
    """
    if isinstance(q, str):
        q = default_query(q)
    results = dict(results or {})
    reg = registry()
    deps = dependencies(q)
    lemmas: dict[str, list[tuple[str, str, float]]] = {}
    for kind, names in deps.items():
        group = []
        for name in names:
            res = results.get(name)
            if res is None:
                res = run_obligation(reg[name], seed, external)
                results[name] = res
            if not res.proved:
                raise MissingDependency(name, res.verdict)
            group.append((name, res.verdict, float(res.stats.get("seconds", 0.0))))
        lemmas[kind] = group
    with aig_scope():
        g = prechecks(q)
        instr = g.instr
        assumptions = [f"not {c} (discharged by decode/{c})" for c in g.excluded]
        checked = _spot_check(q, instr, spot_checks, seed)
    return Certificate(q.vid, lemmas, assumptions, checked)
