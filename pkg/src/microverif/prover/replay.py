"""Concrete replay of counterexamples outside the solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from ..aig import aig_scope, current_aig
from ..bitvec import BitVec, support
from ..design.decoder import dut_decode
from ..isa.catalog import DX_NAMES
from ..isa.decode import x86_decode
from ..sat import ProofResult, ReplayFailure


class NothingToReplay(ValueError):
    """Replay was asked for a result that carries no counterexample."""


def concrete_mk(env: Mapping[str, bool]):
    """Input factory handing out the constants ``env`` assigns (missing bits are 0)."""

    def mk(width: int, name: str) -> BitVec:
        v = 0
        for i in range(width):
            if env.get(f"{name}[{i}]", False):
                v |= 1 << i
        return BitVec.const(width, v)

    return mk


def _value(v: BitVec, env: Mapping[str, bool]) -> int:
    """Concrete value; leftover free inputs (internal don't-cares) take their named values."""
    if v.value is not None:
        return v.value
    aig = current_aig()
    nodes = support(v)
    vals = {n: env.get(aig.input_name(n), False) for n in nodes}
    return int(sum(1 << i for i, b in enumerate(aig.evaluate(v.bits, vals)) if b))


@dataclass
class Divergence:
    key: str
    spec: int
    dut: int
    width: int

    def text(self) -> str:
        digits = max(1, (self.width + 3) // 4)
        return f"{self.key}: spec=0x{self.spec:0{digits}X} dut=0x{self.dut:0{digits}X}"


@dataclass
class DivergenceReport:
    obligation: str
    kind: str
    divergences: list[Divergence]
    assumptions_hold: bool
    details: dict = field(default_factory=dict)

    @property
    def first(self) -> Optional[Divergence]:
        return self.divergences[0] if self.divergences else None

    @property
    def reproduced(self) -> bool:
        return bool(self.divergences) and self.assumptions_hold

    def summary(self) -> str:
        if not self.first:
            return "no divergence"
        extra = self.details.get("note")
        return self.first.key + (f" ({extra})" if extra else "")

    def lines(self) -> list[str]:
        out = [f"obligation: {self.obligation}", f"kind: {self.kind}",
               f"reproduced: {'yes' if self.reproduced else 'no'}"]
        for k, v in self.details.items():
            out.append(f"{k}: {v}")
        out += ["diverges: " + d.text() for d in self.divergences]
        return out

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"


def _decode_details(code: list[BitVec]) -> dict:
    vals = [b.value for b in code]
    with aig_scope():
        s = x86_decode(vals).dx.value
        d = dut_decode(vals).dx.value
    return {
        "bytes": " ".join(f"{b:02X}" for b in vals),
        "spec dx": DX_NAMES[s] or "none",
        "dut dx": DX_NAMES[d] or "none",
    }


def _opmask_details(info: dict, div: Divergence) -> dict:
    """Which opmask bit was clear for a diverging vector lane."""
    instr, state = info["instr"], info["state"]
    k = instr.opmask.value
    if not div.key.startswith("ZMM") or k is None:
        return {}
    kreg = state.k[k].value
    lanes = [i for i in range(8) if (div.spec >> (64 * i) ^ div.dut >> (64 * i)) & (2**64 - 1)]
    cleared = [i for i in lanes if not (kreg >> i) & 1]
    out = {"opmask": f"K{k}=0x{kreg:X}", "zeroing": instr.zmask.value, "diverging lanes": lanes}
    if k and cleared:
        out["note"] = f"K{k} bit {cleared[0]} is clear but lane {cleared[0]} was written"
    return out


def replay_counterexample(obligation, env: Union[ProofResult, Mapping[str, bool], None]) -> DivergenceReport:
    """Re-run spec and DUT on the counterexample's concrete inputs.

    ``env`` maps AIG input names to values, or is the ProofResult that carried
    them. A result without a counterexample has nothing to replay.
    """
    if isinstance(env, ProofResult):
        if env.verdict != "counterexample" or not env.replay:
            raise NothingToReplay(f"{env.name or obligation.name}: verdict is {env.verdict}")
        env = env.replay["names"]
    if env is None:
        raise NothingToReplay(f"{obligation.name}: no counterexample")
    with aig_scope():
        goal = obligation.build(concrete_mk(env))
        hold = all(_value(a, env) == 1 for a in goal.assumptions)
        divs = []
        for k in goal.keys():
            s, d = _value(goal.spec[k], env), _value(goal.dut[k], env)
            if s != d:
                divs.append(Divergence(k, s, d, goal.spec[k].width))
        report = DivergenceReport(obligation.name, obligation.kind, divs, hold)
        if divs and "bytes" in goal.info:
            report.details.update(case=divs[0].key, **_decode_details(goal.info["bytes"][divs[0].key]))
        if divs and "instr" in goal.info:
            report.details["instruction"] = goal.info["instr"].text()
            report.details.update(_opmask_details(goal.info, divs[0]))
    if not report.reproduced:
        raise ReplayFailure(f"{obligation.name}: counterexample did not reproduce concretely")
    return report
