"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` (or ``python tests/test_acceptance.py``)
to see the verdict lines; they are also collected in ``acceptance_summary.txt``
next to this file's package root.
"""

import contextlib
import sys
import time
from pathlib import Path

import pytest

from microverif.cli import main
from microverif.design import bugs_injected
from microverif.isa import parse_hex_bytes, parse_state, x86_decode
from microverif.prover import (
    PrecheckError,
    check_fixed_uop_sequence,
    decode_obligations,
    default_query,
    exec_obligations,
    find_legal_instance,
    generalize_instance,
    prove_single_instruction,
    prove_xlate_ucode_correctness,
    registry,
    replay_counterexample,
    run_obligation,
    used_uop_shapes,
)
from microverif.ucode import run_xlate_ucode

import test_bitvec
import test_isa
import test_sat
from helpers import SPLIT_QUERY, split_variant

ROOT = Path(__file__).resolve().parents[1]
STATE = ROOT / "data" / "shrd_demo.state"
SHRD = "48 0F AC D1 10"
SUMMARY = ROOT / "acceptance_summary.txt"

_results = {}  # obligation name -> ProofResult, shared across criteria
_lines = {}


@pytest.fixture(scope="module", autouse=True)
def _summary():
    yield
    SUMMARY.write_text("".join(_lines[k] + "\n" for k in sorted(_lines)))


@contextlib.contextmanager
def criterion(n, title):
    t0 = time.perf_counter()
    status = "FAIL"
    try:
        yield
        status = "PASS"
    finally:
        line = f"ACCEPTANCE {n} {status}: {title} ({time.perf_counter() - t0:.1f}s)"
        _lines[n] = line
        print("\n" + line, file=sys.__stdout__, flush=True)


def _run(name):
    if name not in _results:
        _results[name] = run_obligation(registry()[name])
    return _results[name]


def _cli(argv, capsys):
    t0 = time.perf_counter()
    rc = main(argv)
    return rc, capsys.readouterr().out, time.perf_counter() - t0


# -- 1 ----------------------------------------------------------------------------


def test_criterion_1_shrd_run(capsys):
    with criterion(1, "SHRD RCX, RDX, 16 concrete run"):
        rc, out, dt = _cli(["run", "--bytes", SHRD, "--state", str(STATE)], capsys)
        assert rc == 0
        assert "GPR[RCX]: 0x0123456789ABCDEF -> 0x77880123456789AB" in out.splitlines()
        assert "GPR[RDX]" not in out  # unchanged
        s = parse_state(STATE.read_text())
        assert s.gpr[2].value == 0x1122_3344_5566_7788
        assert dt < 1.0


# -- 2 ----------------------------------------------------------------------------

# register, value per recorded cell of the worked SHRD run
RECORDED = [
    ("G2", 0x0123_4567_89AB_CDEF),
    ("G3", 16),
    ("G3", 16),
    ("G10", 0xFFFF_FFFF_FFFF_FFFF),
    ("G5", 0xFFFF_FFF0),
    ("G10", 0xFFFF),
    ("G10", 0xFFFF),
    ("G6", 0x7788),
    ("G7", 0x0000_0123_4567_89AB),
    ("G2", 0x0123_4567_89AB_0000),
    ("G2", 0x0123_4567_89AB_7788),
    ("G7", 0x7788_0123_4567_89AB),
    ("RCX", 0x7788_0123_4567_89AB),
]


def test_criterion_2_trace(capsys):
    with criterion(2, "micro-trace matches every recorded intermediate value"):
        rc, out, dt = _cli(["trace-ucode", "--bytes", SHRD, "--state", str(STATE)], capsys)
        assert rc == 0 and dt < 1.0
        written = []
        zf_after_sub = None
        for line in out.splitlines()[1:]:
            _, _, right = line.partition(" | ")
            reg, _, val = right.split(" ")[0].partition("=")
            if val:
                written.append((reg, int(val, 16)))
            if "[ZF=" in line:
                zf_after_sub = int(line.split("[ZF=")[1].rstrip("]"))
        assert written == RECORDED
        assert zf_after_sub == 0
        # the same values come out of the library call
        instr = x86_decode(parse_hex_bytes(SHRD)).instr
        trace = []
        run_xlate_ucode(instr, parse_state(STATE.read_text()), trace=trace)
        assert [(r, v.value) for e in trace for r, v in e.results.writes.items()] == RECORDED


# -- 3 ----------------------------------------------------------------------------


def test_criterion_3_exec_suite():
    with criterion(3, f"exec-correctness for all {len(used_uop_shapes())} (uop, size) pairs"):
        obs = exec_obligations()
        names = {o.name for o in obs}
        assert len(obs) >= 15
        assert {"exec/PSRLQ@256->256", "exec/PSLLVQ@256->256", "exec/PORQ@256->256"} <= names
        slow = []
        for ob in obs:
            r = _run(ob.name)
            assert r.proved, f"{ob.name}: {r.verdict}"
            if r.stats["seconds"] + r.stats.get("build_seconds", 0) >= 120:
                slow.append(ob.name)
        assert not slow


# -- 4 ----------------------------------------------------------------------------


def test_criterion_4_decode_suite():
    with criterion(4, "decode-correctness for every opcode case, no-match, LOCK and EVEX k0 lemmas"):
        names = [o.name for o in decode_obligations()]
        assert {"decode/no-match", "decode/lock-ud", "decode/evex-zero-mask-k0"} <= set(names)
        for n in names:
            r = _run(n)
            assert r.proved, f"{n}: {r.verdict}"
            assert r.stats["seconds"] + r.stats.get("build_seconds", 0) < 60


# -- 5 ----------------------------------------------------------------------------


def test_criterion_5_xlate_and_certificates():
    with criterion(5, "xlate/ucode proofs for SHRD and VPSHRDQ, then certificates"):
        vq = default_query("VPSHRDQ/zmm-imm8")
        assert set(vq.symbolic) == {"imm", "opmask", "zmask"}
        limits = {"SHRD/reg64-imm8": 600, "VPSHRDQ/zmm-imm8": 1800}
        for vid, limit in limits.items():
            t0 = time.perf_counter()
            r = _run(f"xlate/{vid}")
            assert r.proved, f"{vid}: {r.verdict}"
            assert time.perf_counter() - t0 <= limit
        for vid in limits:
            cert = prove_single_instruction(vid, _results)
            assert cert.spot_checks > 0
            for name in cert.lemma_names:
                assert _results[name].proved
            assert f"xlate/{vid}" in cert.lemma_names


# -- 6 ----------------------------------------------------------------------------

CAMPAIGN = {
    "exec-dontcare-src2": "exec/AND@64->64",
    "porq-ignores-opmask": "xlate/VPSHRDQ/zmm-imm8",
    "decode-missing-evex-exception": "decode/evex-zero-mask-k0",
}


def test_criterion_6_mutation_campaign():
    with criterion(6, "mutation campaign detects 3/3 seeded bugs with replaying counterexamples"):
        detected = 0
        for bug, name in CAMPAIGN.items():
            with bugs_injected(bug):
                ob = registry()[name]
                r = run_obligation(ob)
                if r.verdict != "counterexample":
                    continue
                rep = replay_counterexample(ob, r)
                if rep.reproduced and rep.divergences:
                    detected += 1
        assert detected == 3


# -- 7 ----------------------------------------------------------------------------


def test_criterion_7_kernel_oracles():
    with criterion(7, "kernel oracles: bitvec, Tseitin, SHRD 4-bit, VPSHRDQ lane-wise"):
        for op in test_bitvec.BINARY:
            test_bitvec.test_binary_ops_match_integers(op)
        for op in test_bitvec.SHIFTS:
            test_bitvec.test_shifts_match_integers(op)
        test_bitvec.test_structural_ops_match_integers()
        test_sat.test_tseitin_exhaustive_oracle()
        test_sat.test_tseitin_all_assignments_small()
        test_isa.test_shrd_exhaustive_nibbles("tiled")
        test_isa.test_shrd_exhaustive_nibbles("low")
        test_isa.test_vpshrdq_lanewise_random()


# -- 8 ----------------------------------------------------------------------------


def test_criterion_8_precheck():
    with criterion(8, "fixed-sequence precheck rejects the imm-dependent variant"):
        with split_variant():
            g = generalize_instance(find_legal_instance(SPLIT_QUERY), SPLIT_QUERY)
            sc = check_fixed_uop_sequence(g)
            assert not sc.ok
            assert len(sc.witnesses) == 2 and sc.witnesses[0] != sc.witnesses[1]
            with pytest.raises(PrecheckError):
                prove_xlate_ucode_correctness(SPLIT_QUERY)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
