import pytest

from microverif.design import bugs_injected
from microverif.isa import parse_hex_bytes
from microverif.prover import (
    NothingToReplay,
    PrecheckError,
    VariantQuery,
    check_fixed_uop_sequence,
    coverage,
    decode_obligations,
    default_query,
    exec_obligations,
    find_legal_instance,
    generalize_instance,
    generate_report,
    prechecks,
    prove_decode_correctness,
    prove_exec_correctness,
    prove_xlate_ucode_correctness,
    read_manifest,
    registry,
    replay_counterexample,
    run_jobs,
    run_obligation,
    select,
    used_uop_shapes,
    write_manifest,
)
from microverif.prover.compose import MissingDependency, dependencies, prove_single_instruction
from microverif.prover.runner import export_cnf
from microverif.sat import ProofResult, ReplayFailure, parse_dimacs

from helpers import SPLIT_QUERY, split_variant


def test_registry_names():
    names = set(registry())
    assert {"decode/0F_AC", "decode/no-match", "decode/lock-ud", "decode/evex-zero-mask-k0"} <= names
    assert "exec/PSLLVQ@256->256" in names
    assert "xlate/VPSHRDQ/zmm-imm8" in names
    assert len(exec_obligations()) == len(used_uop_shapes()) >= 15


def test_selectors():
    assert [o.name for o in select("0F_AC", "decode")] == ["decode/0F_AC"]
    assert len(select("all", "decode")) == len(decode_obligations())
    assert {o.name for o in select("SHRD", "xlate-ucode")} == {"xlate/SHRD/reg64-imm8", "xlate/SHRD/reg64-cl"}


def test_shrd_dependencies():
    deps = dependencies(default_query("SHRD/reg64-imm8"))
    assert deps["decode"] == ["decode/0F_AC", "decode/lock-ud"]
    assert len(deps["exec"]) == 11
    assert deps["xlate-ucode"] == ["xlate/SHRD/reg64-imm8"]


@pytest.mark.parametrize("ob", decode_obligations(), ids=lambda o: o.name)
def test_decode_obligation_proves(ob):
    assert run_obligation(ob).proved


@pytest.mark.parametrize("key", [("AND", 64, 64), ("SUB", 32, 32), ("JE", 16, 16), ("ROR", 64, 64)])
def test_exec_obligation_proves(key):
    assert prove_exec_correctness(*key).proved


def test_prove_decode_correctness_by_case():
    assert prove_decode_correctness("lock-ud").proved


def test_exec_mutation_replays():
    with bugs_injected("exec-dontcare-src2"):
        ob = registry()["exec/AND@64->64"]
        res = run_obligation(ob)
        assert res.verdict == "counterexample"
        rep = res.replay["report"]
        assert rep.reproduced and rep.divergences
        again = replay_counterexample(ob, res)
        assert [d.key for d in again.divergences] == [d.key for d in rep.divergences]


def test_decode_mutation_replays():
    with bugs_injected("decode-missing-evex-exception"):
        res = prove_decode_correctness("evex-zero-mask-k0")
        assert res.verdict == "counterexample"
        rep = res.replay["report"]
        assert rep.reproduced
        assert rep.details["spec dx"] == "#UD"
        code = parse_hex_bytes(rep.details["bytes"])
        assert code[0] == 0x62 and code[3] >> 7 == 1 and code[3] & 7 == 0


def test_replay_refuses_proved_result():
    ob = registry()["decode/0F_AC"]
    with pytest.raises(NothingToReplay):
        replay_counterexample(ob, run_obligation(ob))


def test_replay_detects_spurious_counterexample():
    ob = registry()["exec/AND@64->64"]
    with pytest.raises(ReplayFailure):
        replay_counterexample(ob, {})  # the all-zero input agrees


def test_prechecks_on_reference_variants():
    for vid in ("SHRD/reg64-imm8", "VPSHRDQ/zmm-imm8"):
        q = default_query(vid)
        inst = find_legal_instance(q)
        g = generalize_instance(inst, q)
        sc = check_fixed_uop_sequence(g)
        assert sc.ok and sc.skeleton


def test_inconsistent_query():
    q = VariantQuery("SHRD/locked", "SHRD", "Ev, Gv, Ib", 64, (("OP1", 1), ("OP2", 2)), prefixes=("LOCK",))
    assert find_legal_instance(q) is None
    with pytest.raises(PrecheckError, match="inconsistent"):
        prechecks(q)


def test_fixed_sequence_violation():
    with split_variant():
        g = generalize_instance(find_legal_instance(SPLIT_QUERY), SPLIT_QUERY)
        sc = check_fixed_uop_sequence(g)
        assert not sc.ok
        assert len(sc.witnesses) == 2 and sc.witnesses[0] != sc.witnesses[1]
        with pytest.raises(PrecheckError):
            prove_xlate_ucode_correctness(SPLIT_QUERY)


def test_certificate_refused_on_failed_lemma():
    q = default_query("SHRD/reg64-imm8")
    results = {"exec/ROR@64->64": ProofResult("counterexample", name="exec/ROR@64->64")}
    with pytest.raises(MissingDependency):
        prove_single_instruction(q, results)


def test_manifest_round_trip(tmp_path):
    names = ["decode/0F_AC", "exec/AND@64->64"]
    path = write_manifest(names, tmp_path / "m.txt")
    path.write_text("# comment\n" + path.read_text() + "\n")
    assert read_manifest(path) == names


def test_parallel_jobs_match_serial():
    obs = select("all", "decode")[:4]
    serial = [r.verdict for _, r in run_jobs(obs, jobs=1)]
    par = [r.verdict for _, r in run_jobs(obs, jobs=2)]
    assert serial == par == ["proved"] * 4


def test_export_cnf(tmp_path):
    paths = export_cnf(select("AND", "exec"), tmp_path)
    assert paths and all(p.suffix == ".cnf" for p in paths)
    cnf = parse_dimacs(paths[0].read_text())
    assert cnf.num_vars > 0 and cnf.clauses


def test_report_is_deterministic_without_timings():
    obs = select("all", "decode")
    a = {ob.name: r for ob, r in run_jobs(obs)}
    b = {ob.name: r for ob, r in run_jobs(obs)}
    ta, tb = generate_report(a, timings=False), generate_report(b, timings=False)
    assert ta == tb
    assert "proved: %d" % len(obs) in ta
    assert generate_report(a, "html", timings=False) == generate_report(b, "html", timings=False)
    assert coverage(a)["SHRD/reg64-imm8"]["decode"] == "proved"
