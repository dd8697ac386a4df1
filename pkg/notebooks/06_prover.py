# # Proofs, certificates and counterexamples
#
# Obligations come in three component kinds (decode, exec, xlate-ucode);
# `prove_single_instruction` composes them into a per-variant certificate.
# This script takes about a minute on one core.

import time

from microverif.design import bugs_injected
from microverif.prover import (
    PrecheckError,
    check_fixed_uop_sequence,
    default_query,
    find_legal_instance,
    generalize_instance,
    prove_single_instruction,
    prove_xlate_ucode_correctness,
    registry,
    run_obligation,
    select,
)
from microverif.prover.compose import dependencies

vid = "SHRD/reg64-imm8"
deps = dependencies(default_query(vid))
for kind, names in deps.items():
    print(kind, len(names), names[:3], "...")

# ## Discharge every lemma SHRD needs
results = {}
for names in deps.values():
    for n in names:
        t0 = time.perf_counter()
        results[n] = run_obligation(registry()[n])
        print(f"{n:32s} {results[n].verdict:8s} {time.perf_counter() - t0:6.2f}s")

cert = prove_single_instruction(vid, results)
print(cert.text())

# ## A seeded bug yields a counterexample that replays concretely
with bugs_injected("decode-missing-evex-exception"):
    r = run_obligation(registry()["decode/evex-zero-mask-k0"])
    print(r.verdict)
    print(r.replay["report"].text())

with bugs_injected("exec-dontcare-src2"):
    r = run_obligation(select("AND@64->64", "exec")[0])
    print(r.replay["report"].text())

# ## The fixed-sequence precheck
#
# A translator rule whose ROM entry depends on an immediate bit gives two
# different uop skeletons for one symbolic variant. The precheck finds both
# and the symbolic run is refused.
from microverif.design.xlate import XlateRule, extra_xlate_rule, imm_dependent_trap  # noqa: E402
from microverif.prover import VariantQuery  # noqa: E402

q = VariantQuery("SHRD/reg32-imm8-split", "SHRD", "Ev, Gv, Ib", 32, (("OP1", 1), ("OP2", 2)))
rule = XlateRule(12, 1, ("MOVSX G2, ARG0 (SSZ:32 DSZ:64)",), imm_dependent_trap(), ("rm", "reg", None))
with extra_xlate_rule(rule):
    sc = check_fixed_uop_sequence(generalize_instance(find_legal_instance(q), q))
    for instr, listing in zip(sc.witness_instrs, sc.witnesses):
        print(instr, "->", len(listing), "uops")
    try:
        prove_xlate_ucode_correctness(q)
    except PrecheckError as e:
        print("refused:", e)
