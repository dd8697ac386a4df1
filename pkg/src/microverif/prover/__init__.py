"""Obligation generation, candidate population, composition and reporting."""

from .compose import Certificate, MissingDependency, prove_single_instruction, rtl_step
from .obligations import (
    Goal,
    ProofObligation,
    all_obligations,
    decode_obligations,
    exec_obligations,
    prove_xlate_ucode_correctness,
    registry,
    run_obligation,
    select,
    used_uop_shapes,
    xlate_obligations,
)
from .queries import (
    GeneralizationError,
    PrecheckError,
    SequenceCheck,
    VariantQuery,
    check_fixed_uop_sequence,
    default_query,
    find_legal_instance,
    generalize_instance,
    prechecks,
)
from .replay import DivergenceReport, NothingToReplay, replay_counterexample
from .report import coverage, generate_report
from .runner import export_cnf, read_manifest, run_jobs, write_manifest


def prove_decode_correctness(case: str, **kw):
    """Run the decode obligation for one opcode case (e.g. ``0F_AC`` or ``no-match``)."""
    name = case if case.startswith("decode/") else f"decode/{case}"
    return run_obligation(registry()[name], **kw)


def prove_exec_correctness(opcode: str, ssz: int, dsz: int, **kw):
    return run_obligation(registry()[f"exec/{opcode}@{ssz}->{dsz}"], **kw)


__all__ = [
    "Certificate",
    "DivergenceReport",
    "GeneralizationError",
    "Goal",
    "MissingDependency",
    "NothingToReplay",
    "PrecheckError",
    "ProofObligation",
    "SequenceCheck",
    "VariantQuery",
    "all_obligations",
    "check_fixed_uop_sequence",
    "coverage",
    "decode_obligations",
    "default_query",
    "exec_obligations",
    "export_cnf",
    "find_legal_instance",
    "generalize_instance",
    "generate_report",
    "prechecks",
    "prove_decode_correctness",
    "prove_exec_correctness",
    "prove_single_instruction",
    "prove_xlate_ucode_correctness",
    "read_manifest",
    "registry",
    "replay_counterexample",
    "rtl_step",
    "run_jobs",
    "run_obligation",
    "select",
    "used_uop_shapes",
    "write_manifest",
    "xlate_obligations",
]
