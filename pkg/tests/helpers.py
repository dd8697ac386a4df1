"""Shared fixtures for prover tests."""

from microverif.design.xlate import XlateRule, extra_xlate_rule, imm_dependent_trap
from microverif.prover import VariantQuery

# 32-bit SHRD whose translator rule picks the ROM routine from imm bit 0:
# odd immediates trap to the empty routine, even ones to the full shift.
SPLIT_QUERY = VariantQuery("SHRD/reg32-imm8-split", "SHRD", "Ev, Gv, Ib", 32, (("OP1", 1), ("OP2", 2)))
SPLIT_RULE = XlateRule(12, 1, ("MOVSX G2, ARG0 (SSZ:32 DSZ:64)",), imm_dependent_trap(), ("rm", "reg", None))


def split_variant():
    """Context manager installing the imm-dependent rule."""
    return extra_xlate_rule(SPLIT_RULE)
