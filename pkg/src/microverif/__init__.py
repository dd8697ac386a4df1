"""Symbolic verification of x86 instruction implementations.

Word-level ISA model, microcode model, a gate-level design under test and
a bit-blasting prover that checks decode, translation/microcode and
execution-unit correctness and composes them per instruction.
"""

__version__ = "0.1.0"
