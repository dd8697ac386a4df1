"""Microcode model: uops, per-uop semantics and the run-to-halt interpreter."""

from .model import (
    STEP_BOUND,
    NotHalted,
    StepBoundExceeded,
    TraceEntry,
    UcodeState,
    extract_instr_results,
    format_trace,
    run_ucode_model,
    run_xlate_ucode,
    ucode_fetch_data,
    ucode_get_uop,
    ucode_model_step,
    ucode_next_pc,
    ucode_update_state,
)
from .semantics import UopData, UopResults, dlshftcnt, porq, psllvq, psrlq, uop_semantics
from .uop import HALT_ADDR, OPCODES, MicroPC, SideParams, Uop, UopError, UopMask
