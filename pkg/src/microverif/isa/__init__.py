"""x86-subset specification: machine state, catalog, decoder and semantics."""

from .catalog import (
    DX_NAMES,
    DX_NONE,
    DX_TRUNCATED,
    DX_UD,
    DX_UNSUPPORTED,
    EVEX,
    LEGACY,
    VARIANTS,
    InstListEntry,
    Variant,
    entry_by_uid,
    load_inst_table,
    lookup,
)
from .decode import (
    FetchError,
    SymbolicStructureError,
    encode_instruction,
    parse_hex_bytes,
    x86_decode,
    x86_fetch_code,
)
from .instruction import FIELD_WIDTHS, INSTR_WIDTH, DecodeResult, Instruction
from .semantics import (
    ExecResult,
    gpr_alu_spec,
    load_code,
    shrd_spec,
    vpshrdq_spec,
    x86_exec,
    x86_model_step,
    x86_step,
    x86_update,
)
from .state import (
    FLAG_NAMES,
    GPR_NAMES,
    MachineConfig,
    StateFileError,
    X86State,
    format_state,
    gpr_loc,
    k_loc,
    parse_state,
    zmm_loc,
)
