"""Microsequencer: expands ROM words into uops and computes the next micro-PC."""

from __future__ import annotations

from ..bitvec import BitVec, bv_mux
from ..isa.state import MachineConfig
from ..ucode.uop import (
    HALT_ADDR,
    IMM,
    NUM_G,
    PREDICATES,
    SIZES,
    MicroPC,
    SideParams,
    Uop,
    UopMask,
    gpr_ref,
    zmm_half_ref,
)
from .bugs import bug_enabled
from .rom import SEQ_BRANCH, SEQ_HALT, T_ARG, T_IMM, T_LIT, T_NONE, RomImage, RomWord, RomError, active_rom

ADDR_BITS = 10


class SymbolicBranch(RuntimeError):
    """The branch outcome handed to the sequencer is not a constant."""


def _arg_index(side: SideParams, k: int) -> int:
    if k >= len(side.args):
        raise RomError(f"ARG{k} used but the micro-PC carries {len(side.args)} operands")
    v = side.args[k].value
    if v is None:
        raise RomError(f"operand index ARG{k} is symbolic")
    return v


def _resolve(code: int, side: SideParams, word: RomWord) -> tuple[str | None, BitVec | None]:
    if code == T_NONE:
        return None, None
    if code < 16:
        return f"G{code}", None
    if code < 48:
        return f"T{code - 16}", None
    if code == T_LIT:
        return IMM, BitVec.const(64, word.lit_value(64))
    if code == T_IMM:
        return IMM, side.imm
    for name, c in T_ARG.items():
        if c == code:
            idx = _arg_index(side, int(name[3]))
            if len(name) == 4:
                if idx >= NUM_G:
                    raise RomError(f"{name} resolves to vector register {idx} in a scalar slot")
                return gpr_ref(idx), None
            return zmm_half_ref(idx, name[4]), None
    raise RomError(f"undefined template code {code}")


def expand_word(word: RomWord, side: SideParams) -> Uop:
    """The full uop a ROM word denotes under ``side``."""
    refs = {}
    imm = None
    for slot in ("dst", "src1", "src2"):
        ref, v = _resolve(getattr(word, slot), side, word)
        refs[slot] = ref
        if v is not None:
            imm = v
    mask = None
    op = word.mnemonic
    if op == "PORQ":
        opmask = BitVec.const(3, 0) if bug_enabled("porq-ignores-opmask") else side.opmask
        mask = UopMask(side.maskmode, opmask)
    return Uop(
        op,
        refs["dst"],
        refs["src1"],
        refs["src2"],
        imm=imm,
        predicate=PREDICATES[word.pred],
        ssz=SIZES[word.ssz],
        dsz=SIZES[word.dsz],
        mask=mask,
        target=word.target if word.seq == SEQ_BRANCH else None,
    )


def dut_ucode_read(pc: MicroPC, config: MachineConfig | None = None, rom: RomImage | None = None) -> Uop:
    if pc.addr == HALT_ADDR:
        raise RomError("micro-PC is halted")
    rom = rom or active_rom()
    return expand_word(rom.word(pc.addr), pc.side)


def next_address(addr: BitVec, word: RomWord, taken: BitVec) -> BitVec:
    """Address logic: halt word to the sentinel, taken branch to target, else +1."""
    inc = addr + BitVec.const(ADDR_BITS, 1)
    is_branch = BitVec.const(1, int(word.seq == SEQ_BRANCH))
    is_halt = BitVec.const(1, int(word.seq == SEQ_HALT))
    nxt = bv_mux(is_branch & taken, BitVec.const(ADDR_BITS, word.target), inc)
    return bv_mux(is_halt, BitVec.const(ADDR_BITS, HALT_ADDR), nxt)


def dut_ucode_step(pc: MicroPC, taken: BitVec | None = None, rom: RomImage | None = None) -> MicroPC:
    """Next micro-PC after executing the ROM word at ``pc``.

    ``taken`` is the branch outcome produced by the uop, if any.
    """
    rom = rom or active_rom()
    word = rom.word(pc.addr)
    t = taken if taken is not None else BitVec.const(1, 0)
    nxt = next_address(BitVec.const(ADDR_BITS, pc.addr), word, t).value
    if nxt is None:
        raise SymbolicBranch(f"branch at {pc.addr:#05x} depends on symbolic data")
    return MicroPC((), nxt, pc.side)
