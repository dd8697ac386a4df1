"""The design under test: decoder, translator, microsequencer and execution units."""

from .bugs import BUGS, bug_enabled, bugs_injected, enabled_bugs, inject_bug, reset_bugs
from .ports import PortBinding
from .rom import ROUTINE_SOURCE, RomImage, RomWord, assemble_rom, default_rom
from .sequencer import dut_ucode_read, dut_ucode_step
from .xlate import NonFixedSequence, UnsupportedVariant, XlateRule, dut_xlate, get_init_pc
