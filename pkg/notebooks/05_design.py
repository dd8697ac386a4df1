# # The design under test
#
# A separately structured implementation: a table-driven decoder, a rule
# based translator, a compact microcode ROM with its sequencer, and
# gate-level execution units built from adders, barrel shifters and muxes.

from microverif.aig import aig_scope
from microverif.bitvec import BitVec
from microverif.design import BUGS, default_rom
from microverif.design.decoder import dut_decode
from microverif.design.exec_units import check_dispatch_schedule, get_circuit
from microverif.design.rom import disassemble
from microverif.isa import parse_hex_bytes

# ## ROM image

rom = default_rom()
labels = rom.labels_by_addr
for addr in sorted(rom.words):
    print(f"{addr:03X} {rom.words[addr]:016X}  {disassemble(rom.word(addr), labels)}")

# ## Decoder agrees with the spec decoder on the demo bytes
print(dut_decode(parse_hex_bytes("48 0F AC D1 10")).instr.text())

# ## Execution unit sizes (AND gates in each netlist)
with aig_scope():
    for key in [("AND", 64, 64), ("SUB", 32, 32), ("ROR", 64, 64), ("PSLLVQ", 256, 256)]:
        c = get_circuit(key)
        print(c.name, "latency", c.latency, "gates", c.size())
    out = get_circuit(("ROR", 64, 64)).evaluate({
        "a": BitVec.const(64, 0x0123456789AB7788), "b": BitVec.const(8, 16),
        "old": BitVec.const(64, 0), "zf": BitVec.const(1, 0), "pred": BitVec.const(2, 0)})
    print(hex(out["result"].value))

# ## Writeback port scheduling
print(check_dispatch_schedule([(0, "SHR"), (1, "AND")]))
print(check_dispatch_schedule([(0, "SHR"), (2, "AND")]))

# ## Seeded bugs available for mutation runs
for name, what in BUGS.items():
    print(f"{name}: {what}")
