# # Microcode model
#
# The translator turns an instruction into a micro-PC: a few prelude uops
# plus a ROM entry point. `run_xlate_ucode` steps the micro-program to its
# halt and returns the architectural writes. Passing a list collects a trace.

from pathlib import Path

from microverif.design.exec_units import dut_exec
from microverif.isa import parse_hex_bytes, parse_state, x86_decode
from microverif.ucode import format_trace, run_xlate_ucode

ROOT = Path(__file__).resolve().parents[1]
state = parse_state((ROOT / "data" / "shrd_demo.state").read_text())
instr = x86_decode(parse_hex_bytes("48 0F AC D1 10")).instr

trace = []
res = run_xlate_ucode(instr, state, trace=trace)
print(instr.text())
print(format_trace(trace))
print({k: hex(v.value) for k, v in res.rslts.items()})

# Same program with the gate-level execution units in place of the uop
# semantics table. The traces agree line for line.
trace_rtl = []
run_xlate_ucode(instr, state, dut_exec, trace=trace_rtl)
print("identical:", format_trace(trace) == format_trace(trace_rtl))

# ## Zero count takes the early exit
zero = x86_decode(parse_hex_bytes("48 0F AC D1 40")).instr  # 64 masks to 0
t0 = []
run_xlate_ucode(zero, state, trace=t0)
print(format_trace(t0))
