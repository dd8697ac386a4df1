# # The x86 subset: state, decoder, semantics
#
# Word-level reference model. `x86_decode` parses bytes into an Instruction
# (or a decode exception), `x86_exec` gives the architectural writes.

from pathlib import Path

from microverif.bitvec import BitVec
from microverif.isa import (
    format_state,
    gpr_loc,
    load_code,
    parse_hex_bytes,
    parse_state,
    shrd_spec,
    vpshrdq_spec,
    x86_decode,
    x86_model_step,
)

ROOT = Path(__file__).resolve().parents[1]

for text in ["48 0F AC D1 10", "48 0F AD D1", "F0 48 0F AC D1 10",
             "62 F3 ED 4B 73 CB 05", "62 F3 ED C8 73 CB 05", "48 0F"]:
    d = x86_decode(parse_hex_bytes(text))
    print(f"{text:24s}", d.exception or d.instr.text())

# ## One step of the SHRD demo

s = parse_state((ROOT / "data" / "shrd_demo.state").read_text())
s = load_code(s, parse_hex_bytes("48 0F AC D1 10"))
t = x86_model_step(s)
print(format_state(t))

# ## The two shift specifications
#
# SHRD shifts dest right and fills from src; the count is masked to 6 bits
# at 64-bit size and a zero count leaves flags alone.

c = lambda w, v: BitVec.const(w, v)  # noqa: E731
res, flags = shrd_spec(c(64, 0x0123456789ABCDEF), c(64, 0x1122334455667788), c(8, 16), 64)
print(hex(res.value), {k: v.value for k, v in flags.items()})

# VPSHRDQ does the same per 64-bit lane, with src2 as the high half, then
# applies the opmask. k3 = 0b0101 here, merge-masking.
k = tuple(c(64, 0b0101 if i == 3 else 0) for i in range(8))
out = vpshrdq_spec(c(512, 0xAAAA), c(512, 0x5555), c(8, 4), c(3, 3), c(1, 0), k, c(512, (1 << 512) - 1))
print([hex(v.value) for v in out.lanes(64)[:4]])
