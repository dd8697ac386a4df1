import random
from pathlib import Path

import pytest

from microverif.bitvec import BitVec
from microverif.design.exec_units import dut_exec
from microverif.isa import (
    X86State,
    gpr_loc,
    k_loc,
    parse_hex_bytes,
    parse_state,
    x86_decode,
    x86_exec,
    zmm_loc,
)
from microverif.ucode import (
    StepBoundExceeded,
    Uop,
    UopData,
    UopError,
    dlshftcnt,
    format_trace,
    porq,
    psllvq,
    psrlq,
    run_xlate_ucode,
    uop_semantics,
)
from oracles import MASK64, shl, shr, shrd, vpshrdq

HERE = Path(__file__).resolve().parent
DEMO = parse_state((HERE.parent / "data" / "shrd_demo.state").read_text())
SHRD_IMM = parse_hex_bytes("48 0F AC D1 10")
RCX, RDX = 1, 2


def c(w, v):
    return BitVec.const(w, v)


def _trace(code, state, exec_fn=uop_semantics):
    instr = x86_decode(code).instr
    trace = []
    res = run_xlate_ucode(instr, state, exec_fn, trace=trace)
    return res, trace


def test_golden_trace():
    _, trace = _trace(SHRD_IMM, DEMO)
    golden = (HERE / "golden" / "shrd_demo.trace").read_text().splitlines()
    assert golden[0] == "instruction: SHRD RCX, RDX, 0x10"
    assert format_trace(trace).splitlines() == golden[1:]


def test_trace_identical_with_gate_level_units():
    _, a = _trace(SHRD_IMM, DEMO)
    _, b = _trace(SHRD_IMM, DEMO, dut_exec)
    assert format_trace(a) == format_trace(b)


def _shrd_state(rng):
    s = X86State()
    return s.write_all({gpr_loc(i): c(64, rng.getrandbits(64)) for i in range(16)})


@pytest.mark.parametrize("by_cl", [False, True])
def test_shrd_microprogram_matches_oracle(by_cl):
    rng = random.Random(int(by_cl))
    for _ in range(150):
        rm, reg = rng.randrange(16), rng.randrange(16)
        imm = rng.getrandbits(8)
        rex = 0x48 | (reg >> 3) << 2 | (rm >> 3)
        code = [rex, 0x0F, 0xAD if by_cl else 0xAC, 0xC0 | (reg & 7) << 3 | (rm & 7)] + ([] if by_cl else [imm])
        s = _shrd_state(rng)
        if by_cl:
            s = s.write_all({gpr_loc(RCX): c(64, rng.getrandbits(64))})
        res, _ = _trace(code, s)
        count = s.read(gpr_loc(RCX)).value & 0xFF if by_cl else imm
        want, _ = shrd(s.read(gpr_loc(rm)).value, s.read(gpr_loc(reg)).value, count, 64)
        assert res.rslts.get(gpr_loc(rm), s.read(gpr_loc(rm))).value == want
        # same architectural writes as the ISA model (flags are outside the micro-program)
        spec = x86_exec(x86_decode(code).instr, s)
        for loc, v in spec.rslts.items():
            if loc.startswith("GPR"):
                assert res.rslts.get(loc, s.read(loc)).value == v.value


def _vp_code(dst, s1, s2, k, z, imm):
    inv = lambda v: v ^ 1  # noqa: E731
    p0 = inv(dst >> 3 & 1) << 7 | inv(s2 >> 4 & 1) << 6 | inv(s2 >> 3 & 1) << 5 | inv(dst >> 4 & 1) << 4 | 3
    p1 = 1 << 7 | (~s1 & 15) << 3 | 1 << 2 | 1
    p2 = z << 7 | 2 << 5 | inv(s1 >> 4 & 1) << 3 | k
    return [0x62, p0, p1, p2, 0x73, 0xC0 | (dst & 7) << 3 | (s2 & 7), imm]


def test_vpshrdq_microprogram_matches_oracle():
    rng = random.Random(99)
    for _ in range(40):
        dst, s1, s2 = rng.sample(range(32), 3)
        k, z = rng.randrange(8), rng.getrandbits(1)
        if k == 0:
            z = 0
        imm = rng.getrandbits(8)
        zmm = {i: rng.getrandbits(512) for i in (dst, s1, s2)}
        ks = [rng.getrandbits(64) for _ in range(8)]
        s = X86State().write_all({**{zmm_loc(i): c(512, v) for i, v in zmm.items()},
                                  **{k_loc(i): c(64, v) for i, v in enumerate(ks)}})
        res, _ = _trace(_vp_code(dst, s1, s2, k, z, imm), s)
        active = 0xFF if k == 0 else ks[k] & 0xFF
        assert res.rslts[zmm_loc(dst)].value == vpshrdq(zmm[s1], zmm[s2], imm, active, z, zmm[dst])


def test_vector_helpers_against_integers():
    rng = random.Random(4)
    for _ in range(200):
        v = rng.getrandbits(256)
        imm = rng.getrandbits(8)
        counts = dlshftcnt(c(8, imm)).value
        lanes = [v >> (64 * i) & MASK64 for i in range(4)]
        lane_counts = [counts >> (64 * i) & MASK64 for i in range(4)]
        assert all(x == (64 - imm % 64) % 128 for x in lane_counts)
        assert psrlq(c(256, v), c(8, imm)).value == sum(shr(x, imm % 64, 64) << (64 * i) for i, x in enumerate(lanes))
        assert psllvq(c(256, v), c(256, counts)).value == sum(
            shl(x, n, 64) << (64 * i) for i, (x, n) in enumerate(zip(lanes, lane_counts)))


def test_porq_masking():
    a, b, old = c(256, 0xF0), c(256, 0x0F), c(256, (1 << 256) - 1)
    full = porq(a, b, old, c(4, 0), c(3, 0), c(1, 0)).value  # k0: all lanes
    assert full == 0xFF
    merged = porq(a, b, old, c(4, 0b0001), c(3, 5), c(1, 0)).value
    assert merged & MASK64 == 0xFF and merged >> 64 == (1 << 192) - 1
    zeroed = porq(a, b, old, c(4, 0b0000), c(3, 5), c(1, 1)).value
    assert zeroed == 0


def test_predicated_uop_keeps_old_value():
    u = Uop("AND", "G10", "G10", "IMM", imm=c(8, 0), predicate="ZF")
    off = uop_semantics(u, UopData(c(64, 0xFFFF), c(64, 0), c(64, 0xFFFF), zf=c(1, 0)))
    on = uop_semantics(u, UopData(c(64, 0xFFFF), c(64, 0), c(64, 0xFFFF), zf=c(1, 1)))
    assert off.writes["G10"].value == 0xFFFF
    assert on.writes["G10"].value == 0


def test_uop_validation():
    with pytest.raises(UopError):
        Uop("FROB", "G1", "G2", "G3")
    with pytest.raises(UopError):
        Uop("JE", None, "G1", "G2")


def test_step_bound():
    instr = x86_decode(SHRD_IMM).instr
    with pytest.raises(StepBoundExceeded):
        run_xlate_ucode(instr, DEMO, bound=3)
