import random
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from microverif.aig import current_aig
from microverif.bitvec import BitVec
from microverif.isa import (
    DX_NONE,
    StateFileError,
    X86State,
    encode_instruction,
    format_state,
    gpr_loc,
    k_loc,
    load_code,
    parse_hex_bytes,
    parse_state,
    shrd_spec,
    vpshrdq_spec,
    x86_decode,
    x86_model_step,
    zmm_loc,
)
from oracles import shrd, vpshrdq

DATA = Path(__file__).resolve().parents[1] / "data"
RCX, RDX = 1, 2


def c(w, v):
    return BitVec.const(w, v)


def _columns(values, width):
    return [sum((v >> i & 1) << k for k, v in enumerate(values)) for i in range(width)]


def _sim(out, inputs, n):
    pats = {}
    for vec, values in inputs:
        for lit, col in zip(vec.bits, _columns(values, vec.width)):
            pats[lit >> 1] = col
    cols = current_aig().simulate(out.bits, pats, n)
    return [sum((cols[i] >> k & 1) << i for i in range(out.width)) for k in range(n)]


# -- SHRD ---------------------------------------------------------------------


@pytest.mark.parametrize("layout", ["tiled", "low"])
def test_shrd_exhaustive_nibbles(layout):
    """All 4-bit dest/src patterns and all 8-bit counts at 16-bit operand size.

    ``tiled`` repeats the nibble across the word so every count in 0..31
    moves a real pattern across the dest/src boundary.
    """
    spread = (lambda x: x * 0x1111) if layout == "tiled" else (lambda x: x)
    cases = [(spread(d), spread(s), k) for d in range(16) for s in range(16) for k in range(256)]
    dest, src, amt = BitVec.var(16, "d"), BitVec.var(16, "s"), BitVec.var(8, "k")
    res, flags = shrd_spec(dest, src, amt, 16)
    cf_old = flags["CF"]
    inputs = [(dest, [d for d, _, _ in cases]), (src, [s for _, s, _ in cases]), (amt, [k for _, _, k in cases])]
    got = _sim(res, inputs, len(cases))
    got_cf = _sim(cf_old, inputs, len(cases))
    bad = 0
    for (d, s, k), r, cf in zip(cases, got, got_cf):
        want, want_cf = shrd(d, s, k, 16)
        bad += r != want
        bad += cf != (0 if want_cf is None else want_cf)  # old flags default to 0
    assert bad == 0


@pytest.mark.parametrize("n", [16, 32, 64])
def test_shrd_random_concrete(n):
    rng = random.Random(n)
    for _ in range(2000):
        d, s, k = rng.getrandbits(n), rng.getrandbits(n), rng.getrandbits(8)
        old_cf = rng.getrandbits(1)
        res, flags = shrd_spec(c(n, d), c(n, s), c(8, k), n, {"ZF": c(1, 0), "SF": c(1, 1), "CF": c(1, old_cf)})
        want, want_cf = shrd(d, s, k, n)
        assert res.value == want
        if want_cf is None:
            assert (flags["CF"].value, flags["SF"].value) == (old_cf, 1)
        else:
            assert flags["CF"].value == want_cf
            assert flags["ZF"].value == int(want == 0)
            assert flags["SF"].value == want >> (n - 1)


def test_shrd_rejects_other_sizes():
    with pytest.raises(ValueError):
        shrd_spec(c(8, 1), c(8, 1), c(8, 1), 8)


# -- VPSHRDQ ------------------------------------------------------------------


def _kfile(rng):
    return [rng.getrandbits(64) for _ in range(8)]


def _active(kvals, idx):
    return 0xFF if idx == 0 else kvals[idx] & 0xFF


def test_vpshrdq_lanewise_random():
    rng = random.Random(512)
    for _ in range(1000):
        a, b, old = (rng.getrandbits(512) for _ in range(3))
        imm, idx, z = rng.getrandbits(8), rng.getrandbits(3), rng.getrandbits(1)
        kv = _kfile(rng)
        got = vpshrdq_spec(c(512, a), c(512, b), c(8, imm), c(3, idx), c(1, z),
                           tuple(c(64, x) for x in kv), c(512, old))
        assert got.value == vpshrdq(a, b, imm, _active(kv, idx), z, old)


def test_vpshrdq_symbolic_matches_lanewise():
    rng = random.Random(7)
    n = 1000
    a, b, old = BitVec.var(512, "a"), BitVec.var(512, "b"), BitVec.var(512, "old")
    imm, idx, z = BitVec.var(8, "imm"), BitVec.var(3, "idx"), BitVec.var(1, "z")
    ks = [BitVec.var(64, f"k{i}") for i in range(8)]
    out = vpshrdq_spec(a, b, imm, idx, z, tuple(ks), old)
    cases = [dict(a=rng.getrandbits(512), b=rng.getrandbits(512), old=rng.getrandbits(512),
                  imm=rng.getrandbits(8), idx=rng.getrandbits(3), z=rng.getrandbits(1),
                  k=_kfile(rng)) for _ in range(n)]
    inputs = [(a, [x["a"] for x in cases]), (b, [x["b"] for x in cases]), (old, [x["old"] for x in cases]),
              (imm, [x["imm"] for x in cases]), (idx, [x["idx"] for x in cases]), (z, [x["z"] for x in cases])]
    inputs += [(ks[i], [x["k"][i] for x in cases]) for i in range(8)]
    got = _sim(out, inputs, n)
    want = [vpshrdq(x["a"], x["b"], x["imm"], _active(x["k"], x["idx"]), x["z"], x["old"]) for x in cases]
    assert sum(g != w for g, w in zip(got, want)) == 0


# -- decoder ------------------------------------------------------------------


@pytest.mark.parametrize("hexcode, text", [
    ("48 0F AC D1 10", "SHRD RCX, RDX, 0x10"),
    ("48 0F AD D1", "SHRD RCX, RDX, CL"),
    ("66 0F AC D1 03", "SHRD RCX:16, RDX:16, 0x3"),
    ("48 C1 E9 04", "SHR RCX, 0x4"),
    ("62 F3 ED 4B 73 CB 05", "VPSHRDQ ZMM1{k3}, ZMM2, ZMM3, 0x5"),
])
def test_decode_examples(hexcode, text):
    d = x86_decode(parse_hex_bytes(hexcode))
    assert d.dx.value == DX_NONE
    assert d.instr.text() == text
    assert int(d.instr.length) == len(parse_hex_bytes(hexcode))


@pytest.mark.parametrize("hexcode, exc", [
    ("F0 48 0F AC D1 10", "#UD"),        # LOCK on a register destination
    ("62 F3 ED C8 73 CB 05", "#UD"),     # zero-masking with k0
    ("48 0F", "truncated"),
])
def test_decode_exceptions(hexcode, exc):
    assert x86_decode(parse_hex_bytes(hexcode)).exception == exc


def test_decode_variant_ids():
    assert x86_decode(parse_hex_bytes("48 0F AC D1 10")).instr.variant_id == "SHRD/reg64-imm8"
    assert x86_decode(parse_hex_bytes("62 F3 ED 4B 73 CB 05")).instr.variant_id == "VPSHRDQ/zmm-imm8"


@given(st.integers(0, 15), st.integers(0, 15), st.integers(0, 255), st.booleans())
def test_shrd_encode_decode_round_trip(rm, reg, imm, by_cl):
    rex = 0x48 | (reg >> 3) << 2 | (rm >> 3)
    code = [rex, 0x0F, 0xAD if by_cl else 0xAC, 0xC0 | (reg & 7) << 3 | (rm & 7)] + ([] if by_cl else [imm])
    d = x86_decode(code)
    assert d.instr.variant_id == ("SHRD/reg64-cl" if by_cl else "SHRD/reg64-imm8")
    assert x86_decode(list(encode_instruction(d.instr))).instr == d.instr


@given(st.integers(0, 31), st.integers(0, 31), st.integers(0, 31), st.integers(0, 7), st.booleans(),
       st.integers(0, 255))
def test_evex_encode_decode_round_trip(dst, src1, src2, k, z, imm):
    if z and k == 0:
        return
    inv = lambda v: v ^ 1  # noqa: E731
    p0 = inv(dst >> 3 & 1) << 7 | inv(src2 >> 4 & 1) << 6 | inv(src2 >> 3 & 1) << 5 | inv(dst >> 4 & 1) << 4 | 3
    p1 = 1 << 7 | (~src1 & 15) << 3 | 1 << 2 | 1
    p2 = z << 7 | 2 << 5 | inv(src1 >> 4 & 1) << 3 | k
    code = [0x62, p0, p1, p2, 0x73, 0xC0 | (dst & 7) << 3 | (src2 & 7), imm]
    d = x86_decode(code)
    assert d.dx.value == DX_NONE
    i = d.instr
    assert (int(i.reg), int(i.vvvv), int(i.rm), int(i.opmask), int(i.zmask), int(i.imm)) == (dst, src1, src2, k, z, imm)
    assert x86_decode(list(encode_instruction(i))).instr == i


# -- state file and one step --------------------------------------------------


def test_state_file_round_trip():
    s = parse_state((DATA / "shrd_demo.state").read_text())
    assert s.ip == 0x1000
    assert s.read(gpr_loc(RCX)).value == 0x0123456789ABCDEF
    again = parse_state(format_state(s))
    assert again.diff(s) == []


def test_state_file_wide_registers():
    text = "ZMM[ZMM2]=0x" + "AB" * 64 + "\nK[K3]=0x0F\nMEM[0x10]=0x48\n"
    s = parse_state(text)
    assert s.read(zmm_loc(2)).value == int("AB" * 64, 16)
    assert s.read(k_loc(3)).value == 0x0F
    assert s.memory[0x10] == 0x48


@pytest.mark.parametrize("text", ["GPR[RCX]=12", "FOO=0x1", "K[K1]=0x1" + "0" * 17, "MEM[0x0]=0x100", "nonsense"])
def test_state_file_errors(text):
    with pytest.raises(StateFileError):
        parse_state(text)


def test_model_step_on_shrd_demo():
    s = parse_state((DATA / "shrd_demo.state").read_text())
    s = load_code(s, parse_hex_bytes("48 0F AC D1 10"))
    t = x86_model_step(s)
    assert t.read(gpr_loc(RCX)).value == 0x77880123456789AB
    assert t.read(gpr_loc(RDX)).value == 0x1122334455667788
    assert t.ip == 0x1005
    changed = {loc for loc, _, _ in s.diff(t)}
    assert {"IP", gpr_loc(RCX)} <= changed <= {"IP", gpr_loc(RCX), "ZF", "SF", "CF"}


def test_model_step_faults_on_lock():
    s = load_code(X86State(ip=0), parse_hex_bytes("F0 48 0F AC D1 10"))
    t = x86_model_step(s)
    assert t.fault == "#UD" and t.ip == 0
    assert x86_model_step(t) is t
