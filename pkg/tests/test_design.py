import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from microverif.aig import current_aig
from microverif.bitvec import BitVec
from microverif.design import (
    BUGS,
    PortBinding,
    ROUTINE_SOURCE,
    RomImage,
    RomWord,
    assemble_rom,
    bug_enabled,
    bugs_injected,
    default_rom,
    dut_xlate,
    inject_bug,
    reset_bugs,
)
from microverif.design.bugs import UnknownBug
from microverif.design.decoder import dut_decode
from microverif.design.exec_units import check_dispatch_schedule, get_circuit
from microverif.design.rom import RomError, WORD_FIELDS, assemble_row, disassemble
from microverif.design.xlate import static_sequence
from microverif.isa import EVEX, parse_hex_bytes, x86_decode
from microverif.isa.catalog import MAP_0F, MAP_0F3A, MAP_0F38, MAP_1BYTE, catalog_opcodes
from microverif.prover import exec_obligations
from microverif.prover.obligations import symbolic_mk
from oracles import ror, shl, shr

# -- ROM ----------------------------------------------------------------------


def test_rom_text_round_trip():
    img = default_rom()
    back = RomImage.from_text(img.to_text())
    assert back.words == img.words and back.labels == img.labels


@given(st.tuples(*[st.integers(0, (1 << w) - 1) for name, w in WORD_FIELDS if name != "reserved"]))
def test_rom_word_pack_round_trip(vals):
    names = [n for n, _ in WORD_FIELDS if n != "reserved"]
    w = RomWord(**dict(zip(names, vals)))
    assert RomWord.unpack(w.pack()) == w


def test_rom_word_rejects_reserved_and_overflow():
    with pytest.raises(RomError):
        RomWord(reserved=1)
    with pytest.raises(RomError):
        RomWord(opcode=256)


def test_disassemble_reassemble():
    img = default_rom()
    labels = img.labels_by_addr
    for addr in sorted(img.words):
        word = img.word(addr)
        text = disassemble(word, labels)
        again = assemble_row(text, img.labels, halt=word.seq == 2)
        assert again == word, text


def test_assembler_errors():
    with pytest.raises(RomError):
        assemble_rom("a:\n    FROB G1, G2, G3\n")
    with pytest.raises(RomError):
        assemble_rom("a:\n    JE G1, 0, nowhere (SSZ:16 DSZ:16)\n")
    with pytest.raises(RomError):
        assemble_rom(ROUTINE_SOURCE + ROUTINE_SOURCE)


# -- port bindings --------------------------------------------------------------


@given(st.lists(st.integers(1, 40), min_size=1, max_size=6), st.data())
def test_port_binding_round_trip(widths, data):
    pb = PortBinding("t", tuple((f"f{i}", w) for i, w in enumerate(widths)))
    vals = {f"f{i}": data.draw(st.integers(0, (1 << w) - 1)) for i, w in enumerate(widths)}
    got = pb.get(pb.map(vals))
    assert {k: v.value for k, v in got.items()} == vals
    assert pb.width == sum(widths)


def test_port_binding_errors():
    pb = PortBinding("t", (("a", 4),))
    with pytest.raises(KeyError):
        pb.map({"b": 1})
    with pytest.raises(ValueError):
        pb.map({"a": BitVec.const(5, 0)})


# -- execution units ------------------------------------------------------------


def _columns(values, width):
    return [sum((v >> i & 1) << k for k, v in enumerate(values)) for i in range(width)]


@pytest.mark.parametrize("ob", exec_obligations(), ids=lambda o: o.name)
def test_exec_units_random_simulation(ob):
    """1000 random inputs per unit: netlist and uop semantics agree wherever the assumptions hold."""
    goal = ob.build(symbolic_mk)
    spec, dut = goal.vectors()
    g = current_aig()
    hyp = g.and_all(a.bit for a in goal.assumptions)
    rng = random.Random(ob.name)
    n = 1000
    pats = {v: rng.getrandbits(n) for v in g.support(spec.bits + dut.bits + (hyp,))}
    cols_s = g.simulate(spec.bits, pats, n)
    cols_d = g.simulate(dut.bits, pats, n)
    (ok,) = g.simulate([hyp], pats, n)
    diff = 0
    for a, b in zip(cols_s, cols_d):
        diff |= a ^ b
    assert diff & ok == 0
    assert bin(ok).count("1") > n // 2


def _run_unit(op, a, b, w=64):
    c = get_circuit((op, w, w))
    v = {"a": BitVec.const(w, a), "b": BitVec.const(8 if op in ("SHL", "SHR", "ROR") else w, b),
         "old": BitVec.const(w, 0), "zf": BitVec.const(1, 0), "pred": BitVec.const(2, 0)}
    return c.evaluate(v)


def test_exec_units_against_integers():
    rng = random.Random(1)
    for _ in range(200):
        a, b, k = rng.getrandbits(64), rng.getrandbits(64), rng.getrandbits(8)
        assert _run_unit("AND", a, b)["result"].value == a & b
        assert _run_unit("OR", a, b)["result"].value == a | b
        assert _run_unit("SHR", a, k)["result"].value == shr(a, k & 63, 64)
        assert _run_unit("SHL", a, k)["result"].value == shl(a, k & 63, 64)
        assert _run_unit("ROR", a, k)["result"].value == ror(a, k, 64)


def test_sub_unit_flags():
    c = get_circuit(("SUB", 32, 32))
    out = c.evaluate({"a": BitVec.const(32, 0), "b": BitVec.const(32, 16), "old": BitVec.const(32, 0),
                      "zf": BitVec.const(1, 1), "pred": BitVec.const(2, 0)})
    assert out["result"].value == 0xFFFFFFF0
    assert (out["zf_we"].value, out["zf_out"].value) == (1, 0)


def test_dispatch_schedule():
    assert check_dispatch_schedule([(0, "AND"), (1, "OR"), (2, "MOV")]).ok
    bad = check_dispatch_schedule([(0, "SHR"), (1, "AND")])
    assert not bad.ok and bad.cycle == 2 and bad.pair == (0, 1)
    with pytest.raises(ValueError):
        check_dispatch_schedule([(0, 0)])


# -- bugs ---------------------------------------------------------------------


def test_bug_toggles():
    assert set(BUGS) == {"exec-dontcare-src2", "porq-ignores-opmask", "decode-missing-evex-exception"}
    inject_bug("porq-ignores-opmask")
    assert bug_enabled("porq-ignores-opmask")
    reset_bugs()
    assert not bug_enabled("porq-ignores-opmask")
    with bugs_injected("exec-dontcare-src2"):
        assert bug_enabled("exec-dontcare-src2")
    assert not bug_enabled("exec-dontcare-src2")
    with pytest.raises(UnknownBug):
        inject_bug("nope")


def test_missing_evex_exception_bug_changes_decode():
    code = parse_hex_bytes("62 F3 ED C8 73 CB 05")
    assert dut_decode(code).exception == "#UD"
    with bugs_injected("decode-missing-evex-exception"):
        assert dut_decode(code).exception != "#UD"


# -- decoder and translator -------------------------------------------------------


ESCAPES = {MAP_1BYTE: [], MAP_0F: [0x0F], MAP_0F38: [0x0F, 0x38], MAP_0F3A: [0x0F, 0x3A]}


def _biased_bytes(rng):
    """Mostly well-formed catalog encodings with random prefixes, operands and truncation."""
    if rng.random() < 0.2:
        return [rng.getrandbits(8) for _ in range(rng.randint(0, 15))]
    enc, omap, op = rng.choice(sorted(catalog_opcodes()))
    if enc == EVEX:
        p = [rng.getrandbits(8) for _ in range(3)]
        if rng.random() < 0.7:  # keep the fixed EVEX fields legal most of the time
            p = [p[0] & 0xF0 | 3, p[1] | 0x85, p[2] & 0x8F | 0x40]
        body = [0x62, *p, op, 0xC0 | rng.getrandbits(6), rng.getrandbits(8)]
    else:
        pfx = [p for p in (0xF0, 0x66, 0xF3) if rng.random() < 0.2]
        if rng.random() < 0.6:
            pfx.append(0x40 | rng.getrandbits(4))
        body = pfx + ESCAPES[omap] + [op]
    body += [rng.getrandbits(8) for _ in range(rng.randint(0, 3))]
    return body[:rng.randint(1, len(body))] if rng.random() < 0.1 else body


def test_decoder_differential_fuzz():
    rng = random.Random(2024)
    mismatches = 0
    for _ in range(3000):
        code = _biased_bytes(rng)
        spec = x86_decode(code).normalized().pack()
        dut = dut_decode(code).normalized().pack()
        mismatches += spec.value != dut.value
    assert mismatches == 0


def test_xlate_shrd_skeleton():
    instr = x86_decode(parse_hex_bytes("48 0F AC D1 10")).instr
    ops = [u.opcode for u in static_sequence(dut_xlate(instr))]
    assert ops == ["MOVSX", "MOVZX", "AND", "MOV", "JE", "SUB", "SHR", "AND", "AND",
                   "SHR", "SHL", "OR", "ROR", "OR"]
