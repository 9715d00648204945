import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from procfuzz import isa
from procfuzz.stimulus import (ARITH_MAX, CI_WORDS, DISCARD, KEEP, TI_COUNT, Corpus, MalformedProgram,
                               Program, arith, gather, gen_seed, mutate, mutate_word, retain, scatter,
                               select_im)
from procfuzz.weights import ALL_MUTATIONS, MutationId, WeightTable

# regression fixture: gen_seed(Random(42)) with uniform weights
GOLDEN_42 = (
    "c8d22d4724512be4",
    [0xf8a0b3, 0x536433, 0x1045ddb7, 0xe682b3, 0x1d5613, 0x8ee33, 0x5868aa93, 0x6ab6b3, 0x428b0313,
     0x76ec113, 0x1e9833ef, 0x16162b93, 0x1273133, 0xf73c2313, 0x41d55b93, 0x35e88683, 0xf5020b,
     0x6ca8ec13, 0x34119a73, 0x419a5133],
)

words = st.lists(st.integers(0, 0xFFFFFFFF), min_size=1, max_size=40)


def test_gen_seed_golden():
    p = gen_seed(random.Random(42))
    assert p.digest() == GOLDEN_42[0]
    assert list(p.ti_words) == GOLDEN_42[1]


@settings(max_examples=200)
@given(st.integers(0, 2**32))
def test_gen_seed_shape(seed):
    p = gen_seed(random.Random(seed))
    assert len(p.ti_words) == TI_COUNT
    assert p.ci_words == CI_WORDS
    for w in p.ti_words[:10]:
        assert isa.decode(w).mnemonic in isa.MINIRV.safe_ops
    for w in p.ti_words:
        assert isa.decode(w) is not None


def test_gen_seed_respects_weights():
    w = WeightTable.from_pairs([("MAC", MutationId.M0), ("SW", MutationId.M3)])
    rng = random.Random(1)
    for _ in range(50):
        p = gen_seed(rng, w)
        assert {isa.decode(x).mnemonic for x in p.ti_words[10:]} <= {"MAC", "SW"}


def test_empty_weights_fall_back_to_all_ops():
    p = gen_seed(random.Random(0), WeightTable.from_pairs([]))
    assert len(p.ti_words) == TI_COUNT


@settings(max_examples=300)
@given(words, words)
def test_thzi_roundtrip(ci, ti):
    p = Program(tuple(ci), tuple(ti))
    assert Program.from_bytes(p.to_bytes()) == p


def test_thzi_layout():
    p = Program((0x11111111,), (0x22222222, 0x33333333))
    assert p.to_bytes() == b"THZI\x01\x01\x00\x02\x00" + struct.pack("<3I", 0x11111111, 0x22222222, 0x33333333)


@pytest.mark.parametrize("data", [
    b"THZ",
    b"XXXX\x01\x00\x00\x00\x00",
    b"THZI\x02\x00\x00\x00\x00",
    b"THZI\x01\x01\x00\x01\x00\x13\x00\x00\x00",
])
def test_malformed_files_rejected(data):
    with pytest.raises(MalformedProgram):
        Program.from_bytes(data)


def test_image_layout():
    p = gen_seed(random.Random(0))
    img = p.image()
    assert struct.unpack_from("<I", img, 0x400)[0] == p.ti_words[0]
    assert struct.unpack_from("<I", img, 0x200)[0] == p.ci_words[0]
    assert p.halt_pc == 0x200 + 4 * (len(p.ci_words) - 1)


def test_gather_scatter_inverse():
    rng = random.Random(0)
    for _ in range(1000):
        w, m = rng.getrandbits(32), rng.getrandbits(32)
        assert scatter(gather(w, m), w, m) == w
        v = rng.getrandbits(m.bit_count()) if m else 0
        assert gather(scatter(v, w, m), m) == v


def test_arith_wraps_inside_window():
    word = isa.encode("ADDI", rd=1, rs1=2, imm=2047)
    mask = isa.data_mask(word)
    out = arith(word, 3, 1, 1, mask)
    assert out & ~mask == word & ~mask


@pytest.mark.parametrize("m", list(ALL_MUTATIONS))
def test_mutation_contract(m):
    rng = random.Random(int(m))
    for _ in range(1000):
        word = rng.getrandbits(32) if rng.random() < 0.3 else isa.encode(
            *_random_legal(rng))
        out, detail = mutate_word(word, m, rng, others=(0x13, 0x6F))
        if m.data_only:
            assert isa.opcode_mask(word) & (out ^ word) == 0
        if m in (MutationId.M5, MutationId.M6, MutationId.M7) and detail:
            assert -ARITH_MAX <= detail["delta"] <= ARITH_MAX
        if m == MutationId.M11:
            assert isa.data_mask(word) & (out ^ word) == 0
        if m == MutationId.M9:
            assert out == isa.NOP_WORD


def _random_legal(rng):
    from procfuzz.stimulus import random_operands
    name = rng.choice(isa.MINIRV.legal_ops)
    ops = random_operands(name, rng)
    return (name,) if not ops else (name, ops.get("rd", 0), ops.get("rs1", 0), ops.get("rs2", 0), ops.get("imm", 0))


def test_mutate_bounds_and_immutability():
    p = gen_seed(random.Random(0))
    q = mutate(p, 3, MutationId.M9, random.Random(0))
    assert q.ti_words[3] == isa.NOP_WORD and p.ti_words[3] != isa.NOP_WORD
    with pytest.raises(IndexError):
        mutate(p, TI_COUNT, MutationId.M0, random.Random(0))


def test_select_im_respects_weights():
    w = WeightTable.from_pairs([("ADD", MutationId.M4)])
    rng = random.Random(2)
    p = Program.with_tis([isa.encode("ADD", rd=1, rs1=2, rs2=3)] + [isa.NOP_WORD] * 19)
    picks = [select_im(w, rng, p) for _ in range(400)]
    assert {m for idx, name, m in picks if idx == 0} == {MutationId.M4}
    # unweighted instructions fall back to every mutation
    assert len({m for idx, name, m in picks if idx != 0}) == len(ALL_MUTATIONS)


def test_corpus_fifo_and_retain(tmp_path):
    c = Corpus(tmp_path)
    a, b = gen_seed(random.Random(1)), gen_seed(random.Random(2))
    assert retain(c, a, {1}) == KEEP
    assert retain(c, b, set()) == DISCARD
    c.add(b)
    assert [c.next()[1] for _ in range(3)] == [a, b, a]
    assert len(list(tmp_path.glob("*.thzi"))) == 2
    assert Program.load(c.path_of(0)) == a


def test_m5_plus_35_on_zero_byte():
    word = isa.encode("LUI", rd=0, imm=0)           # byte 3 is all immediate bits
    out = arith(word, 3, 1, 35, isa.data_mask(word))
    assert out >> 24 == 0x23 and out & 0xFFFFFF == word & 0xFFFFFF
