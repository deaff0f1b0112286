import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from premir import folding
from premir.errors import ValidationError
from premir.folding import nussinov_fold, parse_dotbracket, to_pair_table, from_pair_table
from premir.seqdata import Dataset, Sample

from oracles import all_codes, max_pairs_bruteforce, random_structure


def test_fold_no_pairs():
    assert nussinov_fold("AAAA") == "...."


def test_fold_hairpin():
    assert nussinov_fold("GGGAAAACCC") == "(((....)))"


def test_fold_short_sequences():
    assert nussinov_fold("G") == "."
    assert nussinov_fold("GAAC") == "...."  # loop of 2 is below the minimum
    assert nussinov_fold("GAAAC") == "(...)"


def test_fold_respects_min_loop_and_alphabet(gen):
    for _ in range(50):
        seq = "".join(gen.choice(list("ACGU"), int(gen.integers(1, 60))))
        s = nussinov_fold(seq)
        assert len(s) == len(seq)
        for i, j in s.pairs:
            assert j - i - 1 >= folding.MIN_LOOP
            assert folding.can_pair(seq[i], seq[j])


def test_fold_min_loop_configurable():
    assert nussinov_fold("GAAC", min_loop=2) == "(..)"


@pytest.mark.parametrize("length", range(1, 8))
def test_fold_optimal_exhaustive(length):
    codes = all_codes(length)
    expected = max_pairs_bruteforce(codes)
    got = [nussinov_fold("".join("ACGU"[c] for c in row)).n_pairs for row in codes]
    assert np.array_equal(got, expected)


def test_fold_optimal_random_length_12(gen):
    codes = gen.integers(0, 4, (60, 12))
    expected = max_pairs_bruteforce(codes)
    got = [nussinov_fold("".join("ACGU"[c] for c in row)).n_pairs for row in codes]
    assert np.array_equal(got, expected)


def test_fold_deterministic(gen):
    seq = "".join(gen.choice(list("ACGU"), 80))
    assert nussinov_fold(seq) == nussinov_fold(seq)


def test_fold_tie_break_prefers_unpaired_3prime():
    # GGAAAC has two optimal single pairs: G0-C5 and G1-C5. The 3' base is
    # paired either way, and the smallest partner index wins.
    assert nussinov_fold("GGAAAC") == "(....)"
    # here leaving the last base unpaired is still optimal
    assert nussinov_fold("GAAACC") == "(...)."


def test_parse_valid():
    s = parse_dotbracket("((..))")
    assert s.pairs == [(0, 5), (1, 4)]


@pytest.mark.parametrize("text,pos", [("((.)", "4"), (").(", "0"), ("(.x)", "2")])
def test_parse_errors(text, pos):
    with pytest.raises(ValidationError, match=f"position {pos}"):
        parse_dotbracket(text)


def test_pair_table():
    assert to_pair_table("....") == [None] * 4
    assert to_pair_table("(())") == [3, 2, 1, 0]


@given(st.integers(0, 200), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_pair_table_round_trip(n, seed):
    s = random_structure(np.random.default_rng(seed), n)
    table = to_pair_table(parse_dotbracket(s))
    for i, j in enumerate(table):
        if j is not None:
            assert table[j] == i and j != i
    assert from_pair_table(table) == s
    assert parse_dotbracket(str(parse_dotbracket(s))) == s


def test_pair_table_rejects_crossing():
    with pytest.raises(ValidationError):
        from_pair_table([2, 3, 0, 1])


def _data(*pairs):
    return Dataset(tuple(Sample(i, s, 1) for i, s in pairs))


def test_vienna_strips_energy(write_file):
    data = _data(("a", "GGGAAAACCCA"))
    p = write_file("s.txt", ">a\nGGGAAAACCCA\n(((....))). ( -1.20)\n")
    assert folding.load_vienna(p, data) == {"a": "(((....)))."}


def test_vienna_length_mismatch(write_file):
    data = _data(("a", "GGGAAAACCCA"))
    p = write_file("s.txt", ">a\nGGGAAAACCCA\n(((....)))\n")
    with pytest.raises(ValidationError, match="'a'"):
        folding.load_vienna(p, data)


def test_vienna_fallback_and_unknown(write_file, caplog):
    seqs = [("s1", "GGGAAAACCC"), ("s2", "AAAA"), ("s3", "GGGGAAAACCCC"), ("s4", "GCAUGC"), ("s5", "GAAAC")]
    data = _data(*seqs)
    text = "".join(f">{i}\n{s}\n{'.' * len(s)}\n" for i, s in seqs[:3]) + ">zz\nAAA\n...\n"
    p = write_file("s.txt", text)
    out = folding.load_vienna(p, data)
    assert len(out) == 5
    assert out["s1"] == ".........." and out["s3"] == "." * 12
    assert out["s5"] == nussinov_fold("GAAAC") == "(...)"
    assert "zz" in caplog.text
