import math

import pytest
from hypothesis import given, strategies as st

import oracles
from usfkit.errors import (
    InventoryError,
    ParseError,
    SegmentationError,
    SegmentationOverflow,
)
from usfkit.vocab import (
    SubwordInventory,
    VocabCounts,
    count_unigrams,
    enumerate_segmentations,
    marginal_logprob,
    merge_counts,
    read_counts,
    read_inventory,
    select_band,
    viterbi_segmentation,
    write_counts,
    write_inventory,
)


def test_count_unigrams_hand_example():
    counts = count_unigrams(["play bacc", "play back"])
    assert counts.counts == {"play": 2, "bacc": 1, "back": 1}
    assert counts.total_tokens == 4
    assert counts.total_types == 3


def test_count_unigrams_empty():
    counts = count_unigrams([])
    assert counts.counts == {}
    assert counts.total_tokens == 0


def test_count_unigrams_matches_reference_counter(rng):
    vocab = [f"w{k}" for k in range(50)]
    lines = [" ".join(rng.choice(vocab) for _ in range(rng.randint(1, 12))) for _ in range(10_000)]
    assert count_unigrams(lines).counts == oracles.count_tokens(lines)


def test_count_unigrams_order_independent(rng):
    lines = [f"w{rng.randint(0, 20)} w{rng.randint(0, 20)}" for _ in range(500)]
    shuffled = list(lines)
    rng.shuffle(shuffled)
    assert count_unigrams(lines).counts == count_unigrams(shuffled).counts


def test_count_lowercase_switch():
    counts = count_unigrams(["Bacc bacc"], lowercase=True)
    assert counts.counts == {"bacc": 2}
    counts = count_unigrams(["Bacc bacc"])
    assert counts.counts == {"Bacc": 1, "bacc": 1}


def test_merge_counts_commutative_associative(rng):
    a = count_unigrams([f"w{rng.randint(0, 9)}" for _ in range(100)])
    b = count_unigrams([f"w{rng.randint(0, 9)}" for _ in range(100)])
    c = count_unigrams([f"w{rng.randint(0, 9)}" for _ in range(100)])
    assert merge_counts(a, b).counts == merge_counts(b, a).counts
    assert merge_counts(a, b).total_tokens == a.total_tokens + b.total_tokens
    assert (
        merge_counts(merge_counts(a, b), c).counts
        == merge_counts(a, merge_counts(b, c)).counts
    )


def test_vocab_counts_rejects_nonpositive():
    with pytest.raises(ValueError):
        VocabCounts({"a": 0})


def test_select_band_example():
    counts = VocabCounts({"a": 1, "b": 2, "c": 250, "d": 251})
    assert select_band(counts, n_thresh=250) == {"b", "c"}


def test_select_band_all_flag():
    counts = VocabCounts({"a": 1, "b": 2, "c": 250, "d": 251})
    assert select_band(counts, include_all_above_one=True) == {"b", "c", "d"}


def test_select_band_bad_threshold():
    with pytest.raises(ValueError):
        select_band(VocabCounts({"a": 2}), n_thresh=1)


@given(
    st.dictionaries(st.text("abcde", min_size=1, max_size=4), st.integers(1, 600), max_size=60),
    st.integers(2, 500),
    st.integers(2, 500),
)
def test_band_monotone_and_no_singletons(raw, n1, n2):
    counts = VocabCounts(raw)
    lo, hi = sorted((n1, n2))
    band_lo, band_hi = select_band(counts, lo), select_band(counts, hi)
    assert band_lo <= band_hi
    assert all(counts[w] >= 2 for w in band_hi)
    assert band_hi <= select_band(counts, include_all_above_one=True)


def test_counts_file_round_trip(tmp_path, rng):
    counts = count_unigrams([f"w{rng.randint(0, 30)} x" for _ in range(200)])
    path = tmp_path / "counts.tsv"
    write_counts(counts, path)
    assert read_counts(path).counts == counts.counts
    first = path.read_bytes()
    write_counts(counts, path)
    assert path.read_bytes() == first


def test_read_counts_bad_line(tmp_path):
    path = tmp_path / "counts.tsv"
    path.write_text("play\t2\nbroken line\n")
    with pytest.raises(ParseError) as err:
        read_counts(path)
    assert err.value.line == 2


def test_inventory_requires_char_closure():
    with pytest.raises(InventoryError):
        SubwordInventory({"ab": -1.0, "a": -1.0})


def test_inventory_rejects_positive_logprob():
    with pytest.raises(InventoryError):
        SubwordInventory({"a": 0.5})


def test_inventory_log_uniform_default():
    inv = SubwordInventory.from_units(["a", "b", "ab"])
    assert inv.unit_logprob["a"] == pytest.approx(math.log(1 / 3))


def test_inventory_file_round_trip(tmp_path):
    inv = SubwordInventory({"a": -1.0, "b": -0.5, "ab": -1.25})
    path = tmp_path / "inv.tsv"
    write_inventory(inv, path)
    assert read_inventory(path).unit_logprob == inv.unit_logprob


def test_enumerate_ab(ab_inventory):
    segs = enumerate_segmentations("ab", ab_inventory)
    assert {s.units for s in segs} == {("ab",), ("a", "b")}


def test_enumerate_aaa_count():
    inv = SubwordInventory({"a": -1.0, "aa": -1.0})
    segs = enumerate_segmentations("aaa", inv)
    assert len(segs) == 3
    assert {s.units for s in segs} == oracles.brute_force_segmentations("aaa", inv.units)


def test_enumerate_unknown_char(ab_inventory):
    with pytest.raises(SegmentationError):
        enumerate_segmentations("xyz", ab_inventory)


def test_enumerate_cap_overflow():
    inv = SubwordInventory({"a": -1.0, "aa": -1.0})
    word = "a" * 20
    with pytest.raises(SegmentationOverflow) as err:
        enumerate_segmentations(word, inv, cap=10)
    assert err.value.count > 10
    assert len(enumerate_segmentations(word, inv, cap=err.value.count)) == err.value.count


def test_enumerate_matches_brute_force(rng):
    for _ in range(60):
        alphabet = "ab" if rng.random() < 0.5 else "abc"
        n_multi = rng.randint(0, 5)
        units = set(alphabet)
        while len(units) < len(alphabet) + n_multi:
            length = rng.randint(2, 3)
            units.add("".join(rng.choice(alphabet) for _ in range(length)))
        inv = SubwordInventory.from_units(units)
        word = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 12)))
        got = {s.units for s in enumerate_segmentations(word, inv, cap=10_000)}
        assert got == oracles.brute_force_segmentations(word, inv.units)


def test_enumerate_logprob_is_unit_sum(ab_inventory):
    for seg in enumerate_segmentations("ab", ab_inventory):
        assert seg.logprob == pytest.approx(
            sum(ab_inventory.unit_logprob[u] for u in seg.units)
        )


def test_viterbi_prefers_higher_logprob(ab_inventory):
    seg = viterbi_segmentation("ab", ab_inventory)
    assert seg.units == ("ab",)
    assert seg.logprob == -1.5


def test_viterbi_single_char():
    inv = SubwordInventory({"a": -1.0})
    assert viterbi_segmentation("a", inv).units == ("a",)


def test_viterbi_tie_prefers_fewer_units():
    inv = SubwordInventory({"a": -1.0, "b": -1.0, "ab": -2.0})
    assert viterbi_segmentation("ab", inv).units == ("ab",)


def test_viterbi_tie_lexicographic():
    # both two-unit splits score -2: (a, bc) sorts before (ab, c)
    inv = SubwordInventory({"a": -1.0, "b": -1.0, "c": -1.0, "ab": -1.0, "bc": -1.0})
    assert viterbi_segmentation("abc", inv).units == ("a", "bc")


def test_viterbi_agrees_with_enumeration(rng):
    for _ in range(40):
        units = {"a", "b", "ab", "ba", "aa"}
        inv = SubwordInventory({u: -rng.uniform(0.1, 3.0) for u in units})
        word = "".join(rng.choice("ab") for _ in range(rng.randint(1, 9)))
        segs = enumerate_segmentations(word, inv, cap=10_000)
        best = max(s.logprob for s in segs)
        got = viterbi_segmentation(word, inv)
        assert got.logprob == pytest.approx(best, abs=1e-12)


def test_marginal_hand_example(ab_inventory):
    got = marginal_logprob("ab", ab_inventory)
    expected = oracles.logsumexp_naive([-1.5, -2.0])
    assert got == pytest.approx(expected, abs=1e-12)
    assert got == pytest.approx(-1.0258, abs=1e-3)


def test_marginal_unique_segmentation_equals_viterbi():
    inv = SubwordInventory({"a": -1.0, "b": -0.25})
    word = "abab"
    assert marginal_logprob(word, inv) == viterbi_segmentation(word, inv).logprob


def test_marginal_dominates_viterbi_randomized(rng):
    units = {"a", "b", "ab", "ba", "bb"}
    for _ in range(1000):
        inv = SubwordInventory({u: -rng.uniform(0.05, 4.0) for u in units})
        word = "".join(rng.choice("ab") for _ in range(rng.randint(1, 10)))
        marginal = marginal_logprob(word, inv)
        viterbi = viterbi_segmentation(word, inv).logprob
        assert marginal >= viterbi
        if len(enumerate_segmentations(word, inv, cap=10_000)) > 1:
            assert marginal > viterbi


def test_marginal_matches_enumeration(rng):
    units = {"a", "b", "c", "ab", "bc", "ca"}
    for _ in range(50):
        inv = SubwordInventory({u: -rng.uniform(0.1, 3.0) for u in units})
        word = "".join(rng.choice("abc") for _ in range(rng.randint(1, 10)))
        via_enum = oracles.logsumexp_naive(
            [s.logprob for s in enumerate_segmentations(word, inv, cap=10_000)]
        )
        assert marginal_logprob(word, inv) == pytest.approx(via_enum, abs=1e-9)
