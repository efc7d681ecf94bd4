import math

import pytest

import oracles
from usfkit.errors import ConfigError
from usfkit.fst import build_unigram_fst
from usfkit.lab import (
    EmissionModel,
    Lexicon,
    beam_search,
    format_report_tsv,
    read_emission_model,
    search_error_report,
    word_posterior_max,
    word_posterior_sum,
    write_emission_model,
)

END = "</s>"


def worked_instance():
    """Two-step model where max decoding picks 'ad' but the summed posterior
    prefers 'ab'; sequence probabilities are proportional to 0.4 / 0.25 / 0.45."""
    units = ["a", "ab", "ad", "b", "d", END]
    rows = [
        [1 / 3, 4 / 15, 3 / 10, 0.04, 0.04, 0.02],
        [0.08, 0.08, 0.08, 0.25, 0.01, 0.50],
    ]
    em = EmissionModel.from_probs(units, rows, end_unit=END)
    lex = Lexicon.build(["ab", "ad", "b"], em.segmentation_inventory())
    return em, lex


def random_model(rng, steps, units):
    rows = []
    for _ in range(steps):
        raw = [rng.uniform(0.05, 1.0) for _ in units]
        total = sum(raw)
        rows.append([x / total for x in raw])
    return EmissionModel.from_probs(units, rows, end_unit=units[-1])


def test_seq_logprob_uniform():
    em = EmissionModel.from_probs(["a", "b"], [[0.5, 0.5], [0.5, 0.5]], end_unit="b")
    assert em.seq_logprob(["a", "a"]) == pytest.approx(2 * math.log(0.5), abs=1e-12)


def test_seq_logprob_empty_is_end_padding():
    em = EmissionModel.from_probs(["a", "b"], [[0.25, 0.75], [0.5, 0.5]], end_unit="b")
    assert em.seq_logprob([]) == pytest.approx(math.log(0.75) + math.log(0.5), abs=1e-12)


def test_seq_logprob_errors():
    em = EmissionModel.from_probs(["a", "b"], [[0.5, 0.5]], end_unit="b")
    with pytest.raises(ValueError):
        em.seq_logprob(["a", "a"])
    with pytest.raises(ValueError):
        em.seq_logprob(["z"])


def test_row_normalization_enforced():
    with pytest.raises(ConfigError):
        EmissionModel(["a", "b"], [[math.log(0.5), math.log(0.4)]])


def test_total_mass_is_one(rng):
    for steps, n_units in [(2, 2), (3, 3), (6, 4), (4, 4)]:
        units = [f"u{k}" for k in range(n_units - 1)] + [END]
        em = random_model(rng, steps, units)
        mass = sum(
            math.exp(em.seq_logprob(seq))
            for seq in oracles.all_unit_sequences(units, steps)
        )
        assert mass == pytest.approx(1.0, abs=1e-9)


def test_posterior_sum_worked_instance():
    em, lex = worked_instance()
    # proportional to log 0.65: the 1/3 scale cancels nothing, only shifts
    want = oracles.logsumexp_naive([em.seq_logprob(["ab"]), em.seq_logprob(["a", "b"])])
    got = word_posterior_sum(em, lex, "ab")
    assert got == pytest.approx(want, abs=1e-12)
    assert got == pytest.approx(math.log(13 / 60), abs=1e-12)


def test_posterior_max_worked_instance():
    em, lex = worked_instance()
    assert word_posterior_max(em, lex, "ab") == pytest.approx(math.log(2 / 15), abs=1e-12)
    assert word_posterior_max(em, lex, "ad") == pytest.approx(math.log(3 / 20), abs=1e-12)


def test_single_segmentation_word_sum_equals_max():
    em, lex = worked_instance()
    assert word_posterior_sum(em, lex, "b") == word_posterior_max(em, lex, "b")


def test_posterior_unknown_word():
    em, lex = worked_instance()
    with pytest.raises(ValueError):
        word_posterior_sum(em, lex, "zz")


def test_sum_dominates_max_randomized(rng):
    units = ["a", "b", "ab", END]
    lex_words = ["ab", "aab", "b", "ba"]
    for _ in range(300):
        em = random_model(rng, rng.randint(3, 5), units)
        lex = Lexicon.build(lex_words, em.segmentation_inventory())
        for w in lex.words:
            assert word_posterior_sum(em, lex, w) >= word_posterior_max(em, lex, w)


def test_posterior_sum_matches_bruteforce(rng):
    units = ["a", "b", "ab", "ba", END]
    inv_units = [u for u in units if u != END]
    for _ in range(50):
        em = random_model(rng, 4, units)
        word = "".join(rng.choice("ab") for _ in range(rng.randint(1, 4)))
        lex = Lexicon.build([word], em.segmentation_inventory())
        segs = oracles.brute_force_segmentations(word, inv_units)
        scores = [em.seq_logprob(s) for s in segs if len(s) <= em.steps]
        assert word_posterior_sum(em, lex, word) == pytest.approx(
            oracles.logsumexp_naive(scores), abs=1e-9
        )


def _oracle_best_word(em, lex, rewards=None, alpha=0.0):
    """Exhaustive max decoding with optional word rewards."""
    best = {}
    for seq in oracles.all_unit_sequences(em.units, em.steps):
        seq = list(seq)
        k = len(seq)
        while k and seq[k - 1] == em.end_unit:
            k -= 1
        prefix = seq[:k]
        if not prefix or em.end_unit in prefix:
            continue
        word = "".join(prefix)
        if word not in lex.segmentations:
            continue
        score = em.seq_logprob(seq)
        if rewards:
            score += alpha * rewards.get(word, 0.0)
        if word not in best or score > best[word]:
            best[word] = score
    return min(best, key=lambda w: (-best[w], w))


def test_beam_exhaustive_equals_bruteforce(rng):
    units = ["a", "b", "ab", END]
    for _ in range(25):
        em = random_model(rng, rng.randint(2, 4), units)
        lex = Lexicon.build(["ab", "b", "ba", "aa"], em.segmentation_inventory())
        width = len(units) ** em.steps
        out = beam_search(em, lex, beam_width=width)
        assert out.hyps[0].words[0] == _oracle_best_word(em, lex)


def test_worked_instance_decisions():
    em, lex = worked_instance()
    width = len(em.units) ** em.steps
    # max decoding picks the single-path competitor
    out = beam_search(em, lex, beam_width=width)
    assert out.hyps[0].words == ("ad",)
    # the summed posterior prefers the two-path word
    sums = {w: word_posterior_sum(em, lex, w) for w in lex.words}
    assert max(sums, key=sums.get) == "ab"


def test_worked_instance_flip_threshold():
    em, lex = worked_instance()
    fst = build_unigram_fst({"ab"}, arc_weight=-1.0)
    width = len(em.units) ** em.steps
    threshold = math.log(0.45 / 0.4)
    below = beam_search(em, lex, width, fusion=(fst, threshold - 1e-3))
    above = beam_search(em, lex, width, fusion=(fst, threshold + 1e-3))
    assert below.hyps[0].words == ("ad",)
    assert above.hyps[0].words == ("ab",)


def test_worked_instance_flip_with_subword_fst():
    em, lex = worked_instance()
    inv = em.segmentation_inventory()
    fst = build_unigram_fst({"ab"}, arc_weight=-1.0, level="subword", inventory=inv)
    width = len(em.units) ** em.steps
    out = beam_search(em, lex, width, fusion=(fst, 0.25))
    assert out.hyps[0].words == ("ab",)


def test_beam_width_one_runs():
    em, lex = worked_instance()
    out = beam_search(em, lex, beam_width=1)
    assert len(out.hyps) <= 1


def test_beam_fused_score_consistency(rng):
    em, lex = worked_instance()
    fst = build_unigram_fst({"ab"}, arc_weight=-1.0)
    width = len(em.units) ** em.steps
    out = beam_search(em, lex, width, fusion=(fst, 0.5))
    for h in out.hyps:
        assert h.combined == pytest.approx(
            h.base_logprob + 0.5 * fst.score_sequence(h.words), abs=1e-12
        )


def test_search_error_report_worked_instance():
    em, lex = worked_instance()
    fst = build_unigram_fst({"ab"}, arc_weight=-1.0)
    report = search_error_report(em, lex, fst, alphas=(0.25, 0.5, 0.75, 1.0, 2.0))
    assert report.sum_decision == "ab"
    assert report.max_decision == "ad"
    rows = {r.word: r for r in report.rows}
    assert rows["ab"].is_search_error
    assert rows["ab"].repair_alpha == 0.25
    assert rows["ab"].n_segs == 2
    assert rows["b"].gap == 0.0
    assert not rows["b"].is_search_error
    assert not rows["ad"].is_search_error


def test_search_error_report_no_fst_unrepaired():
    em, lex = worked_instance()
    report = search_error_report(em, lex, None)
    rows = {r.word: r for r in report.rows}
    assert rows["ab"].is_search_error
    assert rows["ab"].repair_alpha is None
    text = format_report_tsv(report)
    assert "unrepaired" in text
    assert text.splitlines()[0] == "word\tn_segs\tlogp_sum\tlogp_max\tgap\tflipped_by_alpha"


def test_flagged_errors_have_gap_and_multiple_segmentations(rng):
    units = ["a", "b", "ab", END]
    words = ["ab", "b", "aa", "ba"]
    flagged_seen = 0
    for _ in range(100):
        em = random_model(rng, 3, units)
        lex = Lexicon.build(words, em.segmentation_inventory())
        report = search_error_report(em, lex, None)
        for row in report.rows:
            if row.is_search_error:
                flagged_seen += 1
                assert row.gap > 0.0
                assert row.n_segs >= 2
    assert flagged_seen > 0  # the property must actually get exercised


def test_single_segmentation_never_flagged(rng):
    units = ["a", "b", END]
    # every word over single-character units has exactly one segmentation
    for _ in range(20):
        em = random_model(rng, 3, units)
        lex = Lexicon.build(["a", "b", "ab", "ba"], em.segmentation_inventory())
        report = search_error_report(em, lex, None)
        for row in report.rows:
            assert row.n_segs == 1
            assert row.gap == 0.0
            assert not row.is_search_error


def test_emission_model_file_round_trip(tmp_path):
    em, _ = worked_instance()
    path = tmp_path / "model.json"
    write_emission_model(em, path)
    back = read_emission_model(path)
    assert back.units == em.units
    assert back.end_unit == em.end_unit
    assert back.seq_logprob(["ab"]) == em.seq_logprob(["ab"])
    first = path.read_bytes()
    write_emission_model(back, path)
    assert path.read_bytes() == first
