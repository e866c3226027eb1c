from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seqdecode import (
    SeededUnitEmbeddings,
    TableEmbeddings,
    bert_style_score,
    bleu,
    coverage_metric,
    occupancy_metric,
    toy_coverage,
    toy_occupancy,
)

THE, CAT, IS, ON, MAT = 0, 1, 2, 3, 4
REFERENCE = (THE, CAT, IS, ON, THE, MAT)  # "the cat is on the mat"


def brute_force_precision(candidate, reference, n):
    """Independent clipped-count oracle: scan positions, no Counter machinery."""
    cand_ngrams = [tuple(candidate[i : i + n]) for i in range(len(candidate) - n + 1)]
    ref_ngrams = [tuple(reference[i : i + n]) for i in range(len(reference) - n + 1)]
    if not cand_ngrams:
        return 0.0
    matched = 0
    for gram in set(cand_ngrams):
        matched += min(cand_ngrams.count(gram), ref_ngrams.count(gram))
    return matched / len(cand_ngrams)


class TestBleu:
    def test_identical_corpora(self):
        corpus = [(THE, CAT), (IS, ON, THE, MAT)]
        assert bleu(corpus, corpus, max_n=2) == 1.0

    def test_clipped_unigram_counts(self):
        # Seven repetitions of a token the reference holds twice: precision 2/7,
        # and the candidate is longer than the reference so no brevity penalty.
        assert bleu([(THE,) * 7], [REFERENCE], max_n=1) == pytest.approx(2 / 7, abs=1e-12)

    def test_empty_candidate(self):
        assert bleu([()], [REFERENCE]) == 0.0

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            bleu([], [])

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            bleu([(THE,)], [])

    def test_corpus_order_invariance(self):
        cands = [(THE, CAT), (ON, MAT), (IS, IS, THE)]
        refs = [(THE, CAT, IS), (ON, THE, MAT), (IS, THE)]
        forward = bleu(cands, refs, max_n=2)
        shuffled = bleu(cands[::-1], refs[::-1], max_n=2)
        assert forward == pytest.approx(shuffled, abs=1e-15)

    def test_brevity_penalty_applies_to_short_candidates(self):
        # Candidate half as long as the reference with perfect precision.
        score = bleu([(THE, CAT, IS)], [(THE, CAT, IS, ON, THE, MAT)], max_n=1)
        assert score == pytest.approx(np.exp(1 - 6 / 3), abs=1e-12)

    def test_agrees_with_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            cand = tuple(rng.integers(0, 4, size=rng.integers(1, 8)))
            ref = tuple(rng.integers(0, 4, size=rng.integers(1, 8)))
            for max_n in (1, 2, 3):
                precisions = [brute_force_precision(cand, ref, n) for n in range(1, max_n + 1)]
                if any(p == 0 for p in precisions):
                    expected = 0.0
                else:
                    bp = np.exp(min(0.0, 1.0 - len(ref) / len(cand)))
                    expected = bp * np.exp(np.mean(np.log(precisions)))
                assert bleu([cand], [ref], max_n=max_n) == pytest.approx(expected, abs=1e-9)


class TestBertStyleScore:
    def test_identical_sequences_score_one(self):
        emb = SeededUnitEmbeddings(dim=6, seed=3)
        assert bert_style_score((1, 2, 3), (1, 2, 3), emb) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_pair_scores_half(self):
        emb = TableEmbeddings({0: np.array([1.0, 0.0]), 1: np.array([0.0, 1.0])})
        assert bert_style_score((0,), (1,), emb) == pytest.approx(0.5, abs=1e-12)

    def test_order_insensitive_perfect_match(self):
        emb = TableEmbeddings({0: np.array([1.0, 0.0]), 1: np.array([0.0, 1.0])})
        assert bert_style_score((0, 1), (1, 0), emb) == pytest.approx(1.0, abs=1e-12)

    def test_empty_inputs_score_zero(self):
        emb = SeededUnitEmbeddings()
        assert bert_style_score((), (1,), emb) == 0.0
        assert bert_style_score((1,), (), emb) == 0.0

    def test_length_mismatch_penalized(self):
        emb = TableEmbeddings({0: np.array([1.0, 0.0]), 1: np.array([0.0, 1.0])})
        # One perfect aligned pair out of a length-3 candidate.
        assert bert_style_score((0, 0, 0), (0,), emb) == pytest.approx(1 / 3, abs=1e-12)

    def test_symmetry_for_equal_lengths(self):
        emb = SeededUnitEmbeddings(dim=4, seed=9)
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = tuple(rng.integers(0, 6, size=3))
            y = tuple(rng.integers(0, 6, size=3))
            assert bert_style_score(x, y, emb) == pytest.approx(
                bert_style_score(y, x, emb), abs=1e-12
            )

    @given(
        st.lists(st.integers(0, 9), max_size=5),
        st.lists(st.integers(0, 9), max_size=5),
    )
    def test_range(self, x, y):
        emb = SeededUnitEmbeddings(dim=3, seed=0)
        assert 0.0 <= bert_style_score(tuple(x), tuple(y), emb) <= 1.0

    def test_provider_determinism(self):
        a = SeededUnitEmbeddings(dim=5, seed=11)
        b = SeededUnitEmbeddings(dim=5, seed=11)
        for token in range(6):
            assert np.array_equal(a.vector(token), b.vector(token))


class TestToyMetrics:
    def test_occupancy(self):
        assert toy_occupancy((0, 0, 0), 0, 3) == 1.0
        assert toy_occupancy((), 0, 3) == 0.0
        assert toy_occupancy((1, 0), 0, 3) == pytest.approx(1 / 3)
        assert toy_occupancy((0,) * 9, 0, 3) == 1.0  # clamped

    def test_coverage(self):
        assert toy_coverage((0, 1, 5), (0, 1)) == 1.0
        assert toy_coverage((4, 5), (0, 1)) == 0.0
        assert toy_coverage((0, 0, 0), (0, 1)) == 0.5
        with pytest.raises(ValueError):
            toy_coverage((0,), ())

    def test_metric_wrappers_clamp_and_tag(self):
        occ = occupancy_metric(0, 2)
        cov = coverage_metric()
        assert not occ.privileged and not cov.privileged
        assert occ((9, 9), (0, 0, 0, 0)) == 1.0
        assert cov((0, 1), (1,)) == 0.5

    @given(st.lists(st.integers(0, 4), max_size=8))
    def test_occupancy_range(self, tokens):
        assert 0.0 <= toy_occupancy(tuple(tokens), 0, 3) <= 1.0
