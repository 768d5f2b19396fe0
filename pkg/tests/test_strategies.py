import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ualearn.strategies import (
    QueryScores,
    entropy_scores,
    least_confident_scores,
    margin_scores,
    select_top_k,
    vote_entropy_scores,
)

TWO_INSTANCE = np.array([[0.3, 0.4, 0.3], [0.4, 0.45, 0.15]])


def prob_rows(rng, n, c):
    raw = rng.uniform(0.01, 1.0, size=(n, c))
    return raw / raw.sum(axis=1, keepdims=True)


class TestWorkedExample:
    def test_least_confident_picks_first(self):
        qs = least_confident_scores(TWO_INSTANCE)
        np.testing.assert_allclose(qs.scores, [0.6, 0.55], atol=1e-12)
        assert qs.direction == "maximize"
        assert list(select_top_k(qs, 1)) == [0]

    def test_margin_picks_second(self):
        qs = margin_scores(TWO_INSTANCE)
        np.testing.assert_allclose(qs.scores, [0.1, 0.05], atol=1e-12)
        assert qs.direction == "minimize"
        assert list(select_top_k(qs, 1)) == [1]

    def test_entropy_picks_first(self):
        qs = entropy_scores(TWO_INSTANCE)
        np.testing.assert_allclose(
            qs.scores, [1.5709505944546684, 1.4577174691301484], atol=1e-12
        )
        assert list(select_top_k(qs, 1)) == [0]


class TestEdgeScores:
    def test_one_hot_rows(self):
        row = np.array([[0.0, 1.0, 0.0]])
        assert least_confident_scores(row).scores[0] == 0.0
        assert margin_scores(row).scores[0] == 1.0
        assert entropy_scores(row).scores[0] == 0.0

    def test_uniform_rows(self):
        row = np.ones((1, 3)) / 3.0
        assert least_confident_scores(row).scores[0] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert margin_scores(row).scores[0] == pytest.approx(0.0, abs=1e-12)
        assert entropy_scores(row).scores[0] == pytest.approx(1.584962500721156, abs=1e-12)

    def test_margin_needs_two_classes(self):
        with pytest.raises(ValueError):
            margin_scores(np.ones((2, 1)))

    def test_unnormalized_row_rejected(self):
        bad = np.array([[0.5, 0.4]])
        for fn in (least_confident_scores, margin_scores, entropy_scores):
            with pytest.raises(ValueError):
                fn(bad)

    def test_negative_entry_rejected(self):
        with pytest.raises(ValueError):
            entropy_scores(np.array([[1.2, -0.2]]))


class TestVoteEntropy:
    def test_full_agreement_is_zero(self):
        votes = np.array([[1, 1, 1], [0, 0, 0]])
        np.testing.assert_array_equal(vote_entropy_scores(votes, 3).scores, [0.0, 0.0])

    def test_two_one_split(self):
        votes = np.array([[0, 0, 1]])
        assert vote_entropy_scores(votes, 3).scores[0] == pytest.approx(
            0.9182958340544896, abs=1e-12
        )

    def test_maximal_disagreement(self):
        votes = np.array([[0, 1, 2]])
        assert vote_entropy_scores(votes, 3).scores[0] == pytest.approx(
            1.584962500721156, abs=1e-12
        )

    def test_committee_of_one_rejected(self):
        with pytest.raises(ValueError):
            vote_entropy_scores(np.array([[0], [1]]), 2)

    def test_votes_out_of_range(self):
        with pytest.raises(ValueError):
            vote_entropy_scores(np.array([[0, 3]]), 3)

    def test_float_votes_rejected(self):
        with pytest.raises(ValueError):
            vote_entropy_scores(np.array([[0.0, 1.0]]), 2)

    def test_relabeling_classes_keeps_scores(self):
        rng = np.random.default_rng(0)
        votes = rng.integers(0, 4, size=(12, 5))
        perm = np.array([3, 0, 2, 1])
        base = vote_entropy_scores(votes, 4).scores
        relabeled = vote_entropy_scores(perm[votes], 4).scores
        np.testing.assert_allclose(relabeled, base, atol=1e-12)


class TestSelectTopK:
    def test_tie_breaks_to_lowest_index(self):
        qs = QueryScores(scores=np.array([0.5, 0.5, 0.5]), direction="maximize")
        assert list(select_top_k(qs, 2)) == [0, 1]

    def test_k_larger_than_pool_saturates(self):
        qs = QueryScores(scores=np.array([0.1, 0.9, 0.5]), direction="maximize")
        assert list(select_top_k(qs, 10)) == [1, 2, 0]

    def test_minimize_direction(self):
        qs = QueryScores(scores=np.array([0.3, 0.1, 0.2]), direction="minimize")
        assert list(select_top_k(qs, 2)) == [1, 2]

    def test_k_must_be_positive(self):
        qs = QueryScores(scores=np.array([0.1]), direction="maximize")
        with pytest.raises(ValueError):
            select_top_k(qs, 0)

    def test_empty_scores_rejected(self):
        qs = QueryScores(scores=np.array([]), direction="maximize")
        with pytest.raises(ValueError):
            select_top_k(qs, 1)

    def test_nonfinite_scores_rejected(self):
        with pytest.raises(ValueError):
            QueryScores(scores=np.array([np.nan]), direction="maximize")


class TestProperties:
    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=50, deadline=None)
    def test_permutation_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        probs = prob_rows(rng, 8, 4)
        perm = rng.permutation(8)
        for scorer in (least_confident_scores, margin_scores, entropy_scores):
            base = scorer(probs)
            shuffled = scorer(probs[perm])
            np.testing.assert_allclose(shuffled.scores, base.scores[perm], atol=1e-12)
            chosen = perm[select_top_k(shuffled, 3)]
            np.testing.assert_array_equal(np.sort(chosen), np.sort(select_top_k(base, 3)))

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=50, deadline=None)
    def test_class_column_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        probs = prob_rows(rng, 6, 5)
        perm = rng.permutation(5)
        for scorer in (least_confident_scores, margin_scores, entropy_scores):
            np.testing.assert_allclose(
                scorer(probs[:, perm]).scores, scorer(probs).scores, atol=1e-12
            )

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=50, deadline=None)
    def test_binary_rankings_agree(self, seed):
        # On two classes every uncertainty score is a monotone function of
        # the max probability, so the full rankings coincide.
        rng = np.random.default_rng(seed)
        probs = prob_rows(rng, 10, 2)
        orders = [
            list(select_top_k(scorer(probs), 10))
            for scorer in (least_confident_scores, margin_scores, entropy_scores)
        ]
        assert orders[0] == orders[1] == orders[2]
