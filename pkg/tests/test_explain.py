from math import comb

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfxeval import (
    DataError,
    Explanation,
    enumerate_candidates,
    select_baseline_items,
    select_triple,
)


def expl(items, user=1, rec=99):
    return Explanation(user, rec, frozenset(items))


class TestEnumerateCandidates:
    def test_nine_choose_three(self):
        cs = enumerate_candidates(1, 99, list(range(1, 10)), k=3)
        assert len(cs.candidates) == 84
        assert comb(9, 3) == 84

    def test_k_equals_history_size(self):
        cs = enumerate_candidates(1, 99, [4, 2, 7], k=3)
        assert cs.candidates == (expl({2, 4, 7}),)

    def test_k_one_lists_singletons_in_order(self):
        cs = enumerate_candidates(1, 99, [5, 3, 8], k=1)
        assert [c.key() for c in cs.candidates] == [(3,), (5,), (8,)]

    def test_lexicographic_order(self):
        cs = enumerate_candidates(1, 99, [1, 2, 3, 4], k=2)
        assert [c.key() for c in cs.candidates] == [
            (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]

    def test_k_too_large_errors(self):
        with pytest.raises(DataError):
            enumerate_candidates(1, 99, [1, 2], k=3)

    def test_k_zero_errors(self):
        with pytest.raises(DataError):
            enumerate_candidates(1, 99, [1, 2], k=0)


class TestSelectTriple:
    def test_hand_example(self):
        scored = [(expl({1}), 0.9), (expl({2}), 0.1), (expl({3}), 0.5)]
        triple = select_triple(scored, "cf")
        assert triple.high == expl({1})
        assert triple.low == expl({2})
        assert triple.mean == expl({3})  # mean is 0.5 exactly
        assert triple.scores == (0.9, 0.5, 0.1)

    def test_all_equal_collapses_to_smallest_key(self):
        scored = [(expl({3}), 0.4), (expl({1}), 0.4), (expl({2}), 0.4)]
        triple = select_triple(scored)
        assert triple.high == triple.mean == triple.low == expl({1})

    def test_equidistant_from_mean_prefers_smaller_key(self):
        # mean is 0.5; both 0.4 and 0.6 are 0.1 away
        scored = [(expl({7}), 0.6), (expl({2}), 0.4), (expl({5}), 0.5),
                  (expl({9}), 0.5)]
        triple = select_triple(scored)
        assert triple.mean == expl({5})

    def test_high_tie_broken_by_key(self):
        # keys: (2,3) < (2,9); the 1.0 score ties between them
        scored = [(expl({2, 9}), 1.0), (expl({2, 3}), 1.0), (expl({1}), 0.0)]
        assert select_triple(scored).high == expl({2, 3})

    def test_empty_errors(self):
        with pytest.raises(DataError):
            select_triple([])

    def test_out_of_order_scores_rejected(self):
        from cfxeval import SelectionTriple
        with pytest.raises(DataError):
            SelectionTriple(expl({1}), expl({2}), expl({3}), "cf",
                            (0.1, 0.5, 0.9))

    @given(seed=st.integers(0, 500))
    @settings(max_examples=50, deadline=None)
    def test_permutation_invariant(self, seed):
        import random
        rng = random.Random(seed)
        scored = [(expl({i}), rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]))
                  for i in range(1, 8)]
        shuffled = scored[:]
        rng.shuffle(shuffled)
        assert select_triple(scored) == select_triple(shuffled)


class TestSelectBaselineItems:
    HISTORY = list(range(1, 10))
    SCORES = {i: i / 10.0 for i in range(1, 10)}  # score grows with id

    def test_high_takes_top_three(self):
        assert select_baseline_items(self.HISTORY, self.SCORES, 3, "high") == (7, 8, 9)

    def test_low_takes_bottom_three(self):
        assert select_baseline_items(self.HISTORY, self.SCORES, 3, "low") == (1, 2, 3)

    def test_mean_takes_central_three(self):
        # mean score is 0.5, nearest are items 5, 4, 6
        assert select_baseline_items(self.HISTORY, self.SCORES, 3, "mean") == (4, 5, 6)

    def test_k_equals_history_gives_everything(self):
        for level in ("high", "mean", "low"):
            assert select_baseline_items(self.HISTORY, self.SCORES, 9, level) == \
                tuple(range(1, 10))

    def test_ties_broken_by_ascending_id(self):
        scores = {1: 0.5, 2: 0.5, 3: 0.5, 4: 0.0}
        assert select_baseline_items([1, 2, 3, 4], scores, 2, "high") == (1, 2)

    def test_unknown_level_errors(self):
        with pytest.raises(DataError):
            select_baseline_items([1], {1: 0.5}, 1, "median")

    def test_k_too_large_errors(self):
        with pytest.raises(DataError):
            select_baseline_items([1, 2], {1: 0.1, 2: 0.2}, 3, "high")

    def test_missing_score_errors(self):
        with pytest.raises(DataError, match="2"):
            select_baseline_items([1, 2], {1: 0.1}, 1, "high")

    @given(seed=st.integers(0, 200))
    @settings(max_examples=40, deadline=None)
    def test_history_order_irrelevant(self, seed):
        import random
        rng = random.Random(seed)
        hist = list(range(1, 8))
        scores = {i: rng.random() for i in hist}
        shuffled = hist[:]
        rng.shuffle(shuffled)
        for level in ("high", "mean", "low"):
            assert select_baseline_items(hist, scores, 3, level) == \
                select_baseline_items(shuffled, scores, 3, level)

    def test_groups_partition_under_distinct_scores(self):
        hi = select_baseline_items(self.HISTORY, self.SCORES, 3, "high")
        lo = select_baseline_items(self.HISTORY, self.SCORES, 3, "low")
        assert not set(hi) & set(lo)


class TestCandidateSetInvariant:
    def test_duplicate_sets_rejected(self):
        from cfxeval import CandidateSet
        dup = (expl({1, 2}), expl({2, 1}))
        with pytest.raises(DataError):
            CandidateSet(1, 99, 2, dup)
