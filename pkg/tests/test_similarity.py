import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metaslice.similarity import (FunctionSet, InstanceView, SimilarityReport,
                                  best_match, jaccard, similarity_index)


def fset(indices, num_slots=9):
    return FunctionSet.from_slot_indices(indices, num_slots)


class TestJaccard:
    def test_identical_nontrivial(self):
        assert jaccard(np.array([1]), np.array([1])) == 1.0

    def test_both_trivial_is_zero(self):
        assert jaccard(np.array([0]), np.array([0])) == 0.0

    def test_partial_overlap(self):
        # dot = 1, norms 1 + 2, so 1 / (1 + 2 - 1)
        assert jaccard(np.array([1, 0]), np.array([1, 1])) == 0.5

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            jaccard(np.array([1, 0]), np.array([1]))

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_symmetry_exhaustive(self, k):
        vectors = [np.array(bits) for bits in itertools.product((0, 1), repeat=k)]
        for a, b in itertools.product(vectors, repeat=2):
            assert jaccard(a, b) == jaccard(b, a)

    @given(st.integers(1, 6), st.data())
    def test_bounds_and_identity(self, k, data):
        bits = st.lists(st.integers(0, 1), min_size=k, max_size=k)
        a = np.array(data.draw(bits))
        b = np.array(data.draw(bits))
        val = jaccard(a, b)
        assert 0.0 <= val <= 1.0
        if a.any():
            assert jaccard(a, a) == 1.0


class TestSimilarityIndex:
    def test_identical_sets_below_cap(self):
        req = fset([0, 4, 8])
        counts = np.zeros(9, dtype=int)
        j, shareable = similarity_index(req, req, counts, cap=8)
        assert j == pytest.approx(3 / 9)
        assert shareable == frozenset({0, 4, 8})

    def test_disjoint_sets(self):
        j, shareable = similarity_index(fset([0, 1, 2]), fset([3, 4, 5]),
                                        np.zeros(9, dtype=int), cap=8)
        assert j == 0.0
        assert shareable == frozenset()

    def test_all_slots_at_cap(self):
        req = fset([0, 4, 8])
        counts = np.full(9, 8)
        j, shareable = similarity_index(req, req, counts, cap=8)
        assert j == 0.0
        assert shareable == frozenset()

    def test_capacity_unaware_keeps_score_but_not_shareability(self):
        req = fset([0, 4, 8])
        counts = np.full(9, 8)
        j, shareable = similarity_index(req, req, counts, cap=8, capacity_aware=False)
        assert j == pytest.approx(3 / 9)
        assert shareable == frozenset()

    @given(st.data())
    @settings(max_examples=60)
    def test_monotone_in_share_counts(self, data):
        num_slots = data.draw(st.integers(1, 6))
        idx = st.lists(st.integers(0, num_slots - 1), unique=True, max_size=num_slots)
        req = fset(data.draw(idx), num_slots)
        inst = fset(data.draw(idx), num_slots)
        cap = data.draw(st.integers(1, 4))
        counts = np.array(data.draw(st.lists(st.integers(0, 4), min_size=num_slots,
                                             max_size=num_slots)))
        bump = np.array(data.draw(st.lists(st.integers(0, 3), min_size=num_slots,
                                           max_size=num_slots)))
        j_low, _ = similarity_index(req, inst, counts, cap)
        j_high, _ = similarity_index(req, inst, counts + bump, cap)
        assert j_high <= j_low + 1e-12


class TestBestMatch:
    def test_empty_system(self):
        report = best_match(fset([0, 1, 2]), [], cap=8)
        assert report.best_instance_id is None
        assert report.similarity == 0.0

    def test_picks_higher_index(self):
        req = fset([0, 1, 2])
        views = [
            InstanceView(0, fset([0, 1, 5]), np.zeros(9, dtype=int)),  # 2 of 3 shared
            InstanceView(1, fset([0, 1, 2]), np.zeros(9, dtype=int)),  # all shared
        ]
        report = best_match(req, views, cap=8)
        assert report.best_instance_id == 1
        assert report.similarity == pytest.approx(3 / 9)

    def test_tie_breaks_to_lowest_id(self):
        req = fset([0, 1, 2])
        views = [
            InstanceView(7, fset([0, 1, 6]), np.zeros(9, dtype=int)),
            InstanceView(3, fset([1, 2, 7]), np.zeros(9, dtype=int)),
        ]
        report = best_match(req, views, cap=8)
        assert report.best_instance_id == 3
        assert report.similarity == pytest.approx(2 / 9)

    def test_all_zero_similarity_is_no_match(self):
        report = best_match(fset([0]), [InstanceView(0, fset([5]), np.zeros(9, int))],
                            cap=8)
        assert report.best_instance_id is None

    @given(st.data())
    @settings(max_examples=50)
    def test_matches_bruteforce_max(self, data):
        num_slots = data.draw(st.integers(2, 6))
        idx = st.lists(st.integers(0, num_slots - 1), unique=True, min_size=1,
                       max_size=num_slots)
        cap = data.draw(st.integers(1, 3))
        req = fset(data.draw(idx), num_slots)
        views = []
        for i in range(data.draw(st.integers(0, 4))):
            counts = np.array(data.draw(st.lists(st.integers(0, 3), min_size=num_slots,
                                                 max_size=num_slots)))
            views.append(InstanceView(i, fset(data.draw(idx), num_slots), counts))
        report = best_match(req, views, cap)
        scores = [similarity_index(req, v.functions, v.share_counts, cap)[0]
                  for v in views]
        best = max(scores, default=0.0)
        assert report.similarity == pytest.approx(best)
        if best > 0:
            assert report.best_instance_id == int(np.argmax(scores))
