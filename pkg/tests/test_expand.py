"""Monomial expansion against brute-force enumeration oracles."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zeromiss.expand import (
    DEDUP,
    MULTISET,
    ExpansionError,
    MonomialIndex,
    SparseVector,
    expanded_dimension,
    weight_column_names,
)


def oracle_monomials(d: int, degree: int, mode: str) -> list[tuple[int, ...]]:
    """All monomials in (size, lexicographic) order, by direct enumeration."""
    out: list[tuple[int, ...]] = []
    for k in range(degree + 1):
        if mode == DEDUP:
            out.extend(itertools.combinations(range(d), k))
        else:
            out.extend(itertools.combinations_with_replacement(range(d), k))
    return out


def oracle_expand(row: np.ndarray, d: int, degree: int, mode: str) -> list[int]:
    """Nonzero expanded indices by multiplying entries of every monomial."""
    nz = []
    for i, mono in enumerate(oracle_monomials(d, degree, mode)):
        value = 1
        for v in mono:
            value *= int(row[v])
        if value:
            nz.append(i)
    return nz


class TestExpandedDimension:
    def test_multiset_63_3_matches_reported_dimension(self):
        assert expanded_dimension(63, 3, MULTISET) == 45760

    def test_dedup_63_3(self):
        assert expanded_dimension(63, 3, DEDUP) == 41728

    def test_single_variable_cubic(self):
        # bias, x, x^2, x^3
        assert expanded_dimension(1, 3, MULTISET) == 4

    @pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 6])
    @pytest.mark.parametrize("degree", [1, 2, 3])
    @pytest.mark.parametrize("mode", [MULTISET, DEDUP])
    def test_formula_matches_enumeration(self, d, degree, mode):
        assert expanded_dimension(d, degree, mode) == len(oracle_monomials(d, degree, mode))

    def test_rejects_bad_arguments(self):
        with pytest.raises(ExpansionError):
            expanded_dimension(0, 3, MULTISET)
        with pytest.raises(ExpansionError):
            expanded_dimension(5, 0, MULTISET)
        with pytest.raises(ExpansionError):
            expanded_dimension(5, 3, "kernel")

    def test_oversized_dimension_is_an_error_not_wraparound(self):
        with pytest.raises(ExpansionError):
            expanded_dimension(10_000, 5, MULTISET)


class TestBijection:
    @pytest.mark.parametrize("mode", [MULTISET, DEDUP])
    def test_roundtrip_is_identity_d4_degree3(self, mode):
        index = MonomialIndex(base_dim=4, degree=3, mode=mode)
        for i in range(index.total):
            assert index.index_of(index.monomial_of(i)) == i

    @pytest.mark.parametrize("mode", [MULTISET, DEDUP])
    def test_order_matches_enumeration_oracle(self, mode):
        index = MonomialIndex(base_dim=5, degree=3, mode=mode)
        expected = oracle_monomials(5, 3, mode)
        assert [index.monomial_of(i) for i in range(index.total)] == expected

    def test_index_zero_is_bias(self):
        index = MonomialIndex(base_dim=6, degree=3)
        assert index.monomial_of(0) == ()
        assert index.index_of(()) == 0
        assert index.column_name(0) == "bias"

    def test_dedup_rejects_repeated_variables(self):
        index = MonomialIndex(base_dim=6, degree=3, mode=DEDUP)
        with pytest.raises(ExpansionError, match="not canonical"):
            index.index_of((1, 1, 2))

    def test_rejects_out_of_range_and_oversized(self):
        index = MonomialIndex(base_dim=4, degree=2)
        with pytest.raises(ExpansionError):
            index.monomial_of(index.total)
        with pytest.raises(ExpansionError):
            index.index_of((0, 1, 2))  # size 3 > degree 2
        with pytest.raises(ExpansionError):
            index.index_of((0, 4))

    @given(st.integers(min_value=1, max_value=7), st.integers(min_value=1, max_value=3),
           st.sampled_from([MULTISET, DEDUP]), st.randoms(use_true_random=False))
    @settings(max_examples=40, deadline=None)
    def test_roundtrip_property(self, d, degree, mode, rnd):
        index = MonomialIndex(base_dim=d, degree=degree, mode=mode)
        i = rnd.randrange(index.total)
        assert index.index_of(index.monomial_of(i)) == i


class TestExpand:
    def test_all_zero_row_has_only_bias(self):
        index = MonomialIndex(base_dim=8, degree=3)
        vec = index.expand(np.zeros(8, dtype=np.uint8))
        assert vec.indices.tolist() == [0]
        assert vec.values.tolist() == [1.0]

    def test_two_hot_row_degree2_dedup(self):
        index = MonomialIndex(base_dim=2, degree=2, mode=DEDUP)
        vec = index.expand(np.array([1, 1]))
        # bias, x0, x1, x0*x1
        assert vec.nnz == 4
        assert vec.indices.tolist() == [0, 1, 2, 3]

    @pytest.mark.parametrize("mode", [MULTISET, DEDUP])
    def test_matches_enumeration_oracle_on_random_rows(self, mode):
        rng = np.random.default_rng(5)
        index = MonomialIndex(base_dim=5, degree=3, mode=mode)
        for _ in range(25):
            row = rng.integers(0, 2, size=5).astype(np.uint8)
            vec = index.expand(row)
            assert vec.indices.tolist() == oracle_expand(row, 5, 3, mode)

    def test_dedup_nonzero_count_law(self):
        rng = np.random.default_rng(11)
        index = MonomialIndex(base_dim=9, degree=3, mode=DEDUP)
        for _ in range(20):
            row = rng.integers(0, 2, size=9).astype(np.uint8)
            s = int(row.sum())
            expected = sum(math.comb(s, k) for k in range(4))
            assert index.expand(row).nnz == expected

    def test_multiset_nonzero_count_law(self):
        index = MonomialIndex(base_dim=6, degree=3, mode=MULTISET)
        row = np.array([1, 0, 1, 1, 0, 1], dtype=np.uint8)
        assert index.expand(row).nnz == math.comb(4 + 3, 3)

    @given(st.integers(min_value=1, max_value=6), st.data())
    @settings(max_examples=40, deadline=None)
    def test_monotone_support(self, d, data):
        # if a <= b elementwise, expanded support of a is contained in b's
        index = MonomialIndex(base_dim=d, degree=2)
        b = np.array(data.draw(st.lists(st.integers(0, 1), min_size=d, max_size=d)))
        a = b.copy()
        for i in range(d):
            if a[i] and data.draw(st.booleans()):
                a[i] = 0
        sup_a = set(index.expand(a).indices.tolist())
        sup_b = set(index.expand(b).indices.tolist())
        assert sup_a <= sup_b

    def test_dimension_mismatch_rejected(self):
        index = MonomialIndex(base_dim=4, degree=2)
        with pytest.raises(ExpansionError):
            index.expand(np.zeros(5))

    def test_non_binary_entries_rejected(self):
        index = MonomialIndex(base_dim=3, degree=2)
        with pytest.raises(ExpansionError):
            index.expand(np.array([0, 2, 0]))

    def test_batch_path_agrees_with_single_rows(self):
        rng = np.random.default_rng(3)
        index = MonomialIndex(base_dim=7, degree=3)
        matrix = rng.integers(0, 2, size=(40, 7)).astype(np.uint8)
        batched = list(index.expand_rows(matrix, chunk=16))
        for row, vec in zip(matrix, batched):
            assert vec.indices.tolist() == index.expand(row).indices.tolist()

    def test_column_names_cover_every_index(self):
        index = MonomialIndex(base_dim=4, degree=2)
        names = weight_column_names(index)
        assert len(names) == index.total
        assert names[0] == "bias"
        assert names[1] == "x0"
        assert all(names[i] == index.column_name(i) for i in range(index.total))


class TestSparseVector:
    def test_rejects_unsorted_indices(self):
        with pytest.raises(ExpansionError):
            SparseVector(indices=np.array([3, 1]), values=np.ones(2), dim=5)

    def test_rejects_out_of_range(self):
        with pytest.raises(ExpansionError):
            SparseVector(indices=np.array([5]), values=np.ones(1), dim=5)

    def test_dot(self):
        vec = SparseVector(indices=np.array([0, 2]), values=np.ones(2), dim=4)
        assert vec.dot(np.array([1.5, 9.0, 2.0, 9.0])) == pytest.approx(3.5)
