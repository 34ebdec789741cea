import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from catmix.errors import CapacityError
from catmix.permcore import (BlockPartition, ExactDistribution, Permutation, block_subgroup,
                             in_Tn, lehmer_rank, lehmer_unrank, order_leq, perm_table,
                             project_bar, project_hat, rank_rows, sigma_tilde,
                             sigma_tilde_field, uniformize)

perms = st.integers(2, 7).flatmap(lambda n: st.permutations(range(1, n + 1)).map(
    lambda p: Permutation(tuple(p))))


def test_permutation_rejects_non_permutations():
    with pytest.raises(ValueError):
        Permutation((1, 1, 2))
    with pytest.raises(ValueError):
        Permutation(())


def test_json_round_trip():
    p = Permutation((2, 1, 4, 3))
    assert p.to_json() == "[2,1,4,3]"
    assert Permutation.from_json(p.to_json()) == p


@given(perms)
def test_rank_round_trip(p):
    assert Permutation.from_rank(p.n, p.rank()) == p


@given(perms)
def test_inverse_composes_to_identity(p):
    assert p.compose(p.inverse()) == Permutation.identity(p.n)


def test_perm_table_is_lehmer_ordered():
    table = perm_table(4)
    assert table.shape == (24, 4)
    assert (rank_rows(table) == np.arange(24)).all()
    assert tuple(table[0]) == (1, 2, 3, 4) and tuple(table[-1]) == (4, 3, 2, 1)
    assert lehmer_unrank(4, lehmer_rank((3, 1, 4, 2))) == (3, 1, 4, 2)


def test_perm_table_capacity():
    with pytest.raises(CapacityError) as exc:
        perm_table(10)
    assert exc.value.parameter == "n"


class TestSigmaTilde:
    def test_identity(self):
        assert sigma_tilde(Permutation.identity(4), 2, 2) == 1

    def test_reversal(self):
        assert sigma_tilde(Permutation.reversal(4), 2, 2) == -1

    def test_hand_count(self):
        assert sigma_tilde(Permutation((2, 1, 4, 3)), 1, 1, exact=True) == Fraction(-1, 4)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            sigma_tilde(Permutation.identity(3), 0, 1)
        with pytest.raises(ValueError):
            sigma_tilde(Permutation.identity(3), 1, 4)

    @given(perms)
    def test_field_invariants(self, p):
        sigma_tilde_field(p, exact=True).check()
        sigma_tilde_field(p).check()

    @given(perms)
    def test_field_matches_pointwise_definition(self, p):
        field = sigma_tilde_field(p, exact=True).values
        for x, y in itertools.product(range(1, p.n + 1), repeat=2):
            assert field[x - 1, y - 1] == sigma_tilde(p, x, y, exact=True)


class TestOrder:
    def test_identity_is_maximal_and_reversal_minimal(self):
        for p in map(Permutation, itertools.permutations((1, 2, 3))):
            assert order_leq(p, Permutation.identity(3))
            assert order_leq(Permutation.reversal(3), p)

    def test_incomparable_pair(self):
        a, b = Permutation((2, 1, 3)), Permutation((1, 3, 2))
        assert not order_leq(a, b) and not order_leq(b, a)

    def test_mismatched_sizes(self):
        with pytest.raises(ValueError):
            order_leq(Permutation.identity(3), Permutation.identity(4))

    @given(perms)
    def test_reflexive(self, p):
        assert order_leq(p, p)

    def test_antisymmetric_on_s4(self):
        ps = [Permutation(p) for p in itertools.permutations(range(1, 5))]
        for a, b in itertools.product(ps, repeat=2):
            if a != b:
                assert not (order_leq(a, b) and order_leq(b, a))


class TestBlocks:
    def test_cutpoints(self):
        part = BlockPartition(10, 3)
        assert part.cutpoints == (0, 3, 6, 10)
        assert part.sizes == (3, 3, 4)
        assert part.interior_cuts == (3, 6)
        assert list(part.block_of()) == [1] * 3 + [2] * 3 + [3] * 4

    def test_bad_partition(self):
        with pytest.raises(ValueError):
            BlockPartition(4, 5)

    def test_project_hat_identity(self):
        part = BlockPartition(4, 2)
        hat = project_hat(Permutation.identity(4), part, exact=True)
        field = sigma_tilde_field(Permutation.identity(4), exact=True).values
        assert (hat[:, 0] == field[:, 1]).all()
        assert all(v == 0 for v in hat[:, 1])
        assert hat[1, 0] == 1

    def test_single_block_projects_to_zero(self):
        hat = project_hat(Permutation((3, 1, 2)), BlockPartition(3, 1))
        assert hat.shape == (3, 1) and np.allclose(hat, 0)

    def test_project_bar(self):
        part = BlockPartition(4, 2)
        bar = project_bar(Permutation.identity(4), part, exact=True)
        assert bar[0, 0] == 1 and bar[0, 1] == 0 and all(v == 0 for v in bar[1])
        assert project_bar(Permutation.reversal(4), part)[0, 0] == -1

    def test_project_bar_averages_to_zero(self):
        part = BlockPartition(4, 2)
        total = sum(project_bar(Permutation(p), part, exact=True)[0, 0]
                    for p in itertools.permutations(range(1, 5)))
        assert total == 0

    def test_block_subgroup(self):
        part = BlockPartition(4, 2)
        assert in_Tn(Permutation.identity(4), part)
        assert in_Tn(Permutation((2, 1, 4, 3)), part)
        members = [p for p in map(Permutation, itertools.permutations(range(1, 5)))
                   if in_Tn(p, part)]
        assert len(members) == 4
        assert set(block_subgroup(part)) == set(members)


class TestDistributions:
    def test_uniformize_fixes_uniform(self):
        mu = ExactDistribution.uniform(4)
        assert list(uniformize(mu, BlockPartition(4, 2)).probs) == list(mu.probs)

    def test_uniformize_point_mass(self):
        part = BlockPartition(4, 2)
        nu = uniformize(ExactDistribution.point_mass(Permutation.identity(4)), part)
        support = {Permutation.from_rank(4, r) for r, v in enumerate(nu.probs) if v}
        assert support == set(block_subgroup(part))
        assert all(v in (0, Fraction(1, 4)) for v in nu.probs)

    def test_uniformize_rejects_unnormalized(self):
        bad = ExactDistribution(3, np.array([Fraction(1, 3)] * 6, dtype=object))
        with pytest.raises(ValueError):
            uniformize(bad, BlockPartition(3, 1))

    def test_json_round_trip(self):
        nu = ExactDistribution.point_mass(Permutation((2, 3, 1)))
        back = ExactDistribution.from_json(nu.to_json())
        assert list(back.probs) == list(nu.probs) and back.ordering == "lehmer"

    def test_size_checked(self):
        with pytest.raises(ValueError):
            ExactDistribution(3, [0.5, 0.5])

    @settings(max_examples=30)
    @given(st.lists(st.integers(0, 9), min_size=24, max_size=24).filter(any))
    def test_uniformize_preserves_mass(self, weights):
        total = sum(weights)
        nu = ExactDistribution(4, np.array([Fraction(w, total) for w in weights], dtype=object))
        out = uniformize(nu, BlockPartition(4, 2))
        assert out.is_normalized()
        assert math.isclose(float(sum(out.probs)), 1.0)
