import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from catmix.dynamics import CensoringScheme
from catmix.errors import CapacityError, InvariantError
from catmix.exactdist import (Evolver, build_sweep_kernel, censoring_compare,
                              mixing_time_exact, mixing_time_report, projected_tv, tv_curve,
                              tv_distance)
from catmix.permcore import BlockPartition, ExactDistribution, Permutation


class TestKernel:
    def test_n2(self):
        K = build_sweep_kernel(2)
        assert K.to_dense(exact=True).tolist() == [[Fraction(1, 2)] * 2] * 2

    @pytest.mark.parametrize("model", ["cat", "monotone", "single", "at"])
    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_doubly_stochastic(self, n, model):
        assert build_sweep_kernel(n, model).is_doubly_stochastic()

    def test_plain_equals_monotone(self):
        for n in (2, 3, 4, 5):
            assert build_sweep_kernel(n, "cat").equals(build_sweep_kernel(n, "monotone"))

    def test_single_step_n3(self):
        K = build_sweep_kernel(3, "at")
        ident = Permutation.identity(3).rank()
        assert K.entry(ident, ident) == Fraction(1, 2)
        for swapped in ((2, 1, 3), (1, 3, 2)):
            assert K.entry(ident, Permutation(swapped).rank()) == Fraction(1, 4)

    def test_uniform_is_stationary(self):
        for n in (3, 4, 5):
            K = build_sweep_kernel(n, "at").to_dense(exact=True)
            col = K.sum(axis=0)
            assert all(c == 1 for c in col)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            build_sweep_kernel(9)

    def test_json(self):
        doc = json.loads(build_sweep_kernel(3).to_json())
        assert doc["ordering"] == "lehmer" and doc["n"] == 3

    def test_evolver_matches_kernel(self):
        n = 4
        K = build_sweep_kernel(n).to_dense(exact=True)
        ev = Evolver(n, exact=True)
        N = ev.start([5])[0]
        for t in range(1, 4):
            N = ev.step(N)
            row = np.linalg.matrix_power(K.astype(float), t)[5]
            assert np.allclose([int(v) / 2 ** (n * t) for v in N], row)


class TestTv:
    def test_basic(self):
        mu = ExactDistribution.uniform(3)
        assert tv_distance(mu, mu) == 0
        pm = ExactDistribution.point_mass(Permutation.identity(3))
        assert tv_distance(pm, mu) == 1 - Fraction(1, 6)

    def test_mismatched(self):
        with pytest.raises(ValueError):
            tv_distance(ExactDistribution.uniform(3), ExactDistribution.uniform(4))

    def test_n2_one_sweep(self):
        assert tv_curve(2, 1)[1] == 0

    def test_regression_n5(self):
        assert tv_curve(5, 3) == [Fraction(119, 120), Fraction(4, 5), Fraction(3293, 7680),
                                  Fraction(12237, 40960)]

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_non_increasing(self, n):
        curve = tv_curve(n, 25)
        assert all(a >= b for a, b in zip(curve, curve[1:]))

    def test_same_from_every_start(self):
        # the kernel commutes with relabelling, so the curve from any start matches the identity's
        for r in (3, 17):
            assert tv_curve(4, 5, Permutation.from_rank(4, r)) == tv_curve(4, 5)


class TestMixingTime:
    def test_n2(self):
        for eps in (0, 0.1, 0.25, 0.49):
            assert mixing_time_exact(2, eps) == 1

    def test_regression_fixtures(self):
        assert mixing_time_exact(3, 0.25) == 1
        assert mixing_time_exact(3, 0.1) == 2
        assert mixing_time_exact(3, 0.01) == 5

    def test_monotone_in_eps(self):
        times = [mixing_time_exact(4, e) for e in (0.01, 0.05, 0.1, 0.25, 0.5)]
        assert times == sorted(times, reverse=True)

    def test_lower_envelope_label(self):
        rep = mixing_time_report(7, 0.25)
        assert rep["t_mix"] == 8 and "lower envelope" in rep["scope"]
        assert mixing_time_report(4, 0.25)["scope"] == "all starts"

    def test_capacity(self):
        with pytest.raises(CapacityError):
            mixing_time_exact(8, 0.25)


class TestCensoring:
    def test_empty_scheme(self):
        cmp = censoring_compare(4, CensoringScheme.none(), 10)
        assert cmp.plain == cmp.censored

    def test_everything(self):
        cmp = censoring_compare(4, CensoringScheme.everything(4), 10)
        assert all(v == 1 - Fraction(1, 24) for v in cmp.censored)

    @pytest.mark.parametrize("eta", [0.2, 0.3, 0.5])
    def test_three_phase(self, eta):
        cmp = censoring_compare(5, CensoringScheme.three_phase(eta, 5, 50), 50)
        assert cmp.violations == []
        cmp.check()

    def test_capacity(self):
        with pytest.raises(CapacityError):
            censoring_compare(7, CensoringScheme.none(), 2)


class TestProjection:
    def test_uniform(self):
        rep = projected_tv(ExactDistribution.uniform(4), BlockPartition(4, 2))
        assert all(v == 0 for v in rep.values())

    def test_point_mass(self):
        rep = projected_tv(ExactDistribution.point_mass(Permutation.identity(4)), BlockPartition(4, 2))
        assert rep["tv_hat"] == rep["tv_u"]

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=24, max_size=24).filter(any),
           st.integers(1, 4))
    def test_identity_and_triangle(self, w, K):
        total = sum(w)
        nu = ExactDistribution(4, np.array([Fraction(a, total) for a in w], dtype=object))
        rep = projected_tv(nu, BlockPartition(4, K))
        assert rep["tv_hat"] == rep["tv_u"]
        assert rep["tv"] <= rep["tv_to_u"] + rep["tv_hat"]

    def test_capacity(self):
        with pytest.raises(CapacityError):
            projected_tv(ExactDistribution.uniform(8, exact=False), BlockPartition(8, 2))
