import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from catmix.decay import (DecayVector, VectorKind, d_step, decay_bound_check, decay_rows_csv,
                          differences, killed_walk_rate, point_mass_d, survival_by_start,
                          u_boundary_flux, u_step, vbar_step)
from catmix.dynamics import sweep_batch
from catmix.permcore import Permutation, perm_table, sigma_tilde_counts, sigma_tilde_field
from catmix.walks import killed_x_walk_kernel, x_pmf


def _zeros(n, kind):
    size = n if kind == "d" else n - 1
    return DecayVector(n, kind, np.array([Fraction(0)] * size, dtype=object))


def _all_outcomes(n):
    codes = np.arange(2 ** (n - 1))
    bits = ((codes[:, None] >> np.arange(n - 1)) & 1).astype(np.uint8)
    return np.vstack([np.hstack([np.full((len(codes), 1), d, np.uint8), bits]) for d in (0, 1)])


def _expected_field_after_sweep(sigma):
    n = sigma.n
    outcomes = _all_outcomes(n)
    decks = sweep_batch(np.tile(sigma.to_array().astype(np.int16), (len(outcomes), 1)), outcomes)
    counts = sigma_tilde_counts(decks).sum(axis=0)
    xs = np.arange(1, n + 1)
    return np.array([[Fraction(int(counts[x, y]), len(outcomes)) - Fraction(int(xs[x] * xs[y]), n)
                      for y in range(n)] for x in range(n)], dtype=object)


@pytest.mark.parametrize("kind", ["vbar", "u", "d"])
def test_zero_is_fixed(kind):
    step = {"vbar": vbar_step, "u": u_step, "d": d_step}[kind]
    assert all(v == 0 for v in step(_zeros(7, kind)).values)


def test_vector_length_checked():
    with pytest.raises(ValueError):
        DecayVector(5, "d", np.zeros(4))


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_vbar_recursion_is_exact_expectation(n):
    rng = np.random.default_rng(n)
    starts = [Permutation.identity(n)] + [Permutation.random(n, rng) for _ in range(3)]
    for sigma in starts:
        field = sigma_tilde_field(sigma, exact=True).values
        expected = _expected_field_after_sweep(sigma)
        for y in range(n - 1):
            v = DecayVector(n, VectorKind.VBAR, field[:-1, y].copy())
            assert list(vbar_step(v).values) == list(expected[:-1, y])


def test_vbar_leaks_mass():
    v = DecayVector(5, "vbar", np.array([Fraction(1)] * 4, dtype=object))
    assert sum(vbar_step(v).values) < 4


def test_u_dominates_vbar():
    n = 20
    col = sigma_tilde_field(Permutation.identity(n), exact=True).values[:-1, n // 2 - 1]
    V = DecayVector(n, "vbar", col.copy())
    U = DecayVector(n, "u", col.copy())
    for s in range(200):
        if s == 30:
            V, U = V.to_float(), U.to_float()
        vals_v, vals_u = V.values, U.values
        if V.exact:
            assert all(a <= b for a, b in zip(vals_v, vals_u))
        else:
            assert (vals_v <= vals_u + 1e-12).all()
        assert all(b >= 0 for b in vals_u)
        V, U = vbar_step(V), u_step(U)


def test_differences_need_boundary_flux():
    n = 20
    rng = np.random.default_rng(0)
    U = DecayVector(n, "u", rng.random(n - 1))
    worst_plain = worst_corrected = 0.0
    for _ in range(100):
        lhs = differences(u_step(U)).values
        rhs = d_step(differences(U)).values.copy()
        worst_plain = max(worst_plain, np.abs(lhs - rhs).max())
        f0, fn = u_boundary_flux(U)
        rhs[0] += f0
        rhs[-1] -= fn
        worst_corrected = max(worst_corrected, np.abs(lhs - rhs).max())
        U = u_step(U)
    assert worst_corrected <= 1e-12
    assert worst_plain > 1e-3


def test_boundary_flux_exact():
    n = 6
    U = DecayVector(n, "u", np.array([Fraction(k) for k in (1, 3, 2, 5, 1)], dtype=object))
    f0, fn = u_boundary_flux(U)
    lhs = differences(u_step(U)).values
    rhs = d_step(differences(U)).values.copy()
    rhs[0] += f0
    rhs[-1] -= fn
    assert list(lhs) == list(rhs)


def test_point_mass_step_is_restricted_x_law():
    n, l = 15, 8
    out = d_step(point_mass_d(n, l, exact=True)).values
    assert list(out) == [x_pmf(y - l) for y in range(1, n + 1)]


def test_d_mass_is_survival():
    n = 12
    K = killed_x_walk_kernel(n).matrix
    for l in (1, 6, 12):
        d = point_mass_d(n, l)
        v = np.eye(n)[l - 1]
        masses = []
        for _ in range(300):
            d, v = d_step(d), v @ K
            masses.append(np.abs(d.values).sum())
            assert abs(masses[-1] - v.sum()) < 1e-12
        assert all(a >= b for a, b in zip(masses, masses[1:]))
    assert np.allclose(survival_by_start(n, 0), 1)


def test_decay_rate_matches_diffusive_scaling():
    n = 30
    rate = math.log(killed_walk_rate(n))
    # variance-2 diffusion on an interval of width n + 1 (exits at 0 and n + 1)
    assert abs(rate / (-2 * math.pi ** 2 / (2 * (n + 1) ** 2)) - 1) < 0.1
    # measured against width n the discrete correction is about 14%
    assert 0.1 < abs(rate / (-2 * math.pi ** 2 / (2 * n * n)) - 1) < 0.2


def test_decay_bound_check_holds():
    rep = decay_bound_check(20, 3 * 20 ** 2, 0.2)
    assert rep["ratio"] <= rep["ratio_limit"] and rep["margin"] > 0
    assert rep["exact_until"] == 30 and rep["units"] == "sweeps"
    first = rep["rows"][0]
    assert first["s"] == 0 and first["lhs"] <= 20 / 2
    d = [r["d_mass"] for r in rep["rows"]]
    assert all(a >= b for a, b in zip(d, d[1:]))
    assert decay_rows_csv(rep).splitlines()[0] == "s,d_mass,u_inf,envelope,ratio"
