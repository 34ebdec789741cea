import math
from fractions import Fraction

import numpy as np
from hypothesis import given, strategies as st

from catmix.observables import (card_positions, height, height_batch, height_from_positions,
                                phi, phi_batch, psi_card, sine_weights, tail_sine)
from catmix.permcore import Permutation

perms = st.integers(2, 12).flatmap(lambda n: st.permutations(range(1, n + 1)).map(
    lambda p: Permutation(tuple(p))))


def test_height_identity_and_reversal():
    assert list(height(Permutation.identity(4), exact=True).values) == [
        Fraction(1, 2), 1, Fraction(1, 2), 0]
    assert list(height(Permutation.reversal(4), exact=True).values) == [
        Fraction(-1, 2), -1, Fraction(-1, 2), 0]


def test_phi_identity_n4():
    assert math.isclose(phi(Permutation.identity(4)), 1 + math.sqrt(2) / 2, rel_tol=1e-12)


def test_phi_identity_lower_bound_even_n():
    for n in range(2, 41, 2):
        assert phi(Permutation.identity(n)) >= n * n / (8 * math.sqrt(2)) - 1e-12


@given(perms)
def test_height_invariants(p):
    height(p).check()


@given(perms)
def test_height_from_positions_agrees(p):
    assert np.allclose(height_from_positions(card_positions(p), p.n).values, height(p).values)


@given(perms)
def test_batch_versions_agree(p):
    deck = p.to_array()[None, :]
    assert np.allclose(height_batch(deck)[0], height(p).values)
    assert math.isclose(phi_batch(deck)[0], phi(p), abs_tol=1e-12)


def test_uniform_mean_height_is_zero():
    rng = np.random.default_rng(0)
    decks = np.array([rng.permutation(9) + 1 for _ in range(20000)])
    se = height_batch(decks).std(axis=0) / math.sqrt(len(decks))
    assert (np.abs(height_batch(decks).mean(axis=0)) <= 4 * se + 1e-12).all()


def test_sine_weights_and_tail():
    assert sine_weights(6)[-1] < 1e-15
    T = tail_sine(6)
    assert T[6] == 0 and math.isclose(T[1], sine_weights(6)[:-1].sum())


def test_psi_card():
    n = 5
    ident = Permutation.identity(n)
    assert psi_card(ident, ident, 3) == 0
    moved = Permutation((1, 2, 4, 3, 5))  # card 3 moves from position 3 to 4
    assert math.isclose(psi_card(ident, moved, 3), -math.sin(math.pi * 3 / n))
