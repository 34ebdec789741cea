"""
Height function and first-Fourier-mode statistic of a deck.

With ``m = floor(n/2)`` the height of a deck is

    h(x) = #{z <= x : sigma(z) <= m} - x*m/n,      x = 1..n,

and ``Phi = sum_{x=1}^{n-1} h(x) sin(pi x / n)``.  Equivalently ``h`` counts
the small cards whose position ``q(a)`` is at most ``x``, which gives the
per-card decomposition of a change in ``Phi`` used by :func:`psi_card`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .permcore import Permutation

__all__ = ["HeightField", "height", "height_from_positions", "phi", "phi_batch",
           "height_batch", "sine_weights", "tail_sine", "psi_card", "card_positions"]


@dataclass(frozen=True)
class HeightField:
    """``values[x-1] = h(x)`` for ``x = 1..n``."""

    n: int
    values: np.ndarray

    def check(self, tol: float = 1e-9) -> None:
        n, h = self.n, np.asarray(self.values, dtype=float)
        m = n // 2
        assert abs(h[-1]) <= tol, "h(n) must vanish"
        x = np.arange(1, n + 1)
        assert (np.abs(h) <= 0.5 * np.minimum(x, n - x) + 1 + tol).all(), "height envelope violated"
        inc = np.diff(np.concatenate([[0.0], h]))
        lo = -m / n
        assert (np.isclose(inc, lo, atol=tol) | np.isclose(inc, lo + 1, atol=tol)).all(), \
            "height increments must be -m/n or 1-m/n"


def card_positions(sigma: Permutation) -> np.ndarray:
    """``q[a-1]`` is the position of card ``a``."""
    return np.asarray(sigma.positions(), dtype=np.int64)


def height(sigma: Permutation, *, exact: bool = False) -> HeightField:
    n = sigma.n
    m = n // 2
    counts = np.cumsum(np.asarray(sigma.mapping) <= m)
    if exact:
        vals = np.array([int(c) - Fraction(x * m, n) for x, c in enumerate(counts, start=1)],
                        dtype=object)
    else:
        vals = counts - np.arange(1, n + 1) * m / n
    return HeightField(n, vals)


def height_from_positions(q, n: int) -> HeightField:
    """Height computed from the positions of cards ``1..floor(n/2)``."""
    m = n // 2
    q = np.asarray(q)[:m]
    x = np.arange(1, n + 1)
    vals = (q[None, :] <= x[:, None]).sum(axis=1) - x * m / n
    return HeightField(n, vals)


def sine_weights(n: int) -> np.ndarray:
    """``sin(pi x / n)`` for ``x = 1..n`` (the last entry is 0)."""
    return np.sin(np.pi * np.arange(1, n + 1) / n)


def phi(sigma: Permutation) -> float:
    h = height(sigma).values
    return float(h[:-1] @ sine_weights(sigma.n)[:-1])


def height_batch(decks: np.ndarray) -> np.ndarray:
    """Heights of every row of an ``(m, n)`` label array."""
    n = decks.shape[1]
    m = n // 2
    return np.cumsum(decks <= m, axis=1) - np.arange(1, n + 1) * m / n


def phi_batch(decks: np.ndarray) -> np.ndarray:
    n = decks.shape[1]
    return height_batch(decks)[:, :-1] @ sine_weights(n)[:-1]


def tail_sine(n: int) -> np.ndarray:
    """``T[p] = sum_{x=p}^{n-1} sin(pi x / n)`` for ``p = 1..n`` (index ``p``; ``T[n] = 0``)."""
    w = np.zeros(n + 1)
    w[1:n] = np.sin(np.pi * np.arange(1, n) / n)
    return np.cumsum(w[::-1])[::-1]


def psi_card(before: Permutation, after: Permutation, a: int) -> float:
    """Change of the sine tail sum starting at card ``a``'s position."""
    if before.n != after.n:
        raise ValueError("states must have the same size")
    n = before.n
    tail = tail_sine(n)
    return float(tail[after.positions()[a - 1]] - tail[before.positions()[a - 1]])
