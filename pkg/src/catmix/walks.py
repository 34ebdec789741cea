"""
One-dimensional walks behind the single-card analysis.

Positions in this module follow the ``{0, ..., n-1}`` convention.

The increment law ``X`` has

    P(X = k) = 2^-(|k|+3) + 2^-(3-|k|) * 1{|k| <= 1},

so ``P(X=0) = 1/4``, ``P(X=+-1) = 5/16`` and ``P(X=+-k) = 2^-(k+3)`` for
``k >= 2``.  Averaged over the direction of a sweep, a tagged card at an
interior position ``x`` moves to ``clip(x + X, 0, n-1)``.

The killed simple random walk ``M_n`` on ``{0, ..., n-1}`` moves ``0 -> 1``
surely, steps ``+-1`` with probability 1/2 from interior states, and from
``n-1`` steps to ``n-2`` or dies with probability 1/2 each.  Its
eigenpairs are ``f_j(x) = cos((2j+1) pi x / 2n)``,
``lambda_j = cos((2j+1) pi / 2n)``.  ``M_n`` is reversible with respect to
the weights ``(1/2, 1, ..., 1)``, not symmetric, so the ``f_j`` are
orthogonal in that weighted inner product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dynamics import Direction, sweep_batch
from .errors import DomainError

__all__ = [
    "x_pmf", "x_pmf_array", "sample_x", "card_jump_law", "card_jump_law_directional",
    "jump_law_closed_form", "enumerate_jump_law", "card_kernel", "sample_card_step",
    "PushedWalk", "pushed_walk", "KilledWalkKernel", "killed_srw_kernel", "srw_spectrum",
    "spectrum_report", "survival_probability", "survival_curve", "killed_x_walk_kernel",
    "hitting_time_right", "hitting_tail_exact", "coupled_card_and_walk",
]


# -- increment law -----------------------------------------------------------------

def x_pmf(k: int) -> Fraction:
    """Exact ``P(X = k)``."""
    a = abs(int(k))
    p = Fraction(1, 2 ** (a + 3))
    if a <= 1:
        p += Fraction(1, 2 ** (3 - a))
    return p


def x_pmf_array(kmax: int) -> np.ndarray:
    """``P(X = k)`` for ``k = -kmax..kmax`` as floats."""
    k = np.abs(np.arange(-kmax, kmax + 1))
    return 2.0 ** -(k + 3) + np.where(k <= 1, 2.0 ** -(3 - np.minimum(k, 3)), 0.0)


def sample_x(rng: np.random.Generator, size=None):
    """Exact draws of ``X``: magnitude from one octal digit plus a geometric tail, then a sign."""
    digit = rng.integers(0, 8, size=size)
    tail = rng.geometric(0.5, size=size)
    mag = np.where(digit < 2, 0, np.where(digit < 7, 1, 1 + tail))
    sign = np.where(rng.integers(0, 2, size=size) == 1, 1, -1)
    out = sign * mag
    return int(out) if size is None else out.astype(np.int64)


# -- tagged card -------------------------------------------------------------------

def card_jump_law_directional(x: int, n: int, direction: Direction) -> dict[int, Fraction]:
    """Law of a tagged card's new position after one sweep in a fixed direction."""
    if not 0 <= x <= n - 1:
        raise ValueError(f"position {x} outside 0..{n - 1}")
    if Direction(direction) is Direction.RIGHT_TO_LEFT:
        mirrored = card_jump_law_directional(n - 1 - x, n, Direction.LEFT_TO_RIGHT)
        return {n - 1 - y: p for y, p in mirrored.items()}
    law: dict[int, Fraction] = {}
    stay = Fraction(1)
    if x > 0:
        law[x - 1] = Fraction(1, 2)
        stay = Fraction(1, 2)
    # then advance j more places with probability 2^-(j+1), capped at the right end
    room = n - 1 - x
    for j in range(room):
        law[x + j] = law.get(x + j, 0) + stay * Fraction(1, 2 ** (j + 1))
    law[n - 1] = law.get(n - 1, 0) + stay * Fraction(1, 2 ** room)
    return law


def card_jump_law(x: int, n: int) -> dict[int, Fraction]:
    """Direction-averaged one-sweep law of a tagged card at position ``x``."""
    out: dict[int, Fraction] = {}
    for d in Direction:
        for y, p in card_jump_law_directional(x, n, d).items():
            out[y] = out.get(y, 0) + p / 2
    return {y: p for y, p in sorted(out.items()) if p}


def jump_law_closed_form(x: int, n: int) -> dict[int, Fraction]:
    """The one-sweep law from the explicit increment formulas.

    Interior targets get ``P(X = k)``; a jump that lands on an end of the
    deck gets ``2^-(|k|+2) + 2^-(3-|k|) 1{|k|<=1}``.  From an end of the
    deck the law is ``2^-(k+2) + 1/4 * 1{k<=1}`` for ``k <= n-2`` and
    ``2^-n`` for the jump to the far end.  The end-state formula does not
    normalize for ``n = 2``.
    """
    if n < 3:
        raise DomainError("the closed-form jump law needs n >= 3")
    if not 0 <= x <= n - 1:
        raise ValueError(f"position {x} outside 0..{n - 1}")
    if x == n - 1:
        return {n - 1 - y: p for y, p in reversed(jump_law_closed_form(0, n).items())}
    law = {}
    if x == 0:
        for k in range(n - 1):
            law[k] = Fraction(1, 2 ** (k + 2)) + (Fraction(1, 4) if k <= 1 else 0)
        law[n - 1] = Fraction(1, 2 ** n)
        return law
    for k in range(-x, n - x):
        a = abs(k)
        if k in (-x, n - 1 - x):
            law[x + k] = Fraction(1, 2 ** (a + 2)) + (Fraction(1, 2 ** (3 - a)) if a <= 1 else 0)
        else:
            law[x + k] = x_pmf(k)
    return law


def enumerate_jump_law(x: int, n: int, direction: Direction | None = None) -> dict[int, Fraction]:
    """Tagged-card law by running the full deck through every sweep outcome."""
    directions = list(Direction) if direction is None else [Direction(direction)]
    codes = np.arange(2 ** (n - 1))
    edge_bits = ((codes[:, None] >> np.arange(n - 1)[None, :]) & 1).astype(np.uint8)
    counts: dict[int, int] = {}
    for d in directions:
        bits = np.concatenate([np.full((len(codes), 1), int(d), np.uint8), edge_bits], axis=1)
        decks = np.tile(np.arange(1, n + 1, dtype=np.int16), (len(codes), 1))
        sweep_batch(decks, bits, "plain")
        ends = np.argmax(decks == x + 1, axis=1)
        for y, c in zip(*np.unique(ends, return_counts=True)):
            counts[int(y)] = counts.get(int(y), 0) + int(c)
    total = len(directions) * len(codes)
    return {y: Fraction(c, total) for y, c in sorted(counts.items())}


def card_kernel(n: int) -> np.ndarray:
    """``n x n`` float matrix of the direction-averaged tagged-card law."""
    Q = np.zeros((n, n))
    for x in range(n):
        for y, p in card_jump_law(x, n).items():
            Q[x, y] = float(p)
    return Q


def sample_card_step(pos: np.ndarray, n: int, direction: np.ndarray, rng: np.random.Generator,
                     coins: np.ndarray | None = None) -> np.ndarray:
    """Exact one-sweep move of tagged cards at ``pos`` (0-based) under given directions."""
    pos = np.asarray(pos)
    m = pos.shape
    # work in left-to-right coordinates
    y = np.where(direction == 0, pos, n - 1 - pos)
    back = rng.integers(0, 2, size=m).astype(bool) if coins is None else coins
    advance = rng.geometric(0.5, size=m) - 1
    step_back = (y > 0) & back
    y_new = np.where(step_back, y - 1, np.minimum(y + advance, n - 1))
    return np.where(direction == 0, y_new, n - 1 - y_new)


# -- pushed walk -------------------------------------------------------------------

@dataclass(frozen=True)
class PushedWalk:
    """``S_s`` and ``S_s - min(min_{r<=s} S_r, -q0)`` for ``s = 1..t``."""

    q0: int
    increments: np.ndarray
    S: np.ndarray
    clamp: np.ndarray
    path: np.ndarray


def pushed_walk(increments, q0: int) -> PushedWalk:
    if q0 < 0:
        raise ValueError("q0 must be nonnegative")
    inc = np.asarray(increments, dtype=np.int64)
    S = np.cumsum(inc)
    clamp = np.minimum(np.minimum.accumulate(S) if len(S) else S, -q0)
    return PushedWalk(q0, inc, S, clamp, S - clamp)


def _x_tail_magnitude(q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw ``|X|`` conditioned on ``|X| >= q`` (``q >= 1``)."""
    g = rng.geometric(0.5, size=q.shape)
    # q = 1: |X| = 1 w.p. 5/6, else 1 + Geometric(1/2)
    first = rng.random(size=q.shape) < 5 / 6
    one = np.where(first, 1, 1 + g)
    return np.where(q == 1, one, q - 1 + g)


def _quantile_x_given_card(q_new: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``X <= q_new`` jointly with a card that moved ``0 -> q_new``.

    ``U`` is uniform on the card-CDF cell of ``q_new`` and ``X = F^-1(U)``;
    the card law from 0 dominates ``max(X, 0)``, so ``X <= q_new``.
    """
    kmax = n + 64
    ks = np.arange(-kmax, kmax + 1)
    F = np.cumsum(x_pmf_array(kmax))
    G = np.cumsum([float(card_jump_law(0, n).get(y, 0)) for y in range(n)])
    lo = np.where(q_new > 0, G[np.maximum(q_new - 1, 0)], 0.0)
    U = lo + rng.random(size=q_new.shape) * (G[q_new] - lo)
    return ks[np.minimum(np.searchsorted(F, U, side="left"), len(ks) - 1)]


def coupled_card_and_walk(n: int, q0: int, sweeps: int, trials: int, rng: np.random.Generator):
    """Run tagged cards and pushed walks whose increments are read off the card moves.

    From an interior position, interior moves give ``X = q' - q`` exactly and
    landing on an end of the deck draws ``X`` from the matching tail of its
    law.  From position 0 the increment is quantile-coupled to the move.
    Each increment has the law of ``X`` independently of the past.  Returns
    ``(cards, walk, alive)`` of shape ``(sweeps+1, trials)``, ``alive``
    marking sweeps before the card first reaches ``n-1``.
    """
    q = np.full(trials, q0)
    cards = [q.copy()]
    incs = []
    alive = [q < n - 1]
    for _ in range(sweeps):
        direction = rng.integers(0, 2, size=trials)
        q_new = sample_card_step(q, n, direction, rng)
        X = q_new - q
        inner = (q > 0) & (q < n - 1)
        X = np.where(inner & (q_new == 0), -_x_tail_magnitude(np.maximum(q, 1), rng), X)
        X = np.where(inner & (q_new == n - 1), _x_tail_magnitude(np.maximum(n - 1 - q, 1), rng), X)
        X = np.where(q == 0, _quantile_x_given_card(q_new, n, rng), X)
        incs.append(X)
        q = q_new
        cards.append(q.copy())
        alive.append(alive[-1] & (q < n - 1))
    incs = np.array(incs).reshape(sweeps, trials)
    S = np.vstack([np.zeros(trials, np.int64), np.cumsum(incs, axis=0)])
    clamp = np.minimum(np.minimum.accumulate(S, axis=0), -q0)
    return np.array(cards), S - clamp, np.array(alive)


# -- killed walks ------------------------------------------------------------------

@dataclass(frozen=True)
class KilledWalkKernel:
    """Substochastic transition matrix; ``defect[x]`` is the killing mass at ``x``."""

    n: int
    matrix: np.ndarray

    @property
    def defect(self) -> np.ndarray:
        return 1.0 - self.matrix.sum(axis=1)


def killed_srw_kernel(n: int) -> KilledWalkKernel:
    if n < 2:
        raise ValueError("killed_srw_kernel needs n >= 2")
    M = np.zeros((n, n))
    M[0, 1] = 1.0
    for x in range(1, n - 1):
        M[x, x - 1] = M[x, x + 1] = 0.5
    M[n - 1, n - 2] = 0.5
    return KilledWalkKernel(n, M)


def killed_x_walk_kernel(n: int) -> KilledWalkKernel:
    """Walk on ``{1..n}`` (stored 0-based) with increments ``X``, killed on leaving."""
    pmf = x_pmf_array(n)
    idx = np.arange(n)
    return KilledWalkKernel(n, pmf[(idx[None, :] - idx[:, None]) + n])


def srw_spectrum(n: int) -> list[tuple[float, np.ndarray]]:
    """Closed-form eigenpairs ``(lambda_j, f_j)``, ``j = 0..n-1``."""
    if n < 2:
        raise ValueError("srw_spectrum needs n >= 2")
    x = np.arange(n)
    return [(math.cos((2 * j + 1) * math.pi / (2 * n)),
             np.cos((2 * j + 1) * math.pi * x / (2 * n))) for j in range(n)]


def spectrum_report(n: int) -> dict:
    """Residuals of the closed-form spectrum against the explicit kernel."""
    M = killed_srw_kernel(n).matrix
    pairs = srw_spectrum(n)
    lam = np.array([p[0] for p in pairs])
    F = np.array([p[1] for p in pairs])
    eig_res = np.abs(F @ M.T - lam[:, None] * F).max()
    G = F @ F.T
    off = G - np.diag(np.diag(G))
    w = np.ones(n)
    w[0] = 0.5
    Gw = (F * w) @ F.T
    offw = Gw - np.diag(np.diag(Gw))
    return {
        "n": n,
        "eigenvalues": lam.tolist(),
        "eigen_residual_max": float(eig_res),
        "gram_residual": float(np.abs(off).max()) if n > 1 else 0.0,
        "norm_residual": float(np.abs(np.diag(G) - (n + 1) / 2).max()),
        "weighted_gram_residual": float(np.abs(offw).max()),
        "weighted_norm_residual": float(np.abs(np.diag(Gw) - n / 2).max()),
    }


def survival_curve(kernel: KilledWalkKernel, t_max: int, start: int = 0) -> np.ndarray:
    """``P(alive at t)`` for ``t = 0..t_max`` from ``start``."""
    v = np.zeros(kernel.n)
    v[start] = 1.0
    out = np.empty(t_max + 1)
    out[0] = 1.0
    for t in range(1, t_max + 1):
        v = v @ kernel.matrix
        out[t] = v.sum()
    return out


def survival_probability(kernel: KilledWalkKernel, t: int, start: int = 0) -> float:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return float(survival_curve(kernel, t, start)[-1])


# -- hitting the right end -----------------------------------------------------------

def hitting_tail_exact(n: int, start: int, t_max: int) -> np.ndarray:
    """``P(T > t)``, ``t = 0..t_max``, for the first sweep the card sits at ``n-1``."""
    Q = card_kernel(n)
    Q[:, n - 1] = 0.0
    if start == n - 1:
        return np.zeros(t_max + 1)
    return survival_curve(KilledWalkKernel(n, Q), t_max, start)


def hitting_time_right(n: int, start: int, trials: int, rng: np.random.Generator,
                       thetas=None, max_sweeps: int | None = None) -> dict:
    """Monte Carlo tail of ``T`` on the grid ``theta * n^2 / pi^2`` (in sweeps)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    thetas = np.asarray([0.5, 1, 2, 4, 8] if thetas is None else thetas, dtype=float)
    grid = thetas * n * n / math.pi ** 2
    horizon = int(math.floor(grid.max())) + 1 if max_sweeps is None else max_sweeps
    pos = np.full(trials, start)
    T = np.where(pos == n - 1, 0, -1)
    for i in range(1, horizon + 1):
        live = T < 0
        if not live.any():
            break
        direction = rng.integers(0, 2, size=live.sum())
        pos[live] = sample_card_step(pos[live], n, direction, rng)
        T[live & (pos == n - 1)] = i
    T = np.where(T < 0, horizon + 1, T)
    tail = np.array([(T > g).mean() for g in grid])
    return {"n": n, "start": start, "trials": trials, "theta": thetas.tolist(),
            "sweeps": grid.tolist(), "tail": tail.tolist(), "units": "sweeps",
            "censored_at": horizon, "hitting_times": T}
