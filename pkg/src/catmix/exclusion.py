"""
Systematic simple exclusion: the shuffle seen through ``k`` identical particles.

Labels ``1..k`` of a deck are particles and the rest are holes, so a sweep
of the deck induces a sweep of the occupancy vector with the same edge
order and bits.  The height of a configuration is

    g(x) = sum_{z<=x} xi(z) - x*k/n,

and ``Psi = sum_x g(x) sin(pi x / n)``.  Exact distributions over
``Omega_{n,k}`` index configurations by the colex rank of the occupied
set.  Bounds use ``k' = min(k, n-k)``; when ``k > n/2`` particles and holes
are exchanged first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np

from .dynamics import (STREAM_AUX, STREAM_MAIN, Direction, SweepRandomness,
                       coupled_sweep_batch, edge_order, sweep_batch, sweep_bits)
from .errors import CapacityError, DomainError
from .observables import HeightField, sine_weights
from .permcore import Permutation
from .wilson import R_CONSTANT, WilsonInputs, gamma_of_n, wilson_lower_bound

__all__ = [
    "Configuration", "project", "excl_sweep", "g_height", "psi_excl", "colex_rank",
    "configurations", "excl_residual", "excl_exact_tv", "excl_lower_bound",
    "excl_lower_bound_report", "excl_coupling_time", "EXCL_STATE_LIMIT",
]

EXCL_STATE_LIMIT = 20_000


@dataclass(frozen=True)
class Configuration:
    """Occupancy ``xi(x)`` for ``x = 1..n`` stored as a tuple of bits."""

    occupancy: tuple[int, ...]

    def __post_init__(self):
        occ = tuple(int(b) for b in self.occupancy)
        if any(b not in (0, 1) for b in occ):
            raise ValueError("occupancy entries must be 0 or 1")
        object.__setattr__(self, "occupancy", occ)

    @property
    def n(self) -> int:
        return len(self.occupancy)

    @property
    def k(self) -> int:
        return sum(self.occupancy)

    @classmethod
    def wedge(cls, n: int, k: int) -> "Configuration":
        return cls(tuple(1 if x < k else 0 for x in range(n)))

    @classmethod
    def from_bitstring(cls, text: str) -> "Configuration":
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a bitstring: {text!r}")
        return cls(tuple(int(c) for c in text))

    def to_bitstring(self) -> str:
        return "".join(map(str, self.occupancy))

    def flipped(self) -> "Configuration":
        """Exchange particles and holes."""
        return Configuration(tuple(1 - b for b in self.occupancy))

    def rank(self) -> int:
        return colex_rank(self.occupancy)

    def __str__(self):
        return self.to_bitstring()


def colex_rank(occupancy) -> int:
    """Colex rank of the occupied positions ``p_1 < ... < p_k``: ``sum_j C(p_j - 1, j)``."""
    occupied = [x for x, b in enumerate(occupancy, start=1) if b]
    return sum(math.comb(p - 1, j) for j, p in enumerate(occupied, start=1))


@lru_cache(maxsize=None)
def configurations(n: int, k: int) -> np.ndarray:
    """All of ``Omega_{n,k}`` as a ``(C(n,k), n)`` 0/1 array in colex order."""
    size = math.comb(n, k)
    if size > EXCL_STATE_LIMIT:
        raise CapacityError(f"Omega_{{{n},{k}}} has {size} states; limit {EXCL_STATE_LIMIT}",
                            parameter="n,k", limit=EXCL_STATE_LIMIT)
    out = np.zeros((size, n), dtype=np.int8)
    for occupied in combinations(range(n), k):
        row = np.zeros(n, dtype=np.int8)
        row[list(occupied)] = 1
        out[colex_rank(row)] = row
    out.setflags(write=False)
    return out


def project(sigma: Permutation, k: int) -> Configuration:
    """Occupancy of the labels ``1..k``."""
    return Configuration(tuple(1 if v <= k else 0 for v in sigma.mapping))


def excl_sweep(xi: Configuration, r: SweepRandomness) -> Configuration:
    n = xi.n
    if len(r.bits) != n - 1:
        raise ValueError(f"a sweep of {n} sites needs {n - 1} bits, got {len(r.bits)}")
    occ = list(xi.occupancy)
    for bit, x in zip(r.bits, edge_order(n, r.direction)):
        if bit:
            occ[x - 1], occ[x] = occ[x], occ[x - 1]
    return Configuration(tuple(occ))


def g_height(xi: Configuration, *, exact: bool = False) -> HeightField:
    n, k = xi.n, xi.k
    counts = np.cumsum(xi.occupancy)
    if exact:
        vals = np.array([int(c) - Fraction(x * k, n) for x, c in enumerate(counts, start=1)],
                        dtype=object)
    else:
        vals = counts - np.arange(1, n + 1) * k / n
    return HeightField(n, vals)


def psi_excl(xi: Configuration) -> float:
    g = np.asarray(g_height(xi).values, dtype=float)
    return float(g @ sine_weights(xi.n))


def _psi_rows(occ: np.ndarray, k: int) -> np.ndarray:
    n = occ.shape[1]
    g = np.cumsum(occ, axis=1) - np.arange(1, n + 1) * k / n
    return g @ sine_weights(n)


def excl_residual(xi: Configuration) -> float:
    """``|E[Psi' | xi] - (1 - gamma(n)) Psi(xi)|`` by enumerating every sweep outcome."""
    n, k = xi.n, xi.k
    codes = np.arange(2 ** (n - 1))
    edge_bits = ((codes[:, None] >> np.arange(n - 1)[None, :]) & 1).astype(np.uint8)
    total = 0.0
    for d in Direction:
        bits = np.hstack([np.full((len(codes), 1), int(d), np.uint8), edge_bits])
        occ = np.tile(np.asarray(xi.occupancy, dtype=np.int16), (len(codes), 1))
        sweep_batch(occ, bits, "plain")
        total += _psi_rows(occ, k).sum()
    mean = total / (2 * len(codes))
    return abs(mean - (1 - gamma_of_n(n)) * psi_excl(xi))


def _colex_rows(occ: np.ndarray) -> np.ndarray:
    """Vectorized :func:`colex_rank` of each row of a 0/1 array."""
    n = occ.shape[1]
    W = np.array([[math.comb(p, j) for j in range(n + 1)] for p in range(n)], dtype=np.int64)
    j = np.cumsum(occ, axis=1)
    return (occ * W[np.arange(n)[None, :], j]).sum(axis=1)


@lru_cache(maxsize=None)
def _swap_index(n: int, k: int) -> np.ndarray:
    states = configurations(n, k).astype(np.int64)
    out = np.empty((n - 1, len(states)), dtype=np.int64)
    for x in range(1, n):
        moved = states.copy()
        moved[:, [x - 1, x]] = moved[:, [x, x - 1]]
        out[x - 1] = _colex_rows(moved)
    return out


def excl_exact_tv(n: int, k: int, sweeps: int) -> list[Fraction]:
    """Exact TV to uniform on ``Omega_{n,k}`` from the wedge, sweeps ``0..sweeps``."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    size = math.comb(n, k)
    if size == 1:
        return [Fraction(0)] * (sweeps + 1)
    swap = _swap_index(n, k)
    N = np.zeros(size, dtype=object)
    N[...] = 0
    N[Configuration.wedge(n, k).rank()] = 1
    exponent = 0
    curve = []
    for i in range(sweeps + 1):
        scale = 2 ** exponent
        curve.append(Fraction(int(np.abs(N * size - scale).sum()), 2 * size * scale))
        if i == sweeps:
            break
        halves = []
        for d in Direction:
            M = N
            for x in edge_order(n, d):
                M = M + M[swap[x - 1]]
            halves.append(M)
        N = halves[0] + halves[1]
        exponent += n
    return curve


def _phi_sup_excl(n: int, k: int) -> float:
    x = np.arange(1, n + 1)
    return float(np.minimum(np.minimum(x, n - x), min(k, n - k)) @ sine_weights(n))


def excl_lower_bound_report(n: int, k: int, eps: float, *, C: float = R_CONSTANT) -> dict:
    kp = min(k, n - k)
    if kp < 4:
        raise DomainError(f"k' = min(k, n-k) = {kp} must be at least 4")
    wedge = Configuration.wedge(n, kp)
    w = WilsonInputs(phi0=psi_excl(wedge), gamma=gamma_of_n(n), delta=3 * math.pi / (4 * n),
                     R=C * kp * math.log(kp), phi_sup=_phi_sup_excl(n, kp), eps=eps)
    return {"t_lower": wilson_lower_bound(w), "units": "sweeps", "n": n, "k": k,
            "k_prime": kp, "flipped": k > n - k, "C_hat": C, **w.to_dict()}


def excl_lower_bound(n: int, k: int, eps: float, *, C: float = R_CONSTANT) -> float:
    return excl_lower_bound_report(n, k, eps, C=C)["t_lower"]


def excl_coupling_time(n: int, k: int, trials: int, seed: int, *, sweeps: int,
                       same_start: bool = False, record_every: int = 1,
                       trial_ids=None) -> dict:
    """Couple the wedge with the right-packed configuration through full decks.

    Deck one is the identity.  Deck two carries labels ``1..k`` in order on
    the last ``k`` positions and ``k+1..n`` in order on the first ``n-k``,
    so particles are labelled left to right in both chains.  The decks move
    under the matching coupling; the coupling time is the first sweep at
    which every particle card sits at the same position in both decks.
    Returns the tail ``P(T > t)`` and the fraction of runs whose occupancies
    still differ, on a grid of sweeps.  ``trial_ids`` selects the counter
    streams used (default ``0..trials-1``), so runs can be split into chunks.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    a = np.tile(np.arange(1, n + 1, dtype=np.int16), (trials, 1))
    if same_start:
        b = a.copy()
    else:
        second = np.concatenate([np.arange(k + 1, n + 1), np.arange(1, k + 1)]).astype(np.int16)
        b = np.tile(second, (trials, 1))
    ids = np.arange(trials) if trial_ids is None else np.asarray(trial_ids)
    if len(ids) != trials:
        raise ValueError("trial_ids must have one entry per trial")
    T = np.full(trials, -1)
    grid, tail, differ = [], [], []

    def record(i):
        matched = (np.argsort(a, axis=1)[:, :k] == np.argsort(b, axis=1)[:, :k]).all(axis=1)
        T[(T < 0) & matched] = i
        if i % record_every == 0 or i == sweeps:
            grid.append(i)
            tail.append(float((T < 0).mean()))
            differ.append(float(((a <= k) != (b <= k)).any(axis=1).mean()))

    record(0)
    for i in range(sweeps):
        bits = sweep_bits(seed, ids, i, n, STREAM_MAIN)
        aux = sweep_bits(seed, ids, i, n, STREAM_AUX)
        coupled_sweep_batch(a, b, bits, aux)
        record(i + 1)
    return {"n": n, "k": k, "trials": trials, "seed": seed, "units": "sweeps",
            "sweeps": grid, "uncoupled": tail, "occupancy_differs": differ,
            "coupling_times": T}
