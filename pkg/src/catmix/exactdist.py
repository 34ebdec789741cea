"""
Exact distributions of the shuffle on small decks.

States are indexed by Lehmer rank.  A sweep acts on the position side of
a deck, ``sigma -> sigma o pi``, so a distribution ``nu`` over ``S_n`` is
advanced edge by edge:

    nu'(tau) = (nu(tau) + nu(tau o s_x)) / 2.

Exact evolution keeps integer numerators over a power-of-two denominator,
so one edge update is ``N' = N + N[swap_x]`` and doubles the denominator.
A censored edge is skipped by doubling ``N`` instead, which keeps every
distribution in a sweep over a common denominator.

Dense one-sweep kernels are assembled separately, by running every deck
through every sweep outcome, and serve as an independent route to the
same transition probabilities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .dynamics import CensoringScheme, Direction, edge_order, sweep_batch
from .errors import CapacityError, InvariantError
from .permcore import (BlockPartition, ExactDistribution, Permutation, perm_table,
                       rank_rows, sigma_tilde_counts, uniformize)

__all__ = [
    "SweepKernel", "build_sweep_kernel", "edge_swap_index", "Evolver", "tv_distance",
    "tv_curve", "mixing_time_exact", "mixing_time_report", "censoring_compare",
    "CensoringComparison", "projected_tv", "MODELS", "DENSE_LIMIT", "EXACT_LIMIT",
    "TV_LIMIT",
]

MODELS = ("cat", "monotone", "single", "at")
DENSE_LIMIT = 8   # assembled kernels
EXACT_LIMIT = 6   # rational evolution
TV_LIMIT = 7      # float evolution


def _outcome_bits(n: int, direction: int) -> np.ndarray:
    codes = np.arange(2 ** (n - 1))
    bits = ((codes[:, None] >> np.arange(n - 1)[None, :]) & 1).astype(np.uint8)
    return np.concatenate([np.full((len(codes), 1), direction, np.uint8), bits], axis=1)


@dataclass(frozen=True)
class SweepKernel:
    """``P[a, b] = counts[a, b] / denominator`` for Lehmer ranks ``a``, ``b``."""

    n: int
    model: str
    counts: sp.csr_matrix
    denominator: int

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.counts.sum(axis=1)).ravel()

    def col_sums(self) -> np.ndarray:
        return np.asarray(self.counts.sum(axis=0)).ravel()

    def is_doubly_stochastic(self) -> bool:
        return bool((self.row_sums() == self.denominator).all()
                    and (self.col_sums() == self.denominator).all())

    def entry(self, a: int, b: int) -> Fraction:
        return Fraction(int(self.counts[a, b]), self.denominator)

    def to_dense(self, exact: bool = False) -> np.ndarray:
        dense = self.counts.toarray()
        if exact:
            return np.array([[Fraction(int(c), self.denominator) for c in row] for row in dense],
                            dtype=object)
        return dense / self.denominator

    def equals(self, other: "SweepKernel") -> bool:
        """Exact equality of the transition probabilities."""
        if self.n != other.n:
            return False
        lhs = self.counts * other.denominator
        rhs = other.counts * self.denominator
        return (lhs != rhs).nnz == 0

    def to_json(self) -> str:
        rows = []
        for a in range(self.counts.shape[0]):
            lo, hi = self.counts.indptr[a], self.counts.indptr[a + 1]
            rows.append([[int(c), int(v)] for c, v in zip(self.counts.indices[lo:hi],
                                                          self.counts.data[lo:hi])])
        return json.dumps({"n": self.n, "model": self.model, "ordering": "lehmer",
                           "denominator": self.denominator, "rows": rows})


def build_sweep_kernel(n: int, model: str = "cat") -> SweepKernel:
    """Assemble the one-sweep (or one-step, for ``"at"``) kernel by enumeration."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {MODELS}")
    if n < 2:
        raise ValueError("n must be at least 2")
    if n > DENSE_LIMIT:
        raise CapacityError(f"dense kernels stop at n={DENSE_LIMIT}; use Evolver for n={n}",
                            parameter="n", limit=DENSE_LIMIT)
    table = perm_table(n).astype(np.int16)
    size = len(table)
    cols = []
    if model == "at":
        cols.append(np.tile(np.arange(size), n - 1))
        for x in range(1, n):
            moved = table.copy()
            moved[:, [x - 1, x]] = moved[:, [x, x - 1]]
            cols.append(rank_rows(moved))
        denominator = 2 * (n - 1)
    else:
        rule = "monotone" if model == "monotone" else "plain"
        directions = [0] if model == "single" else [0, 1]
        for d in directions:
            for bits in _outcome_bits(n, d):
                decks = sweep_batch(table.copy(), np.broadcast_to(bits, (size, n)), rule)
                cols.append(rank_rows(decks))
        denominator = len(directions) * 2 ** (n - 1)
    cols = np.concatenate(cols)
    rows = np.tile(np.arange(size), len(cols) // size)
    counts = sp.csr_matrix((np.ones(len(cols), dtype=np.int64), (rows, cols)), shape=(size, size))
    counts.sum_duplicates()
    return SweepKernel(n, model, counts, denominator)


@lru_cache(maxsize=None)
def edge_swap_index(n: int) -> np.ndarray:
    """``idx[x-1, r]`` is the rank of deck ``r`` with positions ``x, x+1`` exchanged."""
    table = perm_table(n).astype(np.int16)
    out = np.empty((n - 1, len(table)), dtype=np.int64)
    for x in range(1, n):
        moved = table.copy()
        moved[:, [x - 1, x]] = moved[:, [x, x - 1]]
        out[x - 1] = rank_rows(moved)
    out.setflags(write=False)
    return out


class Evolver:
    """Edge-by-edge evolution of distributions (rows of a 2-d array allowed).

    With ``exact=True`` the state is an object array of Python integers
    ``N`` with ``distribution = N / 2**exponent``.
    """

    def __init__(self, n: int, *, exact: bool | None = None, model: str = "cat"):
        if n > TV_LIMIT:
            raise CapacityError(f"exact evolution stops at n={TV_LIMIT}", parameter="n",
                                limit=TV_LIMIT)
        self.n = n
        self.exact = n <= EXACT_LIMIT if exact is None else exact
        if self.exact and n > EXACT_LIMIT:
            raise CapacityError(f"rational evolution stops at n={EXACT_LIMIT}", parameter="n",
                                limit=EXACT_LIMIT)
        if model not in ("cat", "monotone", "single"):
            raise ValueError(f"Evolver supports cat, monotone and single, not {model!r}")
        self.model = model
        self.swap = edge_swap_index(n)

    def _direction(self, N, direction, blocked):
        for x in edge_order(self.n, direction):
            if x in blocked:
                N = N + N
            else:
                N = N + N[..., self.swap[x - 1]]
        return N

    def step(self, N, blocked=frozenset()):
        """One sweep; returns the new numerators (exponent grows by ``n`` or ``n-1``)."""
        if self.model == "single":
            return self._direction(N, Direction.LEFT_TO_RIGHT, blocked)
        return (self._direction(N, Direction.LEFT_TO_RIGHT, blocked)
                + self._direction(N, Direction.RIGHT_TO_LEFT, blocked))

    @property
    def exponent_per_sweep(self) -> int:
        return self.n - 1 if self.model == "single" else self.n

    def start(self, ranks) -> np.ndarray:
        """Point masses at the given ranks, one per row."""
        ranks = np.atleast_1d(ranks)
        size = math.factorial(self.n)
        if self.exact:
            N = np.zeros((len(ranks), size), dtype=object)
            N[...] = 0
            N[np.arange(len(ranks)), ranks] = 1
        else:
            N = np.zeros((len(ranks), size))
            N[np.arange(len(ranks)), ranks] = 1.0
        return N

    def tv_to_uniform(self, N, exponent: int):
        """TV of each row to uniform, exact when the state is exact."""
        size = N.shape[-1]
        if self.exact:
            # 1/2 sum |N/2^e - 1/size| = sum |size*N - 2^e| / (2 * size * 2^e)
            scale = 2 ** exponent
            dev = np.abs(N * size - scale).sum(axis=-1)
            return [Fraction(int(v), 2 * size * scale) for v in np.atleast_1d(dev)]
        return list(np.atleast_1d(0.5 * np.abs(N - 1.0 / size).sum(axis=-1)))


def _float_step(ev: Evolver, N, blocked=frozenset()):
    N = ev.step(N, blocked)
    return N / (2.0 ** ev.exponent_per_sweep)


def tv_distance(p: ExactDistribution, q: ExactDistribution):
    """Half the L1 distance; exact when both inputs are exact."""
    if p.n != q.n or p.k != q.k:
        raise ValueError("distributions live on different state spaces")
    if p.exact and q.exact:
        return sum(abs(a - b) for a, b in zip(p.probs, q.probs)) / 2
    return 0.5 * float(np.abs(np.asarray(p.probs, float) - np.asarray(q.probs, float)).sum())


def _run_tv(n, sweeps, ranks, model="cat", scheme=None, exact=None):
    ev = Evolver(n, exact=exact, model=model)
    N = ev.start(ranks)
    exponent = 0
    curve = [ev.tv_to_uniform(N, exponent)]
    for i in range(sweeps):
        blocked = scheme.censored_edges(i) if scheme is not None else frozenset()
        if ev.exact:
            N = ev.step(N, blocked)
            exponent += ev.exponent_per_sweep
        else:
            N = _float_step(ev, N, blocked)
        curve.append(ev.tv_to_uniform(N, exponent))
    return curve


def tv_curve(n: int, sweeps: int, start: Permutation | None = None, *, model: str = "cat",
             scheme: CensoringScheme | None = None, exact: bool | None = None) -> list:
    """``tv(P^i_start, mu)`` for ``i = 0..sweeps``."""
    start = start or Permutation.identity(n)
    return [row[0] for row in _run_tv(n, sweeps, [start.rank()], model, scheme, exact)]


def mixing_time_report(n: int, eps: float, *, model: str = "cat", max_sweeps: int = 1000) -> dict:
    """Smallest sweep count with worst-start TV at most ``eps``.

    For ``n <= 5`` every start is evolved.  For ``n`` in ``{6, 7}`` only the
    identity and the reversal are, and the result is labelled as a lower
    envelope of the maximum.
    """
    if n > TV_LIMIT:
        raise CapacityError(f"exact mixing times stop at n={TV_LIMIT}", parameter="n",
                            limit=TV_LIMIT)
    if n <= 5:
        ranks = np.arange(math.factorial(n))
        scope = "all starts"
    else:
        ranks = np.array([0, math.factorial(n) - 1])
        scope = "lower envelope of the max (id and reversal only)"
    ev = Evolver(n, model=model)
    N = ev.start(ranks)
    exponent = 0
    curve = []
    for i in range(max_sweeps + 1):
        worst = max(ev.tv_to_uniform(N, exponent))
        curve.append(worst)
        if worst <= eps:
            return {"n": n, "eps": eps, "t_mix": i, "units": "sweeps", "scope": scope,
                    "exact": ev.exact, "curve": curve}
        if ev.exact:
            N = ev.step(N)
            exponent += ev.exponent_per_sweep
        else:
            N = _float_step(ev, N)
    raise InvariantError(f"no mixing within {max_sweeps} sweeps at eps={eps}")


def mixing_time_exact(n: int, eps: float, **kwargs) -> int:
    return mixing_time_report(n, eps, **kwargs)["t_mix"]


@dataclass(frozen=True)
class CensoringComparison:
    n: int
    scheme: dict
    plain: list
    censored: list

    @property
    def violations(self) -> list[int]:
        return [i for i, (a, b) in enumerate(zip(self.plain, self.censored)) if b < a]

    def check(self) -> None:
        if self.violations:
            raise InvariantError(f"censored TV below plain TV at sweeps {self.violations}")

    def rows(self) -> list[dict]:
        return [{"sweep": i, "tv_plain": float(a), "tv_censored": float(b)}
                for i, (a, b) in enumerate(zip(self.plain, self.censored))]


def censoring_compare(n: int, scheme: CensoringScheme, sweeps: int) -> CensoringComparison:
    """Exact TV from the identity with and without censoring, sweep by sweep."""
    if n > EXACT_LIMIT:
        raise CapacityError(f"censoring comparison stops at n={EXACT_LIMIT}", parameter="n",
                            limit=EXACT_LIMIT)
    plain = tv_curve(n, sweeps, model="monotone")
    censored = tv_curve(n, sweeps, model="monotone", scheme=scheme)
    return CensoringComparison(n, scheme.to_dict(), plain, censored)


def _pushforward(nu: ExactDistribution, keys: np.ndarray) -> dict:
    out: dict = {}
    for key, p in zip(map(bytes, keys), nu.probs):
        out[key] = out.get(key, 0) + p
    return out


def _tv_dicts(a: dict, b: dict):
    return sum(abs(a.get(k, 0) - b.get(k, 0)) for k in set(a) | set(b)) / 2


def projected_tv(nu: ExactDistribution, part: BlockPartition) -> dict:
    """TV of the block projections to uniform and of the block-uniformized law.

    Returns ``tv_hat``, ``tv_bar``, ``tv_u`` plus ``tv`` and ``tv_to_u`` for
    the triangle bound ``tv <= tv_to_u + tv_hat``.  Raises
    :class:`InvariantError` if ``tv_hat != tv_u`` or the triangle bound
    fails (exactly for rational inputs, to ``1e-12`` otherwise).
    """
    n = nu.n
    if n > TV_LIMIT:
        raise CapacityError(f"projected TV stops at n={TV_LIMIT}", parameter="n", limit=TV_LIMIT)
    counts = sigma_tilde_counts(perm_table(n)).astype(np.int8)
    cuts = [c - 1 for c in part.cutpoints[1:]]
    hat_keys = np.ascontiguousarray(counts[:, :, cuts])
    bar_keys = np.ascontiguousarray(counts[:, cuts][:, :, cuts])
    mu = ExactDistribution.uniform(n, exact=nu.exact)
    tv_hat = _tv_dicts(_pushforward(nu, hat_keys), _pushforward(mu, hat_keys))
    tv_bar = _tv_dicts(_pushforward(nu, bar_keys), _pushforward(mu, bar_keys))
    nu_u = uniformize(nu, part)
    tv_u = tv_distance(nu_u, mu)
    tv = tv_distance(nu, mu)
    tv_to_u = tv_distance(nu, nu_u)
    tol = 0 if nu.exact else 1e-12
    if abs(tv_hat - tv_u) > tol:
        raise InvariantError(f"projection identity failed: {tv_hat} != {tv_u}")
    if tv > tv_to_u + tv_hat + tol:
        raise InvariantError("triangle bound failed")
    return {"tv_hat": tv_hat, "tv_bar": tv_bar, "tv_u": tv_u, "tv": tv, "tv_to_u": tv_to_u}
