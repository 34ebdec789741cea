"""
Permutations of ``{1, ..., n}`` and the statistics built on them.

A permutation is stored in one-line notation, position -> label, with
1-based positions and labels at every public interface.  The height
statistic

    sigma_tilde(x, y) = #{z <= x : sigma(z) <= y} - x*y/n

drives the partial order used by the monotone coupling (the identity is
the maximum, the reversal ``z -> n+1-z`` the minimum), the block
projections ``sigma_hat``/``sigma_bar`` and the block subgroup ``T_n``.

Distributions on ``S_n`` are dense vectors indexed by Lehmer rank, which
coincides with lexicographic order of the one-line notation.  That order
is part of the serialization format and must not change.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import CapacityError

__all__ = [
    "Permutation", "BlockPartition", "SigmaTildeField", "ExactDistribution",
    "sigma_tilde", "sigma_tilde_field", "sigma_tilde_counts", "order_leq",
    "project_hat", "project_bar", "in_Tn", "block_subgroup", "uniformize",
    "lehmer_rank", "lehmer_unrank", "perm_table", "rank_rows",
    "MAX_TABLE_N",
]

# n! rows of int8 labels; 9! rows is about 3 MB
MAX_TABLE_N = 9


@dataclass(frozen=True)
class Permutation:
    """An arrangement of the labels ``1..n``; ``mapping[z-1]`` is the label at position ``z``."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(v) for v in self.mapping)
        object.__setattr__(self, "mapping", m)
        if not m:
            raise ValueError("a permutation needs at least one card")
        if sorted(m) != list(range(1, len(m) + 1)):
            raise ValueError(f"not a permutation of 1..{len(m)}: {list(m)}")

    @property
    def n(self) -> int:
        return len(self.mapping)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def reversal(cls, n: int) -> "Permutation":
        return cls(tuple(range(n, 0, -1)))

    @classmethod
    def from_rank(cls, n: int, rank: int) -> "Permutation":
        return cls(lehmer_unrank(n, rank))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Permutation":
        return cls(tuple(int(v) for v in rng.permutation(n) + 1))

    def __call__(self, z: int) -> int:
        """Label at position ``z`` (1-based)."""
        if not 1 <= z <= self.n:
            raise ValueError(f"position {z} outside 1..{self.n}")
        return self.mapping[z - 1]

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for pos, label in enumerate(self.mapping, start=1):
            inv[label - 1] = pos
        return Permutation(tuple(inv))

    def positions(self) -> tuple[int, ...]:
        """Card positions: entry ``a-1`` is the position of label ``a``."""
        return self.inverse().mapping

    def compose(self, other: "Permutation") -> "Permutation":
        """``(self o other)(z) = self(other(z))``."""
        if other.n != self.n:
            raise ValueError("cannot compose permutations of different sizes")
        return Permutation(tuple(self.mapping[v - 1] for v in other.mapping))

    def rank(self) -> int:
        return lehmer_rank(self.mapping)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.mapping, dtype=np.int64)

    def to_json(self) -> str:
        return json.dumps(list(self.mapping), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Permutation":
        return cls(tuple(json.loads(text)))

    def __str__(self):
        return self.to_json()


# -- Lehmer ranking ----------------------------------------------------------

def lehmer_rank(mapping) -> int:
    """Rank of a one-line permutation of ``1..n`` in lexicographic order."""
    n = len(mapping)
    rank = 0
    for i, v in enumerate(mapping):
        smaller = sum(1 for w in mapping[i + 1:] if w < v)
        rank += smaller * math.factorial(n - 1 - i)
    return rank


def lehmer_unrank(n: int, rank: int) -> tuple[int, ...]:
    if not 0 <= rank < math.factorial(n):
        raise ValueError(f"rank {rank} outside 0..{n}!-1")
    pool = list(range(1, n + 1))
    out = []
    for i in range(n, 0, -1):
        f = math.factorial(i - 1)
        q, rank = divmod(rank, f)
        out.append(pool.pop(q))
    return tuple(out)


@lru_cache(maxsize=None)
def _table(n: int) -> np.ndarray:
    table = np.array(list(itertools.permutations(range(1, n + 1))), dtype=np.int8)
    table.setflags(write=False)
    return table


def perm_table(n: int) -> np.ndarray:
    """All of ``S_n`` as an ``(n!, n)`` label array, row ``r`` having Lehmer rank ``r``."""
    if n > MAX_TABLE_N:
        raise CapacityError(f"S_{n} has {math.factorial(n)} states; the table stops at n={MAX_TABLE_N}",
                            parameter="n", limit=MAX_TABLE_N)
    return _table(n)


def rank_rows(perms: np.ndarray) -> np.ndarray:
    """Vectorized Lehmer rank of each row of an ``(m, n)`` label array."""
    perms = np.asarray(perms)
    m, n = perms.shape
    ranks = np.zeros(m, dtype=np.int64)
    for i in range(n - 1):
        smaller = (perms[:, i + 1:] < perms[:, i:i + 1]).sum(axis=1)
        ranks += smaller * math.factorial(n - 1 - i)
    return ranks


# -- the height statistic ----------------------------------------------------

def _check_xy(n, x, y):
    if not (1 <= x <= n and 1 <= y <= n):
        raise ValueError(f"(x, y) = ({x}, {y}) outside [1, {n}]^2")


def sigma_tilde(sigma: Permutation, x: int, y: int, *, exact: bool = False):
    """Count of positions ``z <= x`` holding a label ``<= y``, minus ``x*y/n``."""
    n = sigma.n
    _check_xy(n, x, y)
    count = sum(1 for v in sigma.mapping[:x] if v <= y)
    if exact:
        return count - Fraction(x * y, n)
    return count - x * y / n


def sigma_tilde_counts(mapping) -> np.ndarray:
    """Integer part of the field: ``C[x-1, y-1] = #{z <= x : sigma(z) <= y}``.

    Accepts a single permutation or an ``(m, n)`` batch of label arrays.
    """
    arr = np.asarray(mapping.mapping if isinstance(mapping, Permutation) else mapping)
    n = arr.shape[-1]
    labels = np.arange(1, n + 1)
    below = arr[..., :, None] <= labels  # [..., z, y]
    return np.cumsum(below, axis=-2, dtype=np.int32)


@dataclass(frozen=True)
class SigmaTildeField:
    """The full ``n x n`` table of ``sigma_tilde``; ``values[x-1, y-1]``."""

    n: int
    values: np.ndarray

    def check(self) -> None:
        """Raise ``AssertionError`` if a structural invariant fails."""
        v = self.values
        n = self.n
        exact = v.dtype == object
        zero = (lambda a: all(e == 0 for e in a)) if exact else (lambda a: np.allclose(a, 0.0, atol=1e-9))
        assert zero(v[:, n - 1]), "last column must vanish"
        assert zero(v[n - 1, :]), "last row must vanish"
        prev = np.concatenate([np.zeros((1, n), dtype=v.dtype), v[:-1]], axis=0)
        steps = v - prev
        ys = np.arange(1, n + 1)
        for y in range(n):
            lo = -Fraction(int(ys[y]), n) if exact else -ys[y] / n
            for s in steps[:, y]:
                ok = (s == lo or s == lo + 1) if exact else (abs(s - lo) < 1e-9 or abs(s - lo - 1) < 1e-9)
                assert ok, f"increment {s} not in {{{lo}, {lo + 1}}}"


def sigma_tilde_field(sigma: Permutation, *, exact: bool = False) -> SigmaTildeField:
    n = sigma.n
    counts = sigma_tilde_counts(sigma)
    xs = np.arange(1, n + 1)
    if exact:
        offset = np.array([[Fraction(int(x) * int(y), n) for y in xs] for x in xs], dtype=object)
        values = counts.astype(object) - offset
    else:
        values = counts - np.outer(xs, xs) / n
    return SigmaTildeField(n, values)


def order_leq(a: Permutation, b: Permutation) -> bool:
    """True iff ``a <= b``, i.e. ``sigma_tilde_a <= sigma_tilde_b`` everywhere."""
    if a.n != b.n:
        raise ValueError(f"cannot compare S_{a.n} with S_{b.n}")
    return bool((sigma_tilde_counts(a) <= sigma_tilde_counts(b)).all())


# -- block projections -------------------------------------------------------

@dataclass(frozen=True)
class BlockPartition:
    """Cut points ``x_i = floor(i*n/K)`` splitting ``[n]`` into ``K`` blocks."""

    n: int
    K: int

    def __post_init__(self):
        if self.n < 1 or not 1 <= self.K <= self.n:
            raise ValueError(f"need 1 <= K <= n, got n={self.n}, K={self.K}")

    @property
    def cutpoints(self) -> tuple[int, ...]:
        return tuple((i * self.n) // self.K for i in range(self.K + 1))

    @property
    def sizes(self) -> tuple[int, ...]:
        c = self.cutpoints
        return tuple(c[i] - c[i - 1] for i in range(1, self.K + 1))

    @property
    def interior_cuts(self) -> tuple[int, ...]:
        """The edges ``x_i`` for ``i in [K-1]``."""
        return self.cutpoints[1:-1]

    def block_of(self) -> np.ndarray:
        """Block index (1-based) of each label ``1..n``."""
        out = np.empty(self.n, dtype=np.int64)
        c = self.cutpoints
        for i in range(1, self.K + 1):
            out[c[i - 1]:c[i]] = i
        return out


def _field_columns(sigma: Permutation, cols, exact: bool):
    n = sigma.n
    counts = sigma_tilde_counts(sigma)
    xs = np.arange(1, n + 1)
    sub = counts[:, [c - 1 for c in cols]]
    if exact:
        return sub.astype(object) - np.array(
            [[Fraction(int(x) * c, n) for c in cols] for x in xs], dtype=object)
    return sub - np.outer(xs, cols) / n


def project_hat(sigma: Permutation, part: BlockPartition, *, exact: bool = False) -> np.ndarray:
    """``sigma_hat[x-1, j-1] = sigma_tilde(x, x_j)``, shape ``(n, K)``."""
    if part.n != sigma.n:
        raise ValueError("partition and permutation disagree on n")
    return _field_columns(sigma, part.cutpoints[1:], exact)


def project_bar(sigma: Permutation, part: BlockPartition, *, exact: bool = False) -> np.ndarray:
    """``sigma_bar[i-1, j-1] = sigma_tilde(x_i, x_j)``, shape ``(K, K)``."""
    hat = project_hat(sigma, part, exact=exact)
    return hat[[c - 1 for c in part.cutpoints[1:]], :]


def in_Tn(sigma: Permutation, part: BlockPartition) -> bool:
    """True iff every block of positions carries exactly its own labels."""
    if part.n != sigma.n:
        raise ValueError("partition and permutation disagree on n")
    c = part.cutpoints
    return all(set(sigma.mapping[c[i - 1]:c[i]]) == set(range(c[i - 1] + 1, c[i] + 1))
               for i in range(1, part.K + 1))


def block_subgroup(part: BlockPartition) -> list[Permutation]:
    """Every element of ``T_n``; its size is the product of the block factorials."""
    c = part.cutpoints
    blocks = [list(itertools.permutations(range(c[i - 1] + 1, c[i] + 1)))
              for i in range(1, part.K + 1)]
    return [Permutation(tuple(itertools.chain.from_iterable(choice)))
            for choice in itertools.product(*blocks)]


# -- distributions -----------------------------------------------------------

@dataclass(frozen=True)
class ExactDistribution:
    """Probability vector over ``S_n`` (Lehmer order) or over ``Omega_{n,k}`` (colex order).

    ``probs`` is an object array of ``Fraction`` for exact work or a float
    array otherwise.  ``k`` is ``None`` for distributions on permutations.
    """

    n: int
    probs: np.ndarray
    k: int | None = None

    def __post_init__(self):
        p = np.asarray(self.probs)
        if p.dtype != object:
            p = p.astype(np.float64)
        object.__setattr__(self, "probs", p)
        if len(p) != self.size:
            raise ValueError(f"expected {self.size} probabilities, got {len(p)}")

    @property
    def size(self) -> int:
        if self.k is None:
            return math.factorial(self.n)
        return math.comb(self.n, self.k)

    @property
    def exact(self) -> bool:
        return self.probs.dtype == object

    @property
    def ordering(self) -> str:
        return "lehmer" if self.k is None else "colex"

    @classmethod
    def uniform(cls, n: int, k: int | None = None, *, exact: bool = True) -> "ExactDistribution":
        size = math.factorial(n) if k is None else math.comb(n, k)
        if exact:
            return cls(n, np.array([Fraction(1, size)] * size, dtype=object), k)
        return cls(n, np.full(size, 1.0 / size), k)

    @classmethod
    def point_mass(cls, sigma: Permutation, *, exact: bool = True) -> "ExactDistribution":
        size = math.factorial(sigma.n)
        if exact:
            p = np.array([Fraction(0)] * size, dtype=object)
            p[sigma.rank()] = Fraction(1)
        else:
            p = np.zeros(size)
            p[sigma.rank()] = 1.0
        return cls(sigma.n, p)

    def total(self):
        return sum(self.probs) if self.exact else float(self.probs.sum())

    def is_normalized(self, tol: float = 1e-12) -> bool:
        if self.exact:
            return self.total() == 1 and all(v >= 0 for v in self.probs)
        return abs(self.total() - 1.0) <= tol and bool((self.probs >= -tol).all())

    def to_float(self) -> "ExactDistribution":
        return ExactDistribution(self.n, np.array([float(v) for v in self.probs]), self.k)

    def to_json(self) -> str:
        nz = [i for i, v in enumerate(self.probs) if v != 0]
        probs = [str(self.probs[i]) if self.exact else float(self.probs[i]) for i in nz]
        doc = {"n": self.n, "ordering": self.ordering, "ranks": nz, "probs": probs}
        if self.k is not None:
            doc["k"] = self.k
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ExactDistribution":
        doc = json.loads(text)
        n, k = doc["n"], doc.get("k")
        size = math.factorial(n) if k is None else math.comb(n, k)
        exact = any(isinstance(v, str) for v in doc["probs"]) or not doc["probs"]
        if exact:
            p = np.array([Fraction(0)] * size, dtype=object)
            for r, v in zip(doc["ranks"], doc["probs"]):
                p[r] = Fraction(v)
        else:
            p = np.zeros(size)
            p[doc["ranks"]] = doc["probs"]
        return cls(n, p, k)


def uniformize(nu: ExactDistribution, part: BlockPartition) -> ExactDistribution:
    """Average ``nu`` over left-composition by the block subgroup ``T_n``.

    ``nu_u(sigma) = |T_n|^{-1} sum_{tau in T_n} nu(tau o sigma)``.
    """
    if nu.k is not None:
        raise ValueError("uniformize acts on distributions over S_n")
    if part.n != nu.n:
        raise ValueError("partition and distribution disagree on n")
    if not nu.is_normalized():
        raise ValueError("input distribution is not normalized")
    table = perm_table(nu.n).astype(np.int64)
    group = block_subgroup(part)
    acc = np.zeros(len(table), dtype=nu.probs.dtype)
    if nu.exact:
        acc[:] = Fraction(0)
    for tau in group:
        relabel = np.asarray(tau.mapping)[table - 1]
        acc = acc + nu.probs[rank_rows(relabel)]
    if nu.exact:
        size = len(group)
        acc = np.array([v / size for v in acc], dtype=object)
    else:
        acc = acc / len(group)
    return ExactDistribution(nu.n, acc)
