"""
Linear recursions for the expected height table under repeated sweeps.

Three vectors are evolved one sweep at a time:

``vbar``
    ``vbar(x) = E[sigma_tilde(x, y)]`` for a fixed label ``y``, indexed by
    ``x = 1..n-1``.  The recursion is exact: interior rows apply the
    increment law with the far ends ``1`` and ``n-1`` excluded from the
    long-range sums, and the two end rows have their own coefficients.

``u``
    A dominating sequence on ``1..n-1`` with ``u(0) = u(n) = 0``; one step
    is the increment-law walk killed on leaving ``1..n-1``.  Started at
    ``vbar`` (nonnegative for the identity) it stays above ``vbar``.

``d``
    Vectors on ``1..n`` evolved by the increment-law walk killed on
    leaving ``1..n``.  From a point mass at ``l`` its total mass is the
    probability that the walk started at ``l`` has not yet left.

The difference ``u(x) - u(x-1)`` of a ``u`` vector does *not* evolve
exactly by the ``d`` recursion: at ``x = 1`` and ``x = n`` a flux term
appears (see :func:`u_boundary_flux`).

Coefficient matrices are built term by term from the recursions, in exact
rationals, and cached.  Steps work on ``Fraction`` object arrays or on
floats; a trailing axis evolves several vectors at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import InvariantError
from .permcore import Permutation, sigma_tilde_field

__all__ = [
    "VectorKind", "DecayVector", "vbar_step", "u_step", "d_step", "differences",
    "u_boundary_flux", "vbar_matrix", "u_matrix", "d_matrix", "point_mass_d",
    "survival_by_start", "decay_bound_check", "decay_rows_csv", "EXACT_STEP_LIMIT",
    "EXACT_N_LIMIT", "killed_walk_rate",
]

EXACT_STEP_LIMIT = 30
EXACT_N_LIMIT = 20


class VectorKind(str, enum.Enum):
    VBAR = "vbar"
    U = "u"
    D = "d"


@dataclass(frozen=True)
class DecayVector:
    """Values over positions; ``vbar`` and ``u`` use ``1..n-1``, ``d`` uses ``1..n``."""

    n: int
    kind: VectorKind
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kind", VectorKind(self.kind))
        expected = self.n if self.kind is VectorKind.D else self.n - 1
        if np.shape(self.values)[0] != expected:
            raise ValueError(f"{self.kind.value} vector for n={self.n} needs {expected} entries")

    @property
    def exact(self) -> bool:
        return np.asarray(self.values).dtype == object

    def to_float(self) -> "DecayVector":
        return DecayVector(self.n, self.kind, np.asarray(self.values, dtype=float))


def _w(k: int) -> Fraction:
    return Fraction(1, 2 ** (k + 3))


@lru_cache(maxsize=None)
def vbar_matrix(n: int) -> np.ndarray:
    """``A[x-1, y-1]``: coefficient of ``vbar(y)`` in the new ``vbar(x)``."""
    A = np.full((n - 1, n - 1), Fraction(0), dtype=object)
    for x in range(2, n - 1):
        for k in range(-1, n - x - 1):
            A[x - 1, x + k - 1] += _w(k)
        for k in range(-1, x - 1):
            A[x - 1, x - k - 1] += _w(k)
    if n >= 3:
        for row, ref in ((0, lambda j: j), (n - 2, lambda j: n - j)):
            A[row, ref(1) - 1] += Fraction(1, 8)
            A[row, ref(2) - 1] += Fraction(1, 4)
            for k in range(2, n - 1):
                A[row, ref(k) - 1] += Fraction(1, 2 ** (k + 2))
    A.setflags(write=False)
    return A


def _killed_matrix(size: int, upper) -> np.ndarray:
    """Recursion with sums ``k = -1..upper(x)`` to the right and ``-1..x-1`` to the left."""
    A = np.full((size, size), Fraction(0), dtype=object)
    for x in range(1, size + 1):
        for k in range(-1, upper(x) + 1):
            y = x + k
            if 1 <= y <= size:
                A[x - 1, y - 1] += _w(k)
        for k in range(-1, x):
            y = x - k
            if 1 <= y <= size:
                A[x - 1, y - 1] += _w(k)
    A.setflags(write=False)
    return A


@lru_cache(maxsize=None)
def u_matrix(n: int) -> np.ndarray:
    return _killed_matrix(n - 1, lambda x: n - x - 1)


@lru_cache(maxsize=None)
def d_matrix(n: int) -> np.ndarray:
    return _killed_matrix(n, lambda x: n - x)


@lru_cache(maxsize=None)
def _float(name: str, n: int) -> np.ndarray:
    return np.asarray({"vbar": vbar_matrix, "u": u_matrix, "d": d_matrix}[name](n), dtype=float)


def _apply(name: str, v: DecayVector) -> DecayVector:
    vals = np.asarray(v.values)
    if vals.dtype == object:
        A = {"vbar": vbar_matrix, "u": u_matrix, "d": d_matrix}[name](v.n)
        out = A.dot(vals)
    else:
        out = _float(name, v.n) @ vals
    return DecayVector(v.n, v.kind, out)


def vbar_step(v: DecayVector, n: int | None = None) -> DecayVector:
    """One sweep of the expected-height recursion."""
    if n is not None and n != v.n:
        raise ValueError("n disagrees with the vector")
    return _apply("vbar", v)


def u_step(u: DecayVector) -> DecayVector:
    return _apply("u", u)


def d_step(d: DecayVector) -> DecayVector:
    return _apply("d", d)


def differences(u: DecayVector) -> DecayVector:
    """``d(x) = u(x) - u(x-1)`` for ``x = 1..n`` with ``u(0) = u(n) = 0``."""
    vals = np.asarray(u.values)
    zero = np.zeros((1,) + vals.shape[1:], dtype=vals.dtype)
    if vals.dtype == object:
        zero[...] = Fraction(0)
    full = np.concatenate([zero, vals, zero], axis=0)
    return DecayVector(u.n, VectorKind.D, full[1:] - full[:-1])


def u_boundary_flux(u: DecayVector) -> tuple:
    """Mass the unkilled walk would carry from ``u`` onto sites ``0`` and ``n``.

    With these, ``differences(u_step(u))`` equals ``d_step(differences(u))``
    plus the first value at ``x = 1`` and minus the second at ``x = n``.
    """
    n = u.n
    vals = np.asarray(u.values)
    if vals.dtype == object:
        coef0 = np.array([_pmf_exact(y) for y in range(1, n)], dtype=object)
        coefn = np.array([_pmf_exact(n - y) for y in range(1, n)], dtype=object)
    else:
        coef0 = np.array([float(_pmf_exact(y)) for y in range(1, n)])
        coefn = coef0[::-1]
    return coef0.dot(vals), coefn.dot(vals)


def _pmf_exact(k: int) -> Fraction:
    a = abs(k)
    return _w(a) + (Fraction(1, 2 ** (3 - a)) if a <= 1 else 0)


def point_mass_d(n: int, l: int, *, exact: bool = False) -> DecayVector:
    if exact:
        v = np.full(n, Fraction(0), dtype=object)
        v[l - 1] = Fraction(1)
    else:
        v = np.zeros(n)
        v[l - 1] = 1.0
    return DecayVector(n, VectorKind.D, v)


def survival_by_start(n: int, s: int) -> np.ndarray:
    """``P(walk from l has not left 1..n by step s)`` for ``l = 1..n`` (floats)."""
    D = _float("d", n)
    surv = np.ones(n)
    for _ in range(s):
        surv = D.T @ surv
    return surv


def _start_columns(n: int, exact: bool) -> np.ndarray:
    """``sigma_tilde_id(x, y)`` for ``x, y = 1..n-1``; column ``y`` is one start."""
    table = sigma_tilde_field(Permutation.identity(n), exact=exact).values
    return table[:-1, :-1]


def decay_bound_check(n: int, t_sweeps: int, delta: float, *, exact: bool = True,
                      record_every: int | None = None) -> dict:
    """Compare the decay of the expected height table with the exponential envelope.

    For the identity start, every column ``y`` of ``sigma_tilde`` is evolved
    as ``vbar`` (exact expectation) and as ``u`` (dominating sequence).
    At each sweep ``s`` the report holds

    * ``lhs``: ``max_{x,y} |E sigma_tilde_s(x, y)|``;
    * ``u_inf``: ``max_y ||u_s||_inf``;
    * ``d_mass``: ``max_y sum_l |d_0(l)| P(walk from l alive at s)``;
    * ``envelope``: ``n exp(-(1-delta) pi^2 t / n^3)`` with ``t = (n-1) s``;
    * ``ratio``: ``d_mass / exp(-(1-delta) pi^2 t / n^3)``.

    The chain ``lhs <= u_inf <= d_mass`` and ``vbar <= u`` are asserted at
    every sweep.  Arithmetic is exact for ``s <= 30`` when ``n <= 20``.
    """
    if n < 3:
        raise ValueError("decay_bound_check needs n >= 3")
    exact = exact and n <= EXACT_N_LIMIT
    crossover = min(EXACT_STEP_LIMIT, t_sweeps) if exact else 0
    V = DecayVector(n, VectorKind.VBAR, _start_columns(n, exact))
    U = DecayVector(n, VectorKind.U, V.values.copy())
    d0 = np.abs(np.asarray(differences(U).values, dtype=float))
    D = _float("d", n)
    surv = np.ones(n)
    rows = []
    every = record_every or max(1, t_sweeps // 200)
    tol = 1e-12
    for s in range(t_sweeps + 1):
        if s == crossover and V.exact:
            V, U = V.to_float(), U.to_float()
        vf = np.asarray(V.values, dtype=float)
        uf = np.asarray(U.values, dtype=float)
        lhs = float(np.abs(vf).max())
        u_inf = float(np.abs(uf).max())
        d_mass = float((d0 * surv[:, None]).sum(axis=0).max())
        if V.exact:
            if not all(a <= b for a, b in zip(V.values.ravel(), U.values.ravel())):
                raise InvariantError(f"vbar exceeds u at sweep {s}")
        elif (vf > uf + tol * max(1.0, u_inf)).any():
            raise InvariantError(f"vbar exceeds u at sweep {s}")
        if lhs > u_inf * (1 + 1e-9) + tol or u_inf > d_mass * (1 + 1e-9) + tol:
            raise InvariantError(f"decay chain broken at sweep {s}: {lhs}, {u_inf}, {d_mass}")
        rate = math.exp(-(1 - delta) * math.pi ** 2 * (n - 1) * s / n ** 3)
        if s % every == 0 or s == t_sweeps:
            rows.append({"s": s, "lhs": lhs, "u_inf": u_inf, "d_mass": d_mass,
                         "envelope": n * rate, "ratio": d_mass / rate})
        if s < t_sweeps:
            V, U = vbar_step(V), u_step(U)
            surv = D.T @ surv
    last = rows[-1]
    return {
        "n": n, "t_sweeps": t_sweeps, "t_steps": (n - 1) * t_sweeps, "delta": delta,
        "units": "sweeps", "exact_until": crossover, "lhs": last["lhs"],
        "u_inf": last["u_inf"], "d_mass": last["d_mass"], "envelope": last["envelope"],
        "ratio": last["ratio"], "ratio_limit": 2 * n, "margin": 2 * n - last["ratio"],
        "rows": rows,
    }


def decay_rows_csv(report: dict) -> str:
    lines = ["s,d_mass,u_inf,envelope,ratio"]
    for r in report["rows"]:
        lines.append(f"{r['s']},{r['d_mass']!r},{r['u_inf']!r},{r['envelope']!r},{r['ratio']!r}")
    return "\n".join(lines) + "\n"


def killed_walk_rate(n: int) -> float:
    """Top eigenvalue of the ``d`` recursion (floats)."""
    return float(np.max(np.abs(np.linalg.eigvalsh(_float("d", n)))))

