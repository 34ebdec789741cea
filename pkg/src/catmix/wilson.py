"""
Eigenfunction lower bounds on mixing times.

If a statistic ``Phi`` contracts by ``1 - gamma`` per step up to an error
``delta``, and its squared increments have conditional mean at most ``R``,
then after

    t = log(Phi(x0)) / g - log(48 (delta ||Phi||_inf + R) / (gamma eps)) / (2 g),

steps, with ``g = -log(1 - gamma)``, the chain started at ``x0`` is still
at total variation distance at least ``1 - eps`` from equilibrium.

For the shuffle, ``Phi`` is the first sine mode of the height function and
``gamma(n) = 1 - E cos(pi X / n)`` for the increment law ``X``.  The
second-moment constant is not known in closed form; it is fitted by Monte
Carlo once (:data:`R_CONSTANT`) and reported with every bound.

Two reference chains with exact eigenfunctions are included as oracles:
the lazy walk on a cycle and the lazy walk on a hypercube.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .decay import DecayVector, vbar_step
from .dynamics import Direction, run_batch, sweep_batch
from .errors import DomainError
from .observables import height, phi, phi_batch, sine_weights
from .permcore import Permutation

__all__ = [
    "WilsonInputs", "wilson_lower_bound", "gamma_of_n", "gamma_series",
    "first_moment_residual", "second_moment_estimate", "fit_second_moment_constant",
    "cat_lower_bound", "cat_lower_bound_report", "cycle_oracle", "hypercube_oracle",
    "distinguishing_time", "drift_variance_check", "R_CONSTANT", "GAMMA_MAX",
]

GAMMA_MAX = 2 - math.sqrt(2)

# max over n in {16, 32, 64} of (estimate + 3 s.e.) of E[(dPhi)^2 | sigma] / (n log n), rounded up
R_CONSTANT = 0.12


@dataclass(frozen=True)
class WilsonInputs:
    phi0: float
    gamma: float
    delta: float
    R: float
    phi_sup: float
    eps: float

    def __post_init__(self):
        if not 0 < self.gamma < GAMMA_MAX:
            raise DomainError(f"gamma={self.gamma} outside (0, 2 - sqrt 2)")
        if self.phi0 <= 0:
            raise DomainError("phi0 must be positive")
        if self.delta < 0:
            raise DomainError("delta must be nonnegative")
        if self.R <= 0 or self.phi_sup <= 0:
            raise DomainError("R and phi_sup must be positive")
        if not 0 < self.eps < 1:
            raise DomainError("eps must lie in (0, 1)")

    @property
    def gamma_star(self) -> float:
        return -math.log1p(-self.gamma)

    def to_dict(self) -> dict:
        return asdict(self)


def wilson_lower_bound(w: WilsonInputs) -> float:
    """The step count ``t`` of the lower bound; may be negative when vacuous."""
    g = w.gamma_star
    noise = 48 * (w.delta * w.phi_sup + w.R) / (w.gamma * w.eps)
    return math.log(w.phi0) / g - math.log(noise) / (2 * g)


# -- contraction rate ---------------------------------------------------------------

def gamma_of_n(n: int) -> float:
    """``1 - sum_{k>=-1} cos(k pi/n) 2^-(k+2)`` in closed form."""
    if n < 2:
        raise ValueError("gamma_of_n needs n >= 2")
    c = math.cos(math.pi / n)
    return 1 - (c / 2 + (1 - c / 2) / (5 - 4 * c))


def gamma_series(n: int, kmax: int = 200) -> tuple[float, float]:
    """Truncated series for ``gamma(n)`` and a bound on the neglected tail."""
    k = np.arange(-1, kmax + 1)
    terms = np.cos(k * math.pi / n) * 2.0 ** -(k + 2)
    return float(1 - math.fsum(terms)), 2.0 ** -(kmax + 2)


# -- moments of the sine statistic --------------------------------------------------------

def _all_outcomes(n: int) -> np.ndarray:
    codes = np.arange(2 ** (n - 1))
    bits = ((codes[:, None] >> np.arange(n - 1)[None, :]) & 1).astype(np.uint8)
    return np.vstack([np.hstack([np.full((len(codes), 1), d, np.uint8), bits]) for d in Direction])


def _expected_height_enumerated(sigma: Permutation) -> np.ndarray:
    n = sigma.n
    bits = _all_outcomes(n)
    decks = np.tile(np.asarray(sigma.mapping, dtype=np.int16), (len(bits), 1))
    sweep_batch(decks, bits, "plain")
    m = n // 2
    total = np.cumsum(decks <= m, axis=1).sum(axis=0)  # exact integer sums
    return total / len(bits) - np.arange(1, n + 1) * m / n


def _expected_height_recursion(sigma: Permutation) -> np.ndarray:
    n = sigma.n
    h = np.asarray(height(sigma, exact=True).values[:-1], dtype=object)
    out = vbar_step(DecayVector(n, "vbar", h)).values
    return np.append(np.asarray(out, dtype=float), 0.0)


def first_moment_residual(sigma: Permutation, mode: str = "enumerate") -> float:
    """``|E[Phi' | sigma] - (1 - gamma(n)) Phi(sigma)|`` after one sweep."""
    n = sigma.n
    if mode == "enumerate":
        if n > 16:
            raise DomainError("enumeration mode is limited to n <= 16")
        eh = _expected_height_enumerated(sigma)
    elif mode == "recursion":
        eh = _expected_height_recursion(sigma)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    w = sine_weights(n)[:-1]
    return abs(float(eh[:-1] @ w) - (1 - gamma_of_n(n)) * phi(sigma))


def _sample_states(n: int, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Identity, reversal, uniform draws and states along a run from the identity."""
    states = [np.arange(1, n + 1), np.arange(n, 0, -1)]
    while len(states) < count // 2:
        states.append(rng.permutation(n) + 1)
    deck = np.arange(1, n + 1, dtype=np.int16)[None, :]
    horizon = max(1, int(n * n * math.log(n) / (2 * math.pi ** 2)))
    checkpoints = set(np.linspace(1, horizon, count - len(states)).astype(int))
    for i in range(1, horizon + 1):
        sweep_batch(deck, rng.integers(0, 2, size=(1, n)).astype(np.uint8))
        if i in checkpoints:
            states.append(deck[0].copy())
    return states


def second_moment_estimate(n: int, trials: int, rng: np.random.Generator, *,
                           states: int = 16) -> dict:
    """Largest estimated ``E[(Phi' - Phi)^2 | sigma]`` over a panel of states.

    Each state gets ``trials`` independent sweeps.  Returns the maximum,
    its standard error and the per-state means.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    panel = [np.arange(1, n + 1)] if n <= 2 else _sample_states(n, states, rng)
    means, errs = [], []
    for s in panel:
        decks = np.tile(np.asarray(s, dtype=np.int16), (trials, 1))
        before = phi_batch(decks)
        sweep_batch(decks, rng.integers(0, 2, size=(trials, n)).astype(np.uint8))
        sq = (phi_batch(decks) - before) ** 2
        means.append(float(sq.mean()))
        errs.append(float(sq.std(ddof=1) / math.sqrt(trials)))
    k = int(np.argmax(means))
    return {"n": n, "trials": trials, "estimate": means[k], "stderr": errs[k],
            "per_state": means, "scale": n * math.log(n) if n > 1 else 1.0}


def fit_second_moment_constant(ns=(16, 32, 64), trials: int = 2000, seed: int = 0) -> dict:
    """``max_n estimate(n) / (n log n)`` and the per-n ratios."""
    rng = np.random.default_rng(seed)
    ratios = {}
    for n in ns:
        est = second_moment_estimate(n, trials, rng)
        ratios[n] = (est["estimate"] + 3 * est["stderr"]) / (n * math.log(n))
    return {"C_hat": max(ratios.values()), "ratios": ratios}


# -- the assembled bound ---------------------------------------------------------------

def cat_lower_bound_report(n: int, eps: float, *, units: str = "sweeps",
                           C: float = R_CONSTANT) -> dict:
    if n < 8:
        raise DomainError("the assembled bound needs n >= 8")
    if units not in ("sweeps", "steps"):
        raise ValueError("units must be sweeps or steps")
    w = WilsonInputs(phi0=phi(Permutation.identity(n)), gamma=gamma_of_n(n),
                     delta=3 * math.pi / (4 * n), R=C * n * math.log(n),
                     phi_sup=n * n / 8, eps=eps)
    t = wilson_lower_bound(w)
    if units == "steps":
        t *= n - 1
    return {"t_lower": t, "units": units, "n": n, "eps": eps, "C_hat": C, **w.to_dict()}


def cat_lower_bound(n: int, eps: float, *, units: str = "sweeps", C: float = R_CONSTANT) -> float:
    return cat_lower_bound_report(n, eps, units=units, C=C)["t_lower"]


# -- oracle chains -------------------------------------------------------------------

def cycle_oracle(m: int, eps: float) -> dict:
    """Lazy walk on the cycle ``Z_m`` with ``Phi(x) = cos(2 pi x/m)`` from ``x0 = 0``."""
    x = np.arange(m)
    f = np.cos(2 * math.pi * x / m)
    gamma = (1 - math.cos(2 * math.pi / m)) / 2
    R = float(((np.roll(f, -1) - f) ** 2 + (np.roll(f, 1) - f) ** 2).max() / 4)
    w = WilsonInputs(phi0=1.0, gamma=gamma, delta=0.0, R=R, phi_sup=1.0, eps=eps)
    t = wilson_lower_bound(w)
    steps = max(0, math.ceil(t))
    P = 0.5 * np.eye(m) + 0.25 * (np.roll(np.eye(m), 1, axis=1) + np.roll(np.eye(m), -1, axis=1))
    drift = float(np.abs(P @ f - (1 - gamma) * f).max())
    v = np.zeros(m)
    v[0] = 1.0
    for _ in range(steps):
        v = v @ P
    tv = 0.5 * float(np.abs(v - 1 / m).sum())
    return {"m": m, "eps": eps, "t_formula": t, "t_evaluated": steps, "tv": tv,
            "eigen_residual": drift, "vacuous": t <= 0, **w.to_dict()}


def hypercube_oracle(d: int, eps: float) -> dict:
    """Lazy walk on ``{0,1}^d`` with ``Phi = sum (-1)^{x_i}`` from the origin.

    ``Phi`` is an exact eigenfunction with ``gamma = 1/d`` and every step
    changes it by ``+-2`` with probability 1/2, so ``R = 2``.  TV is exact
    through the Hamming-weight chain.
    """
    w = WilsonInputs(phi0=float(d), gamma=1 / d, delta=0.0, R=2.0, phi_sup=float(d), eps=eps)
    t = wilson_lower_bound(w)
    steps = max(0, math.ceil(t))
    k = np.arange(d + 1)
    up, down = (d - k) / (2 * d), k / (2 * d)
    v = np.zeros(d + 1)
    v[0] = 1.0
    for _ in range(steps):
        nxt = v * 0.5
        nxt[1:] += v[:-1] * up[:-1]
        nxt[:-1] += v[1:] * down[1:]
        v = nxt
    log_binom = np.array([math.lgamma(d + 1) - math.lgamma(j + 1) - math.lgamma(d - j + 1) for j in k])
    mu = np.exp(log_binom - d * math.log(2))
    tv = 0.5 * float(np.abs(v - mu).sum())
    return {"d": d, "eps": eps, "t_formula": t, "t_evaluated": steps, "tv": tv,
            "vacuous": t <= 0, **w.to_dict()}


# -- Monte Carlo checks --------------------------------------------------------------

def distinguishing_time(n: int, trials: int, seed: int, *, max_sweeps: int | None = None,
                        threshold: float = 0.5) -> dict:
    """First sweep at which the sine statistic stops separating the run from equilibrium.

    With ``m_t`` the Monte Carlo mean of ``Phi_t`` from the identity, the
    separation is ``P_id(Phi_t >= m_t/2) - P_mu(Phi >= m_t/2)``; the
    stationary side uses independent uniform decks.
    """
    if max_sweeps is None:
        max_sweeps = int(2 * n * n * math.log(n) / math.pi ** 2) + 10
    rng = np.random.default_rng([seed, n])
    stationary = np.sort(phi_batch(np.array([rng.permutation(n) + 1 for _ in range(trials)])))
    curve = []

    def observe(i, decks):
        values = phi_batch(decks)
        cut = values.mean() / 2
        above_mu = 1 - np.searchsorted(stationary, cut, side="left") / trials
        curve.append(float((values >= cut).mean() - above_mu))
        return None

    # run sweep by sweep so the loop can stop at the crossing
    deck = np.arange(1, n + 1)
    decks = np.broadcast_to(deck, (trials, n)).copy()
    trial_ids = np.arange(trials)
    observe(0, decks)
    crossing = None
    for i in range(max_sweeps):
        decks, _ = run_batch(decks, 1, seed, trials=trial_ids, first_sweep=i)
        observe(i + 1, decks)
        if curve[-1] < threshold:
            crossing = i + 1
            break
    return {"n": n, "trials": trials, "seed": seed, "t_cross": crossing, "units": "sweeps",
            "curve": curve}


def drift_variance_check(n: int, sweeps: int, trials: int, seed: int,
                         C: float = R_CONSTANT) -> dict:
    """Mean and variance of ``Phi_t`` from the identity against the iterated bounds."""
    gamma = gamma_of_n(n)
    delta = 3 * math.pi / (4 * n)
    R = C * n * math.log(n)
    phi_sup = n * n / 8
    phi0 = phi(Permutation.identity(n))
    _, frames = run_batch(np.arange(1, n + 1), sweeps, seed, trials=np.arange(trials),
                          observe=lambda i, d: phi_batch(d))
    frames = np.array(frames)
    mean = frames.mean(axis=1)
    se = frames.std(axis=1, ddof=1) / math.sqrt(trials)
    var = frames.var(axis=1, ddof=1)
    t = np.arange(sweeps + 1)
    return {"mean": mean, "stderr": se, "var": var,
            "mean_floor": (1 - gamma) ** t * phi0 - delta / gamma,
            "var_cap": 3 * (delta * phi_sup + R) / gamma}
