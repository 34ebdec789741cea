"""
Sweep engine for the cyclic adjacent transposition shuffle.

One sweep visits all ``n-1`` edges, either left to right (edges ``1..n-1``)
or right to left (``n-1..1``), and spends one fair bit per visited edge.
Bits are indexed by visit order, so ``bits[j]`` is consumed by the
``j``-th edge the sweep touches.

Two update rules share the same one-sweep kernel:

* plain: bit 1 transposes the pair, bit 0 leaves it;
* monotone: bit 1 sorts the pair ascending, bit 0 sorts it descending.

The monotone rule preserves the order of :func:`catmix.permcore.order_leq`
when two decks are driven by the same randomness.

Scalar functions act on :class:`~catmix.permcore.Permutation` values.  The
``*_batch`` functions act on ``(m, n)`` label arrays and are the engines
behind every Monte Carlo experiment.  Randomness for trial ``k`` and
sweep ``i`` is a pure function of ``(seed, stream, k, i)``
(see :func:`sweep_bits`), so results do not depend on batching or on
the number of worker threads.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .permcore import BlockPartition, Permutation

__all__ = [
    "Direction", "SweepRandomness", "CensoringScheme", "Trajectory",
    "sweep", "monotone_sweep", "censored_sweep", "coupled_sweep",
    "single_directional_sweep", "at_step", "edge_order",
    "steps_to_sweeps", "sweeps_to_steps", "sweep_bits", "mix64",
    "sweep_batch", "coupled_sweep_batch", "run_batch",
    "STREAM_MAIN", "STREAM_AUX",
]


class Direction(enum.IntEnum):
    LEFT_TO_RIGHT = 0
    RIGHT_TO_LEFT = 1


def edge_order(n: int, direction: Direction) -> range:
    """Edges (1-based, edge ``x`` joins positions ``x`` and ``x+1``) in visit order."""
    if Direction(direction) is Direction.LEFT_TO_RIGHT:
        return range(1, n)
    return range(n - 1, 0, -1)


@dataclass(frozen=True)
class SweepRandomness:
    """Direction of one sweep plus ``n-1`` fair bits in visit order."""

    direction: Direction
    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("sweep bits must be 0 or 1")

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "SweepRandomness":
        draw = rng.integers(0, 2, size=n)
        return cls(Direction(int(draw[0])), tuple(int(b) for b in draw[1:]))

    @classmethod
    def enumerate_all(cls, n: int):
        """All ``2 * 2**(n-1)`` equally likely outcomes of one sweep."""
        for d in Direction:
            for code in range(2 ** (n - 1)):
                yield cls(d, tuple((code >> j) & 1 for j in range(n - 1)))

    def _check(self, n: int):
        if len(self.bits) != n - 1:
            raise ValueError(f"a sweep of a deck of {n} needs {n - 1} bits, got {len(self.bits)}")


def steps_to_sweeps(t: int, n: int) -> float:
    """Raw edge updates to sweeps, ``t = (n-1) * i``."""
    return t / (n - 1)


def sweeps_to_steps(i, n: int):
    return i * (n - 1)


# -- scalar sweeps -------------------------------------------------------------

def _run(sigma: Permutation, r: SweepRandomness, rule: str, active=None) -> Permutation:
    n = sigma.n
    r._check(n)
    deck = list(sigma.mapping)
    for bit, x in zip(r.bits, edge_order(n, r.direction)):
        if active is not None and not active(x):
            continue
        a, b = deck[x - 1], deck[x]
        if rule == "plain":
            swap = bit == 1
        else:
            swap = (bit == 1) == (a > b)
        if swap:
            deck[x - 1], deck[x] = b, a
    return Permutation(tuple(deck))


def sweep(sigma: Permutation, r: SweepRandomness) -> Permutation:
    """Plain CAT sweep: transpose at each visited edge whose bit is 1."""
    return _run(sigma, r, "plain")


def monotone_sweep(sigma: Permutation, r: SweepRandomness) -> Permutation:
    """Order-preserving sweep: bit 1 sorts each pair ascending, bit 0 descending."""
    return _run(sigma, r, "monotone")


def single_directional_sweep(sigma: Permutation, bits: Sequence[int]) -> Permutation:
    """Plain sweep that always runs left to right."""
    return sweep(sigma, SweepRandomness(Direction.LEFT_TO_RIGHT, tuple(bits)))


def at_step(sigma: Permutation, rng: np.random.Generator) -> Permutation:
    """One step of the random adjacent transposition chain (lazy, uniform edge)."""
    n = sigma.n
    if n < 2:
        raise ValueError("the adjacent transposition chain needs n >= 2")
    x = int(rng.integers(1, n))
    if rng.integers(0, 2):
        deck = list(sigma.mapping)
        deck[x - 1], deck[x] = deck[x], deck[x - 1]
        return Permutation(tuple(deck))
    return sigma


# -- censoring -----------------------------------------------------------------

@dataclass(frozen=True)
class CensoringScheme:
    """Edges ignored during given sweep windows.

    Edge ``x`` is skipped at sweep ``i`` iff ``x in edges`` and ``i`` lies in
    one of the half-open windows ``[start, stop)``; ``stop=None`` means
    forever.
    """

    edges: frozenset = frozenset()
    windows: tuple = ()
    label: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(int(e) for e in self.edges))
        object.__setattr__(self, "windows", tuple((int(a), None if b is None else int(b))
                                                  for a, b in self.windows))
        for a, b in self.windows:
            if a < 0 or (b is not None and b < a):
                raise ValueError(f"bad censoring window [{a}, {b})")

    def active_window(self, sweep_index: int) -> bool:
        return any(a <= sweep_index and (b is None or sweep_index < b) for a, b in self.windows)

    def censored_edges(self, sweep_index: int) -> frozenset:
        return self.edges if self.active_window(sweep_index) else frozenset()

    def is_censored(self, sweep_index: int, x: int) -> bool:
        return x in self.edges and self.active_window(sweep_index)

    @classmethod
    def none(cls) -> "CensoringScheme":
        return cls(frozenset(), (), "none")

    @classmethod
    def everything(cls, n: int) -> "CensoringScheme":
        return cls(frozenset(range(1, n)), ((0, None),), "everything", {"n": n})

    @classmethod
    def three_phase(cls, eta: float, n: int, total_sweeps: int | None = None) -> "CensoringScheme":
        """Censor the block cuts during the first and third phases.

        With ``total_sweeps`` the phase boundaries are scaled to that budget
        in the ratio ``(eta/3) : (1 + 2 eta/3) : (1 + eta)``; otherwise the
        asymptotic times ``c * n^3/(2 pi^2) log n`` steps are converted to
        sweeps and rounded.
        """
        if not 0 < eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        K = min(math.floor(1 / eta), n)
        cuts = BlockPartition(n, K).interior_cuts
        ratios = (eta / 3, 1 + 2 * eta / 3, 1 + eta)
        if total_sweeps is None:
            scale = n ** 3 / (2 * math.pi ** 2) * math.log(n) / (n - 1)
            s1, s2, s3 = (round(c * scale) for c in ratios)
        else:
            s1, s2 = (round(total_sweeps * c / ratios[2]) for c in ratios[:2])
            s3 = int(total_sweeps)
        params = {"eta": eta, "n": n, "K": K, "t1": s1, "t2": s2, "t3": s3,
                  "units": "sweeps", "scaled_to": total_sweeps}
        return cls(frozenset(cuts), ((0, s1), (s2, s3)), "three-phase", params)

    @classmethod
    def parse(cls, text: str, n: int) -> "CensoringScheme":
        """Parse ``"three-phase:eta=0.1[,sweeps=50]"``, ``"none"``, ``"everything"``
        or ``"edges=2,4;windows=0-100,400-500"`` (a window ``a-`` is open ended)."""
        text = text.strip()
        if text == "none":
            return cls.none()
        if text == "everything":
            return cls.everything(n)
        m = re.fullmatch(r"three-phase:(.*)", text)
        if m:
            kv = _parse_kv(m.group(1), ",")
            if "eta" not in kv:
                raise ValueError("three-phase scheme needs eta=")
            sweeps = kv.pop("sweeps", None)
            eta = float(kv.pop("eta"))
            if kv:
                raise ValueError(f"unknown three-phase keys: {sorted(kv)}")
            return cls.three_phase(eta, n, None if sweeps is None else int(sweeps))
        kv = _parse_kv(text, ";")
        if set(kv) != {"edges", "windows"}:
            raise ValueError(f"malformed censoring scheme {text!r}")
        try:
            edges = frozenset(int(e) for e in kv["edges"].split(",") if e)
            windows = []
            for w in kv["windows"].split(","):
                a, b = w.split("-")
                windows.append((int(a), int(b) if b else None))
        except ValueError as exc:
            raise ValueError(f"malformed censoring scheme {text!r}") from exc
        if any(not 1 <= e < n for e in edges):
            raise ValueError(f"censored edges must lie in 1..{n - 1}")
        return cls(edges, tuple(windows), "explicit")

    def to_dict(self) -> dict:
        return {"label": self.label, "edges": sorted(self.edges),
                "windows": [list(w) for w in self.windows], "params": self.params}


def _parse_kv(text: str, sep: str) -> dict:
    out = {}
    for item in filter(None, text.split(sep)):
        if "=" not in item:
            raise ValueError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def censored_sweep(sigma: Permutation, r: SweepRandomness, c: CensoringScheme,
                   sweep_index: int) -> Permutation:
    """Monotone sweep that skips the edges ``c`` censors at this sweep."""
    blocked = c.censored_edges(sweep_index)
    return _run(sigma, r, "monotone", active=lambda x: x not in blocked)


# -- matching coupling -----------------------------------------------------------

def coupled_sweep(sigma: Permutation, sigma2: Permutation, r: SweepRandomness,
                  aux: Sequence[int]) -> tuple[Permutation, Permutation]:
    """Advance two decks with shared direction so that matched cards stay matched.

    At each visited edge ``x``: if the card at ``x`` in one deck sits at
    ``x+1`` in the other (either way round), exactly one deck is
    transposed, the first iff the auxiliary bit is 1.  Otherwise both decks
    follow the edge bit together.
    """
    n = sigma.n
    if sigma2.n != n:
        raise ValueError("coupled decks must have the same size")
    r._check(n)
    if len(aux) != n - 1:
        raise ValueError(f"need {n - 1} auxiliary bits, got {len(aux)}")
    a, b = list(sigma.mapping), list(sigma2.mapping)
    for j, x in enumerate(edge_order(n, r.direction)):
        if a[x - 1] == b[x] or a[x] == b[x - 1]:
            first = aux[j] == 1
            move_a, move_b = first, not first
        else:
            move_a = move_b = r.bits[j] == 1
        if move_a:
            a[x - 1], a[x] = a[x], a[x - 1]
        if move_b:
            b[x - 1], b[x] = b[x], b[x - 1]
    return Permutation(tuple(a)), Permutation(tuple(b))


# -- counter-based randomness ----------------------------------------------------

STREAM_MAIN = 0
STREAM_AUX = 1

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer applied elementwise to a ``uint64`` array."""
    z = np.asarray(z, dtype=np.uint64).copy()
    with np.errstate(over="ignore"):
        z += np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
    return z


def _key(*parts) -> np.ndarray:
    z = np.zeros(1, dtype=np.uint64)
    for p in parts:
        z = mix64(z ^ np.asarray(p, dtype=np.uint64))
    return z


def sweep_bits(seed: int, trials, sweep_index: int, n: int, stream: int = STREAM_MAIN) -> np.ndarray:
    """Bits for one sweep of each listed trial, shape ``(len(trials), n)``.

    Column 0 is the direction (0 = left to right); columns ``1..n-1`` are
    the edge bits in visit order.  The value is a pure function of
    ``(seed, stream, trial, sweep_index)``.
    """
    trials = np.asarray(trials, dtype=np.uint64)
    base = _key(seed, stream, sweep_index)
    words = (n + 63) // 64
    with np.errstate(over="ignore"):
        per_trial = mix64(base ^ (trials * np.uint64(0xD1B54A32D192ED03)))
        w = mix64(per_trial[:, None] + np.arange(words, dtype=np.uint64)[None, :]
                  * np.uint64(0x9E3779B97F4A7C15))
    bits = np.unpackbits(w.astype("<u8").view(np.uint8), axis=1, bitorder="little")
    return bits[:, :n]


# -- batch engines -----------------------------------------------------------------

def _positions_for(directions: np.ndarray, j: int, n: int) -> np.ndarray:
    """0-based left position of the ``j``-th visited edge for each trial."""
    return np.where(directions == 0, j, n - 2 - j)


def sweep_batch(decks: np.ndarray, bits: np.ndarray, rule: str = "plain",
                blocked: Iterable[int] = ()) -> np.ndarray:
    """Apply one sweep to every row of ``decks`` in place and return it.

    ``bits`` is the ``(m, n)`` output of :func:`sweep_bits`.  ``blocked``
    lists censored edges (1-based), which are skipped.
    """
    m, n = decks.shape
    rows = np.arange(m)
    directions = bits[:, 0]
    blocked = set(blocked)
    for j in range(n - 1):
        pos = _positions_for(directions, j, n)
        u = bits[:, j + 1].astype(bool)
        left = decks[rows, pos]
        right = decks[rows, pos + 1]
        if rule == "plain":
            swap = u
        elif rule == "monotone":
            swap = u == (left > right)
        else:
            raise ValueError(f"unknown rule {rule!r}")
        if blocked:
            swap = swap & ~np.isin(pos + 1, list(blocked))
        decks[rows, pos] = np.where(swap, right, left)
        decks[rows, pos + 1] = np.where(swap, left, right)
    return decks


def coupled_sweep_batch(a: np.ndarray, b: np.ndarray, bits: np.ndarray,
                        aux: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`coupled_sweep`; ``aux`` columns ``1..n-1`` are the auxiliary bits."""
    m, n = a.shape
    rows = np.arange(m)
    directions = bits[:, 0]
    for j in range(n - 1):
        pos = _positions_for(directions, j, n)
        al, ar = a[rows, pos], a[rows, pos + 1]
        bl, br = b[rows, pos], b[rows, pos + 1]
        opposite = (al == br) | (ar == bl)
        first = aux[:, j + 1].astype(bool)
        same = bits[:, j + 1].astype(bool)
        move_a = np.where(opposite, first, same)
        move_b = np.where(opposite, ~first, same)
        a[rows, pos] = np.where(move_a, ar, al)
        a[rows, pos + 1] = np.where(move_a, al, ar)
        b[rows, pos] = np.where(move_b, br, bl)
        b[rows, pos + 1] = np.where(move_b, bl, br)
    return a, b


def run_batch(start: np.ndarray, sweeps: int, seed: int, *, trials=None, rule: str = "plain",
              scheme: CensoringScheme | None = None, first_sweep: int = 0,
              single_direction: bool = False, observe=None):
    """Run ``sweeps`` sweeps on a batch of decks.

    ``start`` is an ``(n,)`` deck shared by all trials or an ``(m, n)``
    array.  ``observe(i, decks)`` is called at every sweep boundary,
    including ``i = first_sweep`` before any update, and its return values
    are collected into a list.
    """
    start = np.asarray(start)
    if trials is None:
        trials = np.arange(1 if start.ndim == 1 else start.shape[0])
    trials = np.asarray(trials)
    decks = np.broadcast_to(start, (len(trials), start.shape[-1])).astype(np.int16).copy()
    n = decks.shape[1]
    record = []
    if observe is not None:
        record.append(observe(first_sweep, decks))
    for i in range(first_sweep, first_sweep + sweeps):
        bits = sweep_bits(seed, trials, i, n)
        if single_direction:
            bits[:, 0] = 0
        blocked = scheme.censored_edges(i) if scheme is not None else ()
        sweep_batch(decks, bits, rule, blocked)
        if observe is not None:
            record.append(observe(i + 1, decks))
    return decks, record


# -- trajectories ------------------------------------------------------------------

@dataclass
class Trajectory:
    """States at consecutive sweep boundaries plus the seed that produced them."""

    states: list
    seed: int
    trial: int = 0
    first_sweep: int = 0
    rule: str = "plain"

    @classmethod
    def simulate(cls, start: Permutation, sweeps: int, seed: int, trial: int = 0,
                 rule: str = "plain", scheme: CensoringScheme | None = None) -> "Trajectory":
        _, frames = run_batch(np.asarray(start.mapping), sweeps, seed, trials=[trial], rule=rule,
                              scheme=scheme,
                              observe=lambda i, d: Permutation(tuple(int(v) for v in d[0])))
        return cls(frames, seed, trial, 0, rule)

    def to_jsonl(self, observables: dict | None = None) -> str:
        """One JSON object per sweep: ``{"sweep", "state", <observable columns>}``."""
        observables = observables or {}
        lines = []
        for i, s in enumerate(self.states):
            row = {"sweep": self.first_sweep + i, "state": list(s.mapping)}
            for name, fn in observables.items():
                row[name] = fn(s)
            lines.append(json.dumps(row))
        return "\n".join(lines) + "\n"
