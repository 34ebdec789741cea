"""
Command-line experiment runner.

Every subcommand resolves its arguments into an :class:`ExperimentConfig`
(which round-trips through JSON and can be loaded with ``--config``),
runs deterministically from the seed, and writes either CSV with a header
row or JSON of the form ``{"meta", "config", "rows"}``.

Exit codes: 0 success, 2 usage error, 3 capacity error, 4 invariant failure.
``CATMIX_THREADS`` caps the worker pool used for Monte Carlo trials.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .decay import decay_bound_check
from .dynamics import CensoringScheme, run_batch
from .errors import CapacityError, DomainError, InvariantError
from .exactdist import censoring_compare, tv_curve
from .exclusion import excl_coupling_time, excl_exact_tv, excl_lower_bound_report
from .observables import height_batch, phi_batch
from .walks import killed_srw_kernel, spectrum_report, survival_curve
from .wilson import cat_lower_bound_report

__all__ = ["ExperimentConfig", "parse_config", "run", "main", "UsageError"]

SUBCOMMANDS = ("simulate", "tv-exact", "censor-check", "spectrum", "survival", "decay",
               "wilson", "excl", "couple")


class UsageError(ValueError):
    """Raised for malformed or incomplete configurations."""


@dataclass
class ExperimentConfig:
    subcommand: str
    n: int
    k: int | None = None
    model: str = "cat"
    sweeps: int = 100
    trials: int = 100
    seed: int = 0
    scheme: str | None = None
    eps: float = 0.25
    eta: float = 0.1
    delta: float = 0.2
    units: str = "sweeps"
    every: int = 1
    out: str | None = None
    format: str = "csv"
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        if "subcommand" not in doc or "n" not in doc:
            raise UsageError("config needs subcommand and n")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")
        if self.n is None or self.n < 2:
            raise UsageError("n must be an integer >= 2")
        if self.seed is None:
            raise UsageError("a seed is required")
        if self.units not in ("sweeps", "steps"):
            raise UsageError("units must be sweeps or steps")
        if self.format not in ("csv", "json"):
            raise UsageError("format must be csv or json")
        if self.scheme is not None:
            try:
                CensoringScheme.parse(self.scheme, self.n)
            except ValueError as exc:
                raise UsageError(f"bad --scheme: {exc}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="catmix", description="Experiments on the cyclic adjacent "
                     "transposition shuffle.")
    parser.add_argument("--version", action="version", version=f"catmix {__version__}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file holding an ExperimentConfig")
        p.add_argument("--n", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--model", choices=["cat", "monotone", "single"])
        p.add_argument("--sweeps", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--scheme")
        p.add_argument("--eps", type=float)
        p.add_argument("--eta", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--units", choices=["sweeps", "steps"])
        p.add_argument("--every", type=int)
        p.add_argument("--out")
        p.add_argument("--format", choices=["csv", "json"])
    return parser


def parse_config(argv) -> ExperimentConfig:
    """Resolve command-line arguments (and an optional ``--config`` file)."""
    args = _build_parser().parse_args(list(argv))
    if args.subcommand is None:
        raise UsageError("a subcommand is required: " + ", ".join(SUBCOMMANDS))
    doc: dict = {"subcommand": args.subcommand}
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if loaded.get("subcommand", args.subcommand) != args.subcommand:
            raise UsageError("config file is for a different subcommand")
        doc.update(loaded)
    for f in fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if f.name != "subcommand" and value is not None:
            doc[f.name] = value
    if doc.get("n") is None:
        raise UsageError("--n is required")
    if args.subcommand in ("excl", "couple") and doc.get("k") is None:
        raise UsageError(f"--k is required for {args.subcommand}")
    if args.subcommand in ("spectrum", "wilson") and "format" not in doc:
        doc["format"] = "json"
    return ExperimentConfig.from_dict(doc)


# -- runners -------------------------------------------------------------------------

def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CATMIX_THREADS", "1")))
    except ValueError:
        return 1


def _chunks(trials: int, parts: int) -> list[np.ndarray]:
    return [c for c in np.array_split(np.arange(trials), parts) if len(c)]


def _run_simulate(cfg: ExperimentConfig):
    n = cfg.n
    scheme = CensoringScheme.parse(cfg.scheme, n) if cfg.scheme else None
    rule = "monotone" if cfg.model == "monotone" or scheme is not None else "plain"

    def observe(i, decks):
        h = height_batch(decks)
        return np.stack([phi_batch(decks), np.sqrt((h ** 2).sum(axis=1)), np.abs(h).max(axis=1)])

    def job(ids):
        _, rec = run_batch(np.arange(1, n + 1), cfg.sweeps, cfg.seed, trials=ids, rule=rule,
                           scheme=scheme, single_direction=cfg.model == "single",
                           observe=observe)
        return np.array(rec)  # (sweeps + 1, 3, len(ids))

    parts = _chunks(cfg.trials, _threads())
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(job, parts))
    # reduce in trial order so the output does not depend on the chunking
    total = np.concatenate(results, axis=2).mean(axis=2)
    rows = []
    for i in range(0, cfg.sweeps + 1, cfg.every):
        rows.append({"sweep": i, "phi": total[i, 0], "height_l2": total[i, 1],
                     "height_max": total[i, 2]})
    return rows, {}


def _run_tv_exact(cfg):
    curve = tv_curve(cfg.n, cfg.sweeps, model=cfg.model)
    return [{"sweep": i, "tv": float(v)} for i, v in enumerate(curve)], {}


def _run_censor(cfg):
    scheme = CensoringScheme.parse(cfg.scheme or f"three-phase:eta={cfg.eta},sweeps={cfg.sweeps}",
                                   cfg.n)
    cmp = censoring_compare(cfg.n, scheme, cfg.sweeps)
    meta = {"scheme": scheme.to_dict(), "violations": cmp.violations}
    if cmp.violations:
        raise InvariantError(f"censoring inequality violated at sweeps {cmp.violations}")
    return cmp.rows(), meta


def _run_spectrum(cfg):
    return [spectrum_report(cfg.n)], {}


def _run_survival(cfg):
    curve = survival_curve(killed_srw_kernel(cfg.n), cfg.sweeps)
    return [{"t": t, "survival": float(v)} for t, v in enumerate(curve)], {"units": "walk steps"}


def _run_decay(cfg):
    rep = decay_bound_check(cfg.n, cfg.sweeps, cfg.delta, record_every=cfg.every)
    rows = [{k: r[k] for k in ("s", "d_mass", "u_inf", "envelope", "ratio")} for r in rep["rows"]]
    meta = {k: v for k, v in rep.items() if k != "rows"}
    return rows, meta


def _run_wilson(cfg):
    return [cat_lower_bound_report(cfg.n, cfg.eps, units=cfg.units)], {}


def _run_excl(cfg):
    curve = excl_exact_tv(cfg.n, cfg.k, cfg.sweeps)
    meta = {}
    if min(cfg.k, cfg.n - cfg.k) >= 4:
        meta["lower_bound"] = excl_lower_bound_report(cfg.n, cfg.k, cfg.eps)
    return [{"sweep": i, "tv": float(v)} for i, v in enumerate(curve)], meta


def _run_couple(cfg):
    parts = _chunks(cfg.trials, _threads())

    def job(ids):
        rep = excl_coupling_time(cfg.n, cfg.k, len(ids), cfg.seed, sweeps=cfg.sweeps,
                                 record_every=cfg.every, trial_ids=ids)
        # integer counts, so the pooled fractions do not depend on the chunking
        counts = [np.rint(np.array(rep[key]) * len(ids)).astype(np.int64)
                  for key in ("uncoupled", "occupancy_differs")]
        return counts, rep["sweeps"]

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(job, parts))
    grid = results[0][1]
    unc = sum(r[0][0] for r in results) / cfg.trials
    diff = sum(r[0][1] for r in results) / cfg.trials
    return [{"sweep": s, "uncoupled": float(u), "occupancy_differs": float(d)}
            for s, u, d in zip(grid, unc, diff)], {}


RUNNERS = {
    "simulate": _run_simulate, "tv-exact": _run_tv_exact, "censor-check": _run_censor,
    "spectrum": _run_spectrum, "survival": _run_survival, "decay": _run_decay,
    "wilson": _run_wilson, "excl": _run_excl, "couple": _run_couple,
}


def _clean(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def render(cfg: ExperimentConfig, rows: list[dict], meta: dict) -> str:
    full_meta = {"library": "catmix", "version": __version__, "units": cfg.units, **meta}
    if cfg.format == "json":
        doc = {"meta": full_meta, "config": asdict(cfg), "rows": rows}
        return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    header = list(rows[0].keys()) if rows else []
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([_fmt(r[h]) for h in header])
    return buf.getvalue()


def _fmt(v):
    v = _clean(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return json.dumps(v)
    return v


def run(cfg: ExperimentConfig) -> str:
    """Execute a configuration and return the rendered report (also written to ``cfg.out``)."""
    cfg.validate()
    rows, meta = RUNNERS[cfg.subcommand](cfg)
    text = render(cfg, rows, meta)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    return text


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        text = run(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error ({exc.parameter} limit {exc.limit}): {exc}", file=sys.stderr)
        return 3
    except InvariantError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 4
    if not cfg.out:
        sys.stdout.write(text)
    return 0
