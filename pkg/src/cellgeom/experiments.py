"""Parameter sweeps over density or LOS length scale, with CSV output.

A sweep evaluates a list of metrics for every value of one swept variable.
Metrics are given as tokens:

    se              mean spectral efficiency, bit/s/Hz
    ase             area spectral efficiency, bit/s/Hz/km^2
    outage@-5dB     P[SIR <= -5 dB]
    ccdf@0dB        P[SIR > 0 dB]
    outage, ccdf    shorthand for the -10 dB and -5 dB thresholds
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .analytics import OUTER_SPEC, NetworkConfig, mean_spectral_efficiency, sir_ccdf
from .montecarlo import SimSpec, estimate_mean_se, simulate
from .propagation import QuadExp

__all__ = [
    "Metric",
    "parse_metrics",
    "SweepSpec",
    "ResultTable",
    "Optimum",
    "run_sweep",
    "find_optimal_density",
    "default_density_grid",
    "DEFAULT_THRESHOLDS_DB",
]

DEFAULT_THRESHOLDS_DB = (-10.0, -5.0)
VARIABLES = ("lambda", "L")
ENGINES = ("analytic", "montecarlo", "both")
MC_KEYS = ("n_trials", "window_radius", "min_distance_guard", "seed", "n_jobs", "far_field")

_TOKEN = re.compile(r"^(outage|ccdf)@([-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)dB$")


def default_density_grid() -> np.ndarray:
    """17 log-spaced densities from 1 to 1e4 BS/km^2."""
    return np.logspace(0.0, 4.0, 17)


@dataclass(frozen=True)
class Metric:
    kind: str
    threshold_db: Optional[float] = None

    @property
    def name(self) -> str:
        if self.threshold_db is None:
            return self.kind
        return "%s@%sdB" % (self.kind, _fmt_threshold(self.threshold_db))


def _fmt_threshold(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def parse_metrics(tokens) -> list:
    """Turn metric tokens (a list or a comma-separated string) into :class:`Metric` objects.

    Raises:
        ValueError: on an empty list or an unrecognised token; the message names the token.
    """
    if isinstance(tokens, str):
        tokens = tokens.split(",")
    out = []
    for raw in tokens:
        tok = raw.strip()
        if tok in ("se", "ase"):
            out.append(Metric(tok))
        elif tok in ("outage", "ccdf"):
            out.extend(Metric(tok, t) for t in DEFAULT_THRESHOLDS_DB)
        else:
            m = _TOKEN.match(tok)
            if m is None:
                raise ValueError("malformed metric token %r" % raw)
            t = float(m.group(2))
            if not math.isfinite(t):
                raise ValueError("threshold must be finite in %r" % raw)
            out.append(Metric(m.group(1), t))
    if not out:
        raise ValueError("metrics must not be empty")
    seen = set()
    unique = []
    for m in out:
        if m.name not in seen:
            seen.add(m.name)
            unique.append(m)
    return unique


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep.

    Args:
        base: configuration that every cell starts from.
        variable: ``"lambda"`` (BS/km^2) or ``"L"`` (km, QuadExp length scale).
        values: strictly increasing swept values.
        metrics: metric tokens or :class:`Metric` objects.
        engine: ``"analytic"``, ``"montecarlo"`` or ``"both"``.
        mc: overrides for the simulator (``n_trials``, ``window_radius``,
            ``min_distance_guard``, ``seed``, ``n_jobs``, ``far_field``).
    """

    base: NetworkConfig
    variable: str
    values: tuple
    metrics: tuple
    engine: str = "analytic"
    mc: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ValueError("variable must be one of %s" % (VARIABLES,))
        if self.engine not in ENGINES:
            raise ValueError("engine must be one of %s" % (ENGINES,))
        values = tuple(float(v) for v in np.atleast_1d(np.asarray(self.values, dtype=float)))
        if not values:
            raise ValueError("values must not be empty")
        if not all(math.isfinite(v) and v > 0 for v in values):
            raise ValueError("swept values must be positive and finite")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("values must be strictly increasing")
        metrics = self.metrics
        if isinstance(metrics, str) or (metrics and not isinstance(metrics[0], Metric)):
            metrics = parse_metrics(metrics)
        if not metrics:
            raise ValueError("metrics must not be empty")
        unknown = set(self.mc) - set(MC_KEYS)
        if unknown:
            raise ValueError("unknown Monte Carlo option(s): %s" % ", ".join(sorted(unknown)))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "metrics", tuple(metrics))
        object.__setattr__(self, "mc", dict(self.mc))

    def config_at(self, value: float) -> NetworkConfig:
        if self.variable == "lambda":
            return self.base.replace(lam=value)
        return self.base.replace(los=QuadExp(value))

    def sim_spec(self, cfg: NetworkConfig) -> SimSpec:
        return SimSpec(
            cfg,
            n_trials=int(self.mc.get("n_trials", 10_000)),
            window_radius=self.mc.get("window_radius"),
            min_distance_guard=self.mc.get("min_distance_guard", 1e-6),
            seed=int(self.mc.get("seed", 0)),
            far_field=bool(self.mc.get("far_field", True)),
        )

    def describe(self) -> dict:
        return {
            "variable": self.variable,
            "values": list(self.values),
            "metrics": [m.name for m in self.metrics],
            "engine": self.engine,
            "base": self.base.as_dict(),
            "mc": {k: self.mc[k] for k in sorted(self.mc)},
        }


def _csv_number(v) -> str:
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


@dataclass
class ResultTable:
    """Named, equal-length columns plus provenance.

    ``failures`` holds ``(row, column, reason)`` triples for cells left as NaN.
    """

    columns: dict
    provenance: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def __post_init__(self):
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        lengths = {v.shape for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError("all columns must have the same length")

    def __len__(self):
        return next(iter(self.columns.values())).size if self.columns else 0

    def __getitem__(self, name):
        return self.columns[name]

    @property
    def ok(self) -> bool:
        return not self.failures

    def body(self) -> str:
        """Header plus data rows, no comments."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.columns)
        w.writerow(names)
        for i in range(len(self)):
            w.writerow([_csv_number(self.columns[n][i]) for n in names])
        return buf.getvalue()

    def content_hash(self) -> str:
        """Git blob id of :meth:`body`."""
        data = self.body().encode()
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()

    def to_csv(self) -> str:
        lines = []
        for key, val in self.provenance.items():
            if not isinstance(val, str):
                val = json.dumps(val, sort_keys=True, separators=(",", ":"))
            lines.append("# %s: %s\n" % (key, val))
        lines.append("# content_hash: %s\n" % self.content_hash())
        text = "".join(lines) + self.body()
        for row, col, reason in self.failures:
            text += "# failed: row=%s column=%s reason=%s\n" % (row, col, reason)
        return text

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(self.to_csv())


def _analytic_cells(cfg: NetworkConfig, metrics: Sequence[Metric]) -> dict:
    """Evaluate analytic metrics for one config; raises on the first failure of a group."""
    out = {}
    thresholds = sorted({m.threshold_db for m in metrics if m.threshold_db is not None})
    if thresholds:
        cov = sir_ccdf(cfg, 10.0 ** (np.asarray(thresholds) / 10.0))
        cov = dict(zip(thresholds, np.atleast_1d(cov)))
        for m in metrics:
            if m.kind == "ccdf":
                out[m.name] = float(cov[m.threshold_db])
            elif m.kind == "outage":
                out[m.name] = 1.0 - float(cov[m.threshold_db])
    if any(m.kind in ("se", "ase") for m in metrics):
        se = mean_spectral_efficiency(cfg)
        for m in metrics:
            if m.kind == "se":
                out[m.name] = se
            elif m.kind == "ase":
                out[m.name] = cfg.lam * se
    return out


def _mc_cells(spec: SweepSpec, cfg: NetworkConfig) -> dict:
    """Monte Carlo metrics as ``name -> (estimate, 95% half-width)``."""
    sim = spec.sim_spec(cfg)
    batch = simulate(sim, n_jobs=int(spec.mc.get("n_jobs", 1)))
    sir = batch.sir[batch.valid]
    n = sir.size
    out = {}
    for m in spec.metrics:
        if m.threshold_db is not None:
            p = np.count_nonzero(sir <= 10.0 ** (m.threshold_db / 10.0)) / n
            if m.kind == "ccdf":
                p = 1.0 - p
            out[m.name] = (p, 1.959963984540054 * math.sqrt(p * (1.0 - p) / n))
    if any(m.kind in ("se", "ase") for m in spec.metrics):
        est = estimate_mean_se(sim, batch)
        for m in spec.metrics:
            if m.kind == "se":
                out[m.name] = (est.mean, est.half_width)
            elif m.kind == "ase":
                out[m.name] = (cfg.lam * est.mean, cfg.lam * est.half_width)
    return out


def run_sweep(spec: SweepSpec, timestamp: Optional[str] = None) -> ResultTable:
    """Evaluate every metric at every swept value.

    Failing cells are stored as NaN and listed in ``ResultTable.failures``; the
    sweep carries on. Pass ``timestamp`` to stamp the provenance (left out by
    default so that reruns are byte-identical).
    """
    n = len(spec.values)
    x_name = "lambda" if spec.variable == "lambda" else "L_km"
    columns = {x_name: np.array(spec.values)}
    names = []
    for m in spec.metrics:
        if spec.engine in ("analytic", "both"):
            names.append(m.name)
        if spec.engine in ("montecarlo", "both"):
            names += [m.name + "_mc", m.name + "_mc_ci"]
    for name in names:
        columns[name] = np.full(n, np.nan)
    failures = []

    for i, value in enumerate(spec.values):
        try:
            cfg = spec.config_at(value)
        except ValueError as exc:
            failures += [(value, name, str(exc)) for name in names]
            continue
        if spec.engine in ("analytic", "both"):
            try:
                for name, v in _analytic_cells(cfg, spec.metrics).items():
                    columns[name][i] = v
            except Exception as exc:  # noqa: BLE001 -- keep the sweep going
                failures += [(value, m.name, _reason(exc)) for m in spec.metrics]
        if spec.engine in ("montecarlo", "both"):
            try:
                for name, (v, hw) in _mc_cells(spec, cfg).items():
                    columns[name + "_mc"][i] = v
                    columns[name + "_mc_ci"][i] = hw
            except Exception as exc:  # noqa: BLE001
                failures += [(value, m.name + "_mc", _reason(exc)) for m in spec.metrics]

    prov = {
        "generator": "cellgeom %s" % __version__,
        "sweep": spec.describe(),
        "config_digest": spec.base.digest(),
        "tolerances": {"rel_tol": OUTER_SPEC.rel_tol, "abs_tol": OUTER_SPEC.abs_tol},
    }
    if timestamp is not None:
        prov["timestamp"] = timestamp
    return ResultTable(columns, prov, failures)


def _reason(exc: Exception) -> str:
    return "%s: %s" % (type(exc).__name__, str(exc).replace("\n", " "))


@dataclass(frozen=True)
class Optimum:
    """Result of :func:`find_optimal_density`.

    ``bracket`` is the final search interval in BS/km^2 and ``bracket_width``
    its width relative to ``lambda_star``. When ``unimodal`` is False the best
    grid point is returned unrefined.
    """

    lambda_star: float
    value: float
    bracket: tuple
    bracket_width: float
    unimodal: bool
    flat: bool
    evaluations: int
    grid: tuple
    grid_values: tuple


def _objective(metric: Metric, base: NetworkConfig) -> Callable[[float], float]:
    if metric.kind in ("se", "ase"):
        return lambda lam: mean_spectral_efficiency(base.replace(lam=lam))
    if metric.kind == "outage":
        y = 10.0 ** (metric.threshold_db / 10.0)
        # minimising outage == maximising coverage
        return lambda lam: float(sir_ccdf(base.replace(lam=lam), y))
    raise ValueError("optimal density is defined for se and outage@<t>dB metrics")


def _is_unimodal(g: np.ndarray, tol: float) -> bool:
    d = np.diff(g)
    signs = np.sign(np.where(np.abs(d) <= tol, 0.0, d))
    signs = signs[signs != 0]
    # rising then falling, at most one change
    return signs.size > 0 and not np.any(np.diff(signs) > 0)


def find_optimal_density(
    spec: SweepSpec,
    metric=None,
    rel_width: float = 0.05,
    flat_tol: float = 1e-6,
    max_evaluations: int = 60,
    grid_values: Optional[Sequence[float]] = None,
) -> Optimum:
    """Density maximising SE (or minimising outage) over ``spec.values``.

    The grid is scanned first. If the sampled curve has a single interior
    optimum, a golden-section search in ``log(lambda)`` refines it between the
    neighbouring grid points until the bracket is at most ``rel_width`` of
    ``lambda_star``. Always uses the analytic engine.

    Args:
        spec: sweep over ``lambda``; its base config fixes everything else.
        metric: ``"se"`` or ``"outage@<t>dB"``; defaults to the first metric of ``spec``.
        rel_width: target relative bracket width.
        flat_tol: relative spread below which the curve counts as flat.
        max_evaluations: cap on refinement evaluations.
        grid_values: metric already evaluated on ``spec.values`` (SE, or outage
            probability), to skip the grid scan.
    """
    if spec.variable != "lambda":
        raise ValueError("optimal density needs a sweep over lambda")
    if metric is None:
        m = spec.metrics[0]
    elif isinstance(metric, Metric):
        m = metric
    else:
        m = parse_metrics([metric])[0]
    f = _objective(m, spec.base)
    sign = -1.0 if m.kind == "outage" else 1.0

    grid = np.asarray(spec.values)
    if grid_values is None:
        g = np.array([f(v) for v in grid])
        evaluations = grid.size
    else:
        g = np.asarray(grid_values, dtype=float)
        if g.shape != grid.shape:
            raise ValueError("grid_values must match spec.values")
        if sign < 0:
            g = 1.0 - g
        evaluations = 0
    best = int(np.argmax(g))
    scale = max(np.max(np.abs(g)), 1e-300)
    flat = bool(np.ptp(g) <= flat_tol * scale)
    unimodal = (not flat) and _is_unimodal(g, flat_tol * scale) and 0 < best < grid.size - 1

    def report(lam, val, lo, hi, uni):
        value = val if sign > 0 else 1.0 - val
        return Optimum(
            float(lam), float(value), (float(lo), float(hi)), float((hi - lo) / lam),
            bool(uni), flat, evaluations, tuple(grid.tolist()),
            tuple((g if sign > 0 else 1.0 - g).tolist()),
        )

    if not unimodal:
        lo = grid[max(best - 1, 0)]
        hi = grid[min(best + 1, grid.size - 1)]
        return report(grid[best], g[best], lo, hi, False)

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(grid[best - 1]), math.log(grid[best + 1])
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(math.exp(c)), f(math.exp(d))
    evaluations += 2
    best_x, best_f = math.log(grid[best]), g[best]
    used = 0
    while (math.exp(b) - math.exp(a)) > rel_width * math.exp(best_x) and used < max_evaluations:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(math.exp(d))
        used += 1
        evaluations += 1
        for x, v in ((c, fc), (d, fd)):
            if v > best_f:
                best_x, best_f = x, v
    return report(math.exp(best_x), best_f, math.exp(a), math.exp(b), True)
