"""Event-level Monte Carlo simulator for the typical downlink user.

Each trial drops a Poisson field of base stations on a disk around the user,
flags every link LOS independently with probability ``p_L(d)``, draws
Rayleigh fading, attaches the user to the strongest fading-free average power
and records the resulting SIR (SINR when ``sigma2 > 0``).

Interferers outside the disk are not dropped. Their total is nearly
deterministic (its spread shrinks much faster with the radius than its mean),
so by default its mean is added to the denominator like a noise term. This
matters for near-free-space exponents such as beta = 2.09, where a finite
window alone misses most of the interference.

Every trial owns a counter-based Philox stream keyed by ``(seed,
trial_index)``, so chunked or parallel runs match a serial run bit for bit.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .analytics import Curve, NetworkConfig, serving_distance_tail
from .quadrature import QuadSpec, integrate_finite
from .propagation import (
    AlwaysLos,
    NeverLos,
    QuadExp,
    equivalent_distance,
    half_probability_distance,
    inverse_equivalent_distance,
)

__all__ = [
    "SimSpec",
    "TrialOutcome",
    "TrialBatch",
    "Estimate",
    "SimulationError",
    "trial_rng",
    "sample_ppp",
    "run_trial",
    "sample_links",
    "Links",
    "simulate",
    "estimate_sir_cdf",
    "estimate_mean_se",
    "auto_window_radius",
    "exterior_interference",
    "kolmogorov_distance",
]

_Z95 = 1.959963984540054
_EXTERIOR_SPEC = QuadSpec(rel_tol=1e-10, abs_tol=1e-300, max_subdivisions=400)
_EXTERIOR_SPAN = 250.0  # log-radius span integrated numerically


class SimulationError(RuntimeError):
    pass


def effective_length(model) -> float:
    """LOS length scale used for window sizing; ``L`` itself for :class:`QuadExp`."""
    if isinstance(model, QuadExp):
        return model.L
    if isinstance(model, (AlwaysLos, NeverLos)):
        return 0.0
    d_half = half_probability_distance(model)
    if not math.isfinite(d_half):
        return 0.0
    return d_half / math.sqrt(math.log(2.0))


def auto_window_radius(cfg: NetworkConfig) -> float:
    """Simulation disk radius in km.

    The largest candidate among ``10/sqrt(lambda)`` and five LOS length scales,
    also covering three times the NLOS distance that matches the 99.9th
    percentile serving distance.
    """
    candidates = [10.0 / math.sqrt(cfg.lam), 5.0 * effective_length(cfg.los)]
    lo, hi = 0.0, 1.0 / math.sqrt(cfg.lam)
    while serving_distance_tail(cfg, hi) > 1e-3:
        lo, hi = hi, 2.0 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if serving_distance_tail(cfg, mid) > 1e-3:
            lo = mid
        else:
            hi = mid
    candidates.append(3.0 * inverse_equivalent_distance(cfg.pathloss, hi))
    return max(candidates)


def exterior_interference(cfg: NetworkConfig, radius: float) -> float:
    """Mean interference power from BSs beyond ``radius`` km, fading included.

    Integrates ``2 pi lambda r E[h] (p_L K_L r^-beta_L + (1 - p_L) K_N r^-beta_N)`` over
    ``[radius, inf)`` in ``z = log(r / radius)``. Past ``z = 250`` the LOS probability is
    frozen and the power-law remainder is added in closed form, which is exact for
    the single-slope models.
    """
    pl = cfg.pathloss
    if not radius > 0:
        raise ValueError("radius must be positive")

    def density(r, p):
        return (p * pl.k_los * r ** (2.0 - pl.beta_los)
                + (1.0 - p) * pl.k_nlos * r ** (2.0 - pl.beta_nlos))

    def f(z):
        r = radius * np.exp(z)
        return density(r, np.clip(cfg.los(r), 0.0, 1.0))

    breaks = [math.log(b / radius) for b in getattr(cfg.los, "breakpoints", ()) if b > radius]
    body, _ = integrate_finite(f, 0.0, _EXTERIOR_SPAN, _EXTERIOR_SPEC, points=breaks or None)
    r_end = radius * math.exp(_EXTERIOR_SPAN)
    p_end = float(np.clip(cfg.los(r_end), 0.0, 1.0))
    rest = (p_end * pl.k_los * r_end ** (2.0 - pl.beta_los) / (pl.beta_los - 2.0)
            + (1.0 - p_end) * pl.k_nlos * r_end ** (2.0 - pl.beta_nlos) / (pl.beta_nlos - 2.0))
    return 2.0 * math.pi * cfg.lam * (body + rest) / cfg.mu


@dataclass(frozen=True)
class SimSpec:
    """Monte Carlo run description.

    ``window_radius=None`` sizes the disk automatically. ``far_field`` adds the mean
    interference from beyond the disk to every trial; switch it off to see the bare
    truncated field.
    """

    cfg: NetworkConfig
    n_trials: int
    window_radius: Optional[float] = None
    min_distance_guard: float = 1e-6
    seed: int = 0
    max_redraws: int = 1000
    far_field: bool = True

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.window_radius is not None and not self.window_radius > 0:
            raise ValueError("window_radius must be positive")
        if not self.min_distance_guard > 0:
            raise ValueError("min_distance_guard must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @cached_property
    def radius(self) -> float:
        if self.window_radius is not None:
            return float(self.window_radius)
        return auto_window_radius(self.cfg)

    @cached_property
    def exterior(self) -> float:
        """Mean far-field interference added to each trial (0 when disabled)."""
        return exterior_interference(self.cfg, self.radius) if self.far_field else 0.0

    def describe(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "window_radius_km": self.radius,
            "window_auto": self.window_radius is None,
            "min_distance_guard_km": self.min_distance_guard,
            "seed": self.seed,
            "far_field": self.far_field,
        }


@dataclass(frozen=True)
class TrialOutcome:
    """One drop. ``sir`` is ``inf`` when the serving BS has no interferers and no noise."""

    sir: float
    serving_distance: float
    serving_is_los: bool
    n_bs: int
    equivalent_distance: float
    redraws: int = 0
    guarded: int = 0

    @property
    def degenerate(self) -> bool:
        return not math.isfinite(self.sir)


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trial ``index``; the index occupies the high counter words."""
    return np.random.Generator(
        np.random.Philox(key=seed, counter=[0, 0, index & 0xFFFFFFFFFFFFFFFF, index >> 64])
    )


def sample_ppp(lam: float, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous PPP of intensity ``lam`` on the disk of ``radius`` around the origin, shape (n, 2)."""
    if not (lam > 0 and radius > 0):
        raise ValueError("lambda and radius must be positive")
    n = rng.poisson(lam * math.pi * radius**2)
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


@dataclass(frozen=True)
class Links:
    """Per-BS state of one drop: distance (km), LOS flag and fading power."""

    distance: np.ndarray
    los: np.ndarray
    fading: np.ndarray
    redraws: int = 0
    guarded: int = 0


def sample_links(spec: SimSpec, rng: np.random.Generator) -> Links:
    """Drop BSs, redrawing empty windows, then thin into LOS/NLOS and draw fading.

    Raises:
        SimulationError: if the window is still empty after ``spec.max_redraws`` redraws.
    """
    cfg = spec.cfg
    redraws = 0
    while True:
        pts = sample_ppp(cfg.lam, spec.radius, rng)
        if len(pts):
            break
        redraws += 1
        if redraws > spec.max_redraws:
            raise SimulationError("window stayed empty after %d redraws" % spec.max_redraws)
    n = len(pts)
    d = np.hypot(pts[:, 0], pts[:, 1])
    guarded = int(np.count_nonzero(d < spec.min_distance_guard))
    d = np.maximum(d, spec.min_distance_guard)
    los = rng.random(n) < cfg.los(d)
    fading = rng.standard_exponential(n) / cfg.mu
    return Links(d, los, fading, redraws, guarded)


def run_trial(spec: SimSpec, rng: np.random.Generator) -> TrialOutcome:
    """Simulate one drop and attach the user to the strongest average-power BS."""
    cfg = spec.cfg
    pl = cfg.pathloss
    links = sample_links(spec, rng)
    d, los, fading = links.distance, links.los, links.fading
    n = d.size
    redraws, guarded = links.redraws, links.guarded

    logd = np.log(d)
    log_gain = np.where(
        los,
        math.log(pl.k_los) - pl.beta_los * logd,
        math.log(pl.k_nlos) - pl.beta_nlos * logd,
    )
    s = int(np.argmax(log_gain))
    # powers relative to the serving average gain
    power = fading * np.exp(log_gain - log_gain[s])
    signal = power[s]
    power[s] = 0.0
    # a drop with no in-window interferer stays degenerate whatever the far field adds
    if n == 1 and cfg.sigma2 == 0:
        sir = math.inf
    else:
        denom = power.sum() + (cfg.sigma2 + spec.exterior) * math.exp(-log_gain[s])
        sir = signal / denom if denom > 0 else math.inf

    serving_los = bool(los[s])
    d_s = float(d[s])
    d_eq = d_s if serving_los else float(equivalent_distance(pl, d_s))
    return TrialOutcome(float(sir), d_s, serving_los, n, d_eq, redraws, guarded)


@dataclass
class TrialBatch:
    """Column-wise outcomes of ``n_trials`` drops, ordered by trial index."""

    sir: np.ndarray
    serving_distance: np.ndarray
    serving_is_los: np.ndarray
    n_bs: np.ndarray
    equivalent_distance: np.ndarray
    redraws: int = 0
    guarded: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.sir)

    @property
    def n_degenerate(self) -> int:
        return int(np.count_nonzero(~self.valid))

    def __len__(self):
        return self.sir.size


def _run_chunk(spec: SimSpec, start: int, stop: int):
    rows = []
    for i in range(start, stop):
        o = run_trial(spec, trial_rng(spec.seed, i))
        rows.append((o.sir, o.serving_distance, o.serving_is_los, o.n_bs, o.equivalent_distance,
                     o.redraws, o.guarded))
    return rows


def simulate(spec: SimSpec, n_jobs: int = 1) -> TrialBatch:
    """Run all trials of ``spec``; ``n_jobs > 1`` spreads index chunks over processes."""
    radius, _ = spec.radius, spec.exterior  # resolve once before any fan-out
    if n_jobs <= 1:
        rows = _run_chunk(spec, 0, spec.n_trials)
    else:
        bounds = np.linspace(0, spec.n_trials, 4 * n_jobs + 1).astype(int)
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = pool.map(_run_chunk, [spec] * (len(bounds) - 1), bounds[:-1], bounds[1:])
            rows = [r for part in parts for r in part]
    cols = list(zip(*rows))
    return TrialBatch(
        sir=np.array(cols[0], dtype=float),
        serving_distance=np.array(cols[1], dtype=float),
        serving_is_los=np.array(cols[2], dtype=bool),
        n_bs=np.array(cols[3], dtype=int),
        equivalent_distance=np.array(cols[4], dtype=float),
        redraws=int(sum(cols[5])),
        guarded=int(sum(cols[6])),
        meta={**spec.describe(), "window_radius_km": radius, "config": spec.cfg.digest()},
    )


@dataclass(frozen=True)
class Estimate:
    """Sample mean with its standard error."""

    mean: float
    stderr: float
    n: int

    @property
    def half_width(self) -> float:
        """95% normal-approximation half-width."""
        return _Z95 * self.stderr


def estimate_sir_cdf(spec: SimSpec, thresholds_db, batch: Optional[TrialBatch] = None) -> Curve:
    """Empirical ``P[SIR <= t]`` on a dB grid with 95% binomial half-widths.

    Degenerate trials (no interferer) are excluded.
    """
    if batch is None:
        batch = simulate(spec)
    t = np.asarray(thresholds_db, dtype=float)
    sir_db = 10.0 * np.log10(np.sort(batch.sir[batch.valid]))
    n = sir_db.size
    if n == 0:
        raise SimulationError("all trials were degenerate")
    cdf = np.searchsorted(sir_db, t, side="right") / n
    half = _Z95 * np.sqrt(cdf * (1.0 - cdf) / n)
    meta = dict(batch.meta)
    meta.update(n_valid=n, n_degenerate=batch.n_degenerate, redraws=batch.redraws,
                guarded=batch.guarded)
    return Curve("threshold_db", "cdf", t, cdf, half, meta)


def estimate_mean_se(spec: SimSpec, batch: Optional[TrialBatch] = None) -> Estimate:
    """Sample mean of ``log2(1 + SIR)`` over non-degenerate trials."""
    if batch is None:
        batch = simulate(spec)
    rate = np.log2(1.0 + batch.sir[batch.valid])
    if rate.size == 0:
        raise SimulationError("all trials were degenerate")
    stderr = float(rate.std(ddof=1) / math.sqrt(rate.size)) if rate.size > 1 else math.inf
    return Estimate(float(rate.mean()), stderr, int(rate.size))


def kolmogorov_distance(samples, cdf) -> float:
    """Exact sup-distance between the empirical CDF of ``samples`` and a continuous ``cdf`` callable."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))
