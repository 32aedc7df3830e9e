"""Semi-analytical coverage, spectral efficiency and ASE for PPP small cells.

The typical user sits at the origin and attaches to the base station with the
strongest fading-free average power. NLOS base stations are compared with LOS
ones through their LOS-equivalent distance, so the serving distance ``R`` is
always expressed as a LOS distance: LOS interferers lie beyond ``R`` and NLOS
interferers beyond ``d_eq^{-1}(R)``.

All radial integrals are evaluated in log-distance coordinates; the
single-slope limits with exponents close to 2 have interference tails that
decay only like ``v**(2 - beta)``, which is a slow exponential in ``log v``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .propagation import (
    THREEGPP_PICO,
    AlwaysLos,
    ExpLinear,
    LosModel,
    NeverLos,
    PathLossParams,
    QuadExp,
    ThreeGpp,
    inverse_equivalent_distance,
)
from .quadrature import QuadSpec, integrate_finite, integrate_semi_infinite

__all__ = [
    "NetworkConfig",
    "Curve",
    "serving_distance_tail",
    "serving_distance_pdf",
    "serving_distance_bounds",
    "laplace_interference",
    "conditional_coverage",
    "sir_ccdf",
    "sir_ccdf_curve",
    "outage_probability",
    "mean_spectral_efficiency",
    "area_spectral_efficiency",
    "default_threshold_grid",
]

TWO_PI = 2.0 * math.pi

# Nested levels: interference integrals (inner) sit under the rate integral
# (mid) under the serving-distance average (outer). Inner integrals are
# measured in units of the log-Laplace exponent; each level runs tighter than
# the one above it.
INNER_SPEC = QuadSpec(rel_tol=1e-9, abs_tol=1e-12, max_subdivisions=400)
MID_SPEC = QuadSpec(rel_tol=1e-7, abs_tol=1e-10, max_subdivisions=400)
OUTER_SPEC = QuadSpec(rel_tol=1e-7, abs_tol=1e-10, max_subdivisions=400)
MASS_SPEC = QuadSpec(rel_tol=1e-12, abs_tol=1e-16, max_subdivisions=400)
TAIL_EPS = 1e-12


@dataclass(frozen=True)
class NetworkConfig:
    """Deployment and propagation parameters.

    ``lam`` is the base-station density in BS/km^2, ``mu`` the Rayleigh fading
    rate and ``sigma2`` the noise power normalised by the transmit power.
    """

    lam: float
    mu: float = 1.0
    sigma2: float = 0.0
    pathloss: PathLossParams = THREEGPP_PICO
    los: LosModel = QuadExp(0.0825)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.sigma2 >= 0:
            raise ValueError("sigma2 must be non-negative")

    def replace(self, **changes) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        los = dataclasses.asdict(self.los)
        los["model"] = type(self.los).__name__
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "sigma2": self.sigma2,
            "pathloss": dataclasses.asdict(self.pathloss),
            "los": los,
        }

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Curve:
    """Sampled ``y(x)`` with optional per-point half-widths and free-form metadata."""

    x_label: str
    y_label: str
    x: np.ndarray
    y: np.ndarray
    err: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("x must be strictly increasing")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("y must be finite")
        if self.err is not None:
            self.err = np.asarray(self.err, dtype=float)
            if self.err.shape != self.y.shape:
                raise ValueError("err must match y")

    @property
    def points(self) -> list:
        return list(zip(self.x.tolist(), self.y.tolist()))

    def __len__(self):
        return self.x.size


def default_threshold_grid() -> np.ndarray:
    """SIR thresholds in dB: -20..30 dB, 101 points (0.5 dB step)."""
    return np.linspace(-20.0, 30.0, 101)


def _closed_form(cfg: NetworkConfig, method: str) -> bool:
    if method not in ("auto", "closed", "numeric"):
        raise ValueError("method must be 'auto', 'closed' or 'numeric'")
    if method == "closed" and not isinstance(cfg.los, QuadExp):
        raise ValueError("closed form requires the QuadExp LOS model")
    return isinstance(cfg.los, QuadExp) and method != "numeric"


# -- intensity integrals -----------------------------------------------------

def _radial_mass(weight, r, breaks):
    """``int_0^r weight(v) v dv`` for each entry of ``r``; ``weight`` is smooth between ``breaks``."""
    r = np.asarray(r, dtype=float)
    flat = r.ravel()
    edges = [0.0, *breaks, math.inf]
    total = np.zeros_like(flat)
    for a, b in zip(edges[:-1], edges[1:]):
        lo = np.minimum(a, flat)
        width = np.minimum(b, flat) - lo
        if not np.any(width > 0):
            continue

        def f(w, lo=lo, width=width):
            v = lo[:, None] + width[:, None] * w[None, :]
            return weight(v) * v * width[:, None]

        val, _ = integrate_finite(f, 0.0, 1.0, MASS_SPEC)
        total += val
    return total.reshape(r.shape)


def _los_mass(cfg: NetworkConfig, r, closed: bool):
    """``int_0^r p_L(v) v dv``."""
    r = np.asarray(r, dtype=float)
    model = cfg.los
    if isinstance(model, AlwaysLos):
        return 0.5 * r**2
    if isinstance(model, NeverLos):
        return np.zeros_like(r)
    if closed:
        L2 = model.L**2
        return 0.5 * L2 * -np.expm1(-(r**2) / L2)
    return _radial_mass(model, r, model.breakpoints)


def _nlos_mass(cfg: NetworkConfig, r, closed: bool):
    """``int_0^r (1 - p_L(v)) v dv``."""
    r = np.asarray(r, dtype=float)
    model = cfg.los
    if isinstance(model, AlwaysLos):
        return np.zeros_like(r)
    if isinstance(model, NeverLos):
        return 0.5 * r**2
    if closed:
        L2 = model.L**2
        q = r**2 / L2
        # q + expm1(-q) loses all digits for small q
        series = q**2 / 2 - q**3 / 6 + q**4 / 24 - q**5 / 120
        direct = q + np.expm1(-q)
        return 0.5 * L2 * np.where(q < 1e-2, series, direct)
    return _radial_mass(lambda v: 1.0 - model(v), r, model.breakpoints)


def _log_tail(cfg: NetworkConfig, R, closed: bool):
    R = np.asarray(R, dtype=float)
    Req = inverse_equivalent_distance(cfg.pathloss, R)
    lam = cfg.lam
    if closed:
        # log f1 + log f2 + log f3 with the e^{+-pi lam L^2} constants cancelled
        L2 = cfg.los.L**2
        lf1 = math.pi * lam * L2 * np.expm1(-(R**2) / L2)
        lf2 = -math.pi * lam * L2 * np.expm1(-(Req**2) / L2)
        lf3 = -math.pi * lam * Req**2
        return lf1 + lf2 + lf3
    return -TWO_PI * lam * (_los_mass(cfg, R, False) + _nlos_mass(cfg, Req, False))


def _hazard(cfg: NetworkConfig, R, closed: bool):
    """``-d/dR log P[r > R]``."""
    R = np.asarray(R, dtype=float)
    pl = cfg.pathloss
    Req = inverse_equivalent_distance(pl, R)
    # Req * dReq/dR
    jac = pl.k_eq**2 * pl.beta_eq * R ** (2 * pl.beta_eq - 1)
    lam = cfg.lam
    if closed:
        L2 = cfg.los.L**2
        d1 = -TWO_PI * lam * R * np.exp(-(R**2) / L2)            # f1'/f1
        d2 = TWO_PI * lam * jac * np.exp(-(Req**2) / L2)           # f2'/f2
        d3 = -TWO_PI * lam * jac                                   # f3'/f3
        return -(d1 + d2 + d3)
    p = cfg.los
    return TWO_PI * lam * (R * p(R) + jac * (1.0 - p(Req)))


def _check_radius(R, strict):
    arr = np.asarray(R, dtype=float)
    if strict and np.any(~(arr > 0)):
        raise ValueError("R must be > 0")
    if np.any(~(arr >= 0)):
        raise ValueError("R must be >= 0")
    return arr


def _out(v, like):
    return float(v) if np.ndim(like) == 0 else v


def serving_distance_tail(cfg: NetworkConfig, R, method: str = "auto"):
    """``P[r > R]`` for the LOS-equivalent serving distance.

    ``method='closed'`` uses the closed form available for :class:`QuadExp`;
    ``'numeric'`` evaluates the LOS/NLOS intensity integrals by quadrature and
    works for any LOS model; ``'auto'`` picks the closed form when possible.
    """
    arr = _check_radius(R, strict=False)
    closed = _closed_form(cfg, method)
    return _out(np.exp(_log_tail(cfg, arr, closed)), R)


def serving_distance_pdf(cfg: NetworkConfig, R, method: str = "auto"):
    """Density of the LOS-equivalent serving distance, in 1/km."""
    arr = _check_radius(R, strict=True)
    closed = _closed_form(cfg, method)
    pdf = _hazard(cfg, arr, closed) * np.exp(_log_tail(cfg, arr, closed))
    return _out(pdf, R)


def serving_distance_bounds(cfg: NetworkConfig, eps: float = TAIL_EPS, method: str = "auto"):
    """``(R_lo, R_hi)`` with ``P[r < R_lo] <= eps`` and ``P[r > R_hi] <= eps``."""
    closed = _closed_form(cfg, method)
    r0 = 1.0 / math.sqrt(cfg.lam)
    hi = r0
    while _log_tail(cfg, hi, closed) > math.log(eps):
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError("serving distance tail does not decay")
    lo = r0
    while -np.expm1(_log_tail(cfg, lo, closed)) > eps:
        lo *= 0.5
        if lo < 1e-300:
            raise ArithmeticError("serving distance has an atom at zero")
    return lo, hi


# -- interference --------------------------------------------------------------

def _log_radial_tail(h, lower, cuts, scale):
    """``scale * int_lower^inf h(v) v dv`` in ``u = log(v/lower)``.

    ``h(u)`` returns ``h(v) * v**2 / lower**2`` at ``v = lower*e^u`` for every
    component (rows). ``cuts`` are per-component positions in ``u`` where the
    integrand has a kink or changes scale; the range is split there so that
    all components share one partition of each mapped piece. ``scale`` (per
    component) puts the result in the units whose absolute error matters, so
    the absolute tolerance applies to those.
    """
    lower = np.asarray(lower, dtype=float)
    weight = np.asarray(scale, dtype=float) * lower**2
    n = lower.size
    edges = np.sort(np.stack([np.zeros(n)] + [np.maximum(c, 0.0) for c in cuts]), axis=0)
    total = np.zeros(n)
    for k in range(edges.shape[0] - 1):
        left = edges[k]
        width = edges[k + 1] - left
        if not np.any(width > 0):
            continue

        def f(w, left=left, width=width):
            u = left[:, None] + width[:, None] * w[None, :]
            return h(u) * (width * weight)[:, None]

        val, _ = integrate_finite(f, 0.0, 1.0, INNER_SPEC)
        total += val
    last = edges[-1]

    def f(t):
        return h(last[:, None] + t[None, :]) * weight[:, None]

    val, _ = integrate_semi_infinite(f, 0.0, INNER_SPEC)
    total += val
    return total


def _branch_integral(cfg, s, lower, k_gain, beta, los_branch):
    """``2 pi lam int_lower^inf [s K v^-b / (s K v^-b + mu)] p(v) v dv`` for one branch."""
    model = cfg.los
    with np.errstate(divide="ignore"):
        c = math.log(cfg.mu) - np.log(s) - math.log(k_gain)
    active = np.isfinite(c)
    # s = inf: every interferer dominates, coverage is zero
    out = np.where(c == -np.inf, np.inf, 0.0)
    if not np.any(active):
        return out
    c = c[active]
    lower = lower[active]
    loglo = np.log(lower)
    # kernel midpoint, then the LOS-probability kinks and length scales
    cuts = [-c / beta - loglo]
    cuts += [math.log(b) - loglo for b in _length_scales(model)]

    def h(u):
        logv = loglo[:, None] + u
        # fading kernel times (v/lower)^2, kept in log space: no overflow for huge u
        kern = np.exp(2.0 * u - np.logaddexp(0.0, c[:, None] + beta * logv))
        with np.errstate(over="ignore"):
            v = np.exp(logv)
        p = model(v)
        return kern * (p if los_branch else 1.0 - p)

    out[active] = _log_radial_tail(h, lower, cuts, TWO_PI * cfg.lam)
    return out


def _length_scales(model) -> tuple:
    if isinstance(model, QuadExp):
        return (model.L,)
    if isinstance(model, ExpLinear):
        knee = max(model.p / model.alpha, 0.0)
        return model.breakpoints + (knee + 1.0 / model.alpha,)
    if isinstance(model, ThreeGpp):
        # where 5 exp(-d0/v) and 5 exp(-v/d1) pass 1e-3, 1e-6, 1e-12: the
        # near-field rise is very steep in log distance
        levels = [math.log(5.0 / eps) for eps in (1e-12, 1e-6, 1e-3)]
        near = tuple(model.d0 / k for k in levels)
        far = tuple(model.d1 * k for k in levels)
        return model.breakpoints + (model.d1, model.d0) + near + far
    return ()


def _log_laplace(cfg: NetworkConfig, s, R):
    s, R = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(R, dtype=float))
    shape = s.shape
    s = s.ravel()
    R = R.ravel()
    pl = cfg.pathloss
    total = np.zeros(s.shape)
    if not isinstance(cfg.los, NeverLos):
        total += _branch_integral(cfg, s, R, pl.k_los, pl.beta_los, True)
    if not isinstance(cfg.los, AlwaysLos):
        Req = inverse_equivalent_distance(pl, R)
        total += _branch_integral(cfg, s, Req, pl.k_nlos, pl.beta_nlos, False)
    return (-total).reshape(shape)


def laplace_interference(cfg: NetworkConfig, s, R):
    """Laplace transform ``E[exp(-s I_R)]`` of the interference outside the exclusion region.

    ``s`` is in inverse linear-gain units; ``s`` and ``R`` broadcast.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(~(s_arr >= 0)):
        raise ValueError("s must be >= 0")
    R_arr = _check_radius(R, strict=True)
    val = np.exp(_log_laplace(cfg, s_arr, R_arr))
    return _out(val, np.broadcast(s_arr, R_arr))


def _noise_term(cfg: NetworkConfig, s):
    if cfg.sigma2 == 0:
        return 0.0
    return -s * cfg.sigma2


def _laplace_argument(cfg: NetworkConfig, y, R):
    pl = cfg.pathloss
    # mu * y * K_L^-1 * R^beta_L; y may be inf at the end of the rate integral
    with np.errstate(over="ignore"):
        return cfg.mu * y * np.exp(pl.beta_los * np.log(R) - math.log(pl.k_los))


def conditional_coverage(cfg: NetworkConfig, y, R):
    """``P[SINR > y | r = R]``; ``y`` and ``R`` broadcast."""
    y = np.asarray(y, dtype=float)
    R = _check_radius(R, strict=True)
    s = _laplace_argument(cfg, y, R)
    return _out(np.exp(_noise_term(cfg, s) + _log_laplace(cfg, s, R)), np.broadcast(y, R))


def _outer_radius_integral(cfg, g, spec):
    """``E_r[g(r)]``; ``g(R)`` maps R of shape (n,) to (..., n). Returns (value, error)."""
    closed = _closed_form(cfg, "auto")
    lo, hi = serving_distance_bounds(cfg)

    def f(z):
        R = np.exp(z)
        w = _hazard(cfg, R, closed) * np.exp(_log_tail(cfg, R, closed)) * R
        return g(R) * w

    val, err = integrate_finite(f, math.log(lo), math.log(hi), spec)
    # mass outside [lo, hi], bounded by eps at each end, integrand bounded by max|g| <= 1
    return val, err + 2 * TAIL_EPS


def sir_ccdf(cfg: NetworkConfig, y, spec: QuadSpec = OUTER_SPEC, full_output: bool = False):
    """Coverage probability ``P[SINR > y]`` for linear threshold(s) ``y > 0``.

    With ``full_output`` returns ``(value, error_estimate)``.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(~(y_arr > 0)):
        raise ValueError("threshold must be > 0")
    flat = y_arr.ravel()

    def g(R):
        yy = flat[:, None]
        s = _laplace_argument(cfg, yy, R[None, :])
        return np.exp(_noise_term(cfg, s) + _log_laplace(cfg, s, R[None, :]))

    val, err = _outer_radius_integral(cfg, g, spec)
    val = np.clip(val, 0.0, 1.0).reshape(y_arr.shape)
    err = np.asarray(err).reshape(y_arr.shape)
    if full_output:
        return _out(val, y), _out(err, y)
    return _out(val, y)


def sir_ccdf_curve(cfg: NetworkConfig, thresholds_db=None, spec: QuadSpec = OUTER_SPEC) -> Curve:
    """Coverage probability on a dB threshold grid."""
    t = default_threshold_grid() if thresholds_db is None else np.asarray(thresholds_db, float)
    val, err = sir_ccdf(cfg, 10.0 ** (t / 10.0), spec, full_output=True)
    return Curve(
        "threshold_db",
        "ccdf",
        t,
        val,
        err,
        meta={"config": cfg.digest(), "rel_tol": spec.rel_tol, "abs_tol": spec.abs_tol},
    )


def outage_probability(cfg: NetworkConfig, threshold_db, spec: QuadSpec = OUTER_SPEC):
    """``P[SINR <= threshold]`` with the threshold in dB."""
    t = np.asarray(threshold_db, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("threshold must be finite")
    return 1.0 - sir_ccdf(cfg, 10.0 ** (t / 10.0), spec)


def mean_spectral_efficiency(cfg: NetworkConfig, spec: QuadSpec = OUTER_SPEC, full_output: bool = False):
    """Average ``E[log2(1 + SINR)]`` in bit/s/Hz.

    For each serving distance the rate tail ``P[log2(1+SINR) > u | R]`` is
    integrated over ``u`` in ``[0, inf)``, then averaged over ``f_r``.
    """

    def g(R):
        def h(u):
            with np.errstate(over="ignore"):
                y = np.expm1(u * math.log(2.0))[None, :]
            s = _laplace_argument(cfg, y, R[:, None])
            return np.exp(_noise_term(cfg, s) + _log_laplace(cfg, s, R[:, None]))

        val, _ = integrate_semi_infinite(h, 0.0, MID_SPEC)
        return val

    val, err = _outer_radius_integral(cfg, g, spec)
    if full_output:
        return float(val), float(err)
    return float(val)


def area_spectral_efficiency(cfg: NetworkConfig, spec: QuadSpec = OUTER_SPEC) -> float:
    """``lambda * mean SE`` in bit/s/Hz/km^2."""
    return cfg.lam * mean_spectral_efficiency(cfg, spec)
