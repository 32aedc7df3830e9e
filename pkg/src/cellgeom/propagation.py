"""Path loss and LOS probability models.

Distances are in km throughout. Attenuation constants are given as dB path
loss at 1 km, so the linear channel gain of a branch is
``10**(-k_db/10) * d**(-beta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "PathLossParams",
    "THREEGPP_PICO",
    "QuadExp",
    "ThreeGpp",
    "ExpLinear",
    "AlwaysLos",
    "NeverLos",
    "LosModel",
    "los_probability",
    "path_gain",
    "equivalent_distance",
    "inverse_equivalent_distance",
    "half_probability_distance",
    "level_interval",
]


def _as_distance(d, strict: bool = False):
    arr = np.asarray(d, dtype=float)
    if strict:
        if np.any(~(arr > 0)):
            raise ValueError("distance must be > 0")
    elif np.any(~(arr >= 0)):
        raise ValueError("distance must be >= 0")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


@dataclass(frozen=True)
class PathLossParams:
    """Dual-branch (LOS/NLOS) power-law path loss.

    Args:
        k_los_db: LOS path loss at 1 km, dB.
        beta_los: LOS path-loss exponent.
        k_nlos_db: NLOS path loss at 1 km, dB.
        beta_nlos: NLOS path-loss exponent.
    """

    k_los_db: float = 103.8
    beta_los: float = 2.09
    k_nlos_db: float = 145.4
    beta_nlos: float = 3.75

    def __post_init__(self):
        if not (self.beta_los > 0 and self.beta_nlos > 0):
            raise ValueError("path-loss exponents must be positive")
        if not self.beta_nlos > self.beta_los:
            raise ValueError("beta_nlos must exceed beta_los")
        if not self.k_nlos_db > self.k_los_db:
            raise ValueError("k_nlos_db must exceed k_los_db")

    @property
    def k_los(self) -> float:
        """Linear LOS gain at 1 km."""
        return 10.0 ** (-self.k_los_db / 10.0)

    @property
    def k_nlos(self) -> float:
        """Linear NLOS gain at 1 km."""
        return 10.0 ** (-self.k_nlos_db / 10.0)

    @property
    def k_eq(self) -> float:
        """Scale of the LOS -> NLOS equal-power distance map, ``(K_NL/K_L)**(1/beta_NL)``."""
        return 10.0 ** (-(self.k_nlos_db - self.k_los_db) / 10.0 / self.beta_nlos)

    @property
    def beta_eq(self) -> float:
        """Exponent of the LOS -> NLOS equal-power distance map."""
        return self.beta_los / self.beta_nlos


THREEGPP_PICO = PathLossParams()


@dataclass(frozen=True)
class QuadExp:
    """``p_L(d) = exp(-(d/L)**2)``; larger ``L`` means a sparser, more LOS-prone environment."""

    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")

    breakpoints = ()

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        with np.errstate(over="ignore"):
            return np.exp(-((d / self.L) ** 2))


@dataclass(frozen=True)
class ThreeGpp:
    """3GPP pico-cell LOS probability
    ``0.5 - min(0.5, 5 exp(-d0/d)) + min(0.5, 5 exp(-d/d1))``, extended by 1 at d = 0.
    """

    d0: float = 0.156
    d1: float = 0.030

    def __post_init__(self):
        if not (self.d0 > 0 and self.d1 > 0):
            raise ValueError("d0 and d1 must be positive")

    @property
    def breakpoints(self) -> tuple:
        # where each min() switches branch
        return tuple(sorted((self.d0 / math.log(10.0), self.d1 * math.log(10.0))))

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            near = np.minimum(0.5, 5.0 * np.exp(-self.d0 / d))
            far = np.minimum(0.5, 5.0 * np.exp(-d / self.d1))
        return np.where(d > 0, 0.5 - near + far, 1.0)


@dataclass(frozen=True)
class ExpLinear:
    """``p_L(d) = min(1, exp(-(alpha*d - p)))`` with ``alpha`` in 1/km.

    The published constants are alpha = 8.59e-3 per meter and p = 0.101; use
    :meth:`from_per_meter` for those. Passing a negative ``p`` gives the
    ``exp(-alpha*d - |p|)`` variant.
    """

    alpha: float
    p: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @classmethod
    def from_per_meter(cls, alpha_per_m: float, p: float) -> "ExpLinear":
        return cls(alpha=alpha_per_m * 1000.0, p=p)

    @property
    def breakpoints(self) -> tuple:
        knee = self.p / self.alpha
        return (knee,) if knee > 0 else ()

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        return np.exp(-np.maximum(self.alpha * d - self.p, 0.0))


@dataclass(frozen=True)
class AlwaysLos:
    """Every link is LOS (single-slope LOS model)."""

    breakpoints = ()

    def __call__(self, d):
        return np.ones_like(np.asarray(d, dtype=float))


@dataclass(frozen=True)
class NeverLos:
    """Every link is NLOS (single-slope NLOS model)."""

    breakpoints = ()

    def __call__(self, d):
        return np.zeros_like(np.asarray(d, dtype=float))


LosModel = Union[QuadExp, ThreeGpp, ExpLinear, AlwaysLos, NeverLos]


def los_probability(model: LosModel, d):
    """Probability that a link of length ``d`` km is LOS."""
    arr = _as_distance(d)
    return _out(model(arr), d)


def path_gain(params: PathLossParams, d, los):
    """Linear average channel gain at distance ``d`` km on the LOS (``los=True``) or NLOS branch.

    ``los`` may be a boolean array broadcasting against ``d``.
    """
    arr = _as_distance(d, strict=True)
    los = np.asarray(los, dtype=bool)
    ld = np.log(arr)
    log_gain = np.where(
        los,
        -params.k_los_db / 10.0 * math.log(10.0) - params.beta_los * ld,
        -params.k_nlos_db / 10.0 * math.log(10.0) - params.beta_nlos * ld,
    )
    return _out(np.exp(log_gain), np.broadcast(arr, los))


def inverse_equivalent_distance(params: PathLossParams, d_los):
    """NLOS distance whose NLOS gain equals the LOS gain at ``d_los``."""
    arr = _as_distance(d_los)
    return _out(params.k_eq * arr ** params.beta_eq, d_los)


def equivalent_distance(params: PathLossParams, d_nlos):
    """LOS distance whose LOS gain equals the NLOS gain at ``d_nlos``."""
    arr = _as_distance(d_nlos)
    return _out((arr / params.k_eq) ** (1.0 / params.beta_eq), d_nlos)


def half_probability_distance(model: LosModel, hi: float = 100.0) -> float:
    """Smallest distance at which ``p_L`` drops to 0.5, by bisection.

    Returns ``inf`` if the model never falls to 0.5 and 0 if it starts below.
    """
    if model(0.0) <= 0.5:
        return 0.0
    if model(hi) > 0.5:
        return math.inf
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if model(mid) > 0.5:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def level_interval(model: LosModel, level: float = 0.5, hi: float = 100.0) -> tuple:
    """Closed interval of distances on which ``p_L(d) == level`` for a non-increasing model.

    Both ends come from bisection. For strictly decreasing models the two ends
    coincide; the 3GPP curve sits exactly at 0.5 on ``[d0/ln 10, d1 ln 10]``.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")

    def bisect(pred):
        lo, top = 0.0, hi
        if not pred(top):
            return math.inf
        for _ in range(200):
            mid = 0.5 * (lo + top)
            if pred(mid):
                top = mid
            else:
                lo = mid
            if top - lo <= 1e-15 * top:
                break
        return top

    first = bisect(lambda d: model(d) <= level)
    last = bisect(lambda d: model(d) < level)
    return first, last
