"""LOS probability models side by side, and the equivalent-distance mapping.

Run: python3 demos/los_models.py
"""
import numpy as np

from cellgeom.propagation import (
    THREEGPP_PICO,
    ExpLinear,
    QuadExp,
    ThreeGpp,
    equivalent_distance,
    inverse_equivalent_distance,
    level_interval,
    path_gain,
)

# distances in km throughout; 0..300 m here
d = np.linspace(0.0, 0.3, 13)
models = {
    "quadexp": QuadExp(0.0825),
    "3gpp": ThreeGpp(d0=0.156, d1=0.030),
    "explinear": ExpLinear.from_per_meter(8.59e-3, 0.101),
}

print("LOS probability")
print("%8s" % "d [m]" + "".join("%11s" % name for name in models))
for x in d:
    print("%8.0f" % (1000 * x) + "".join("%11.4f" % float(m(x)) for m in models.values()))

# QuadExp(82.5 m) is a one-parameter fit to the 3GPP curve: both sit at 1/2 around 68-69 m
for name in ("quadexp", "3gpp"):
    first, last = level_interval(models[name])
    print("%s equals 1/2 on [%.2f, %.2f] m" % (name, 1000 * first, 1000 * last))

# a LOS link at distance d delivers the same mean power as a NLOS link at d_eq^-1(d)
pl = THREEGPP_PICO
print("\nequivalent distances (K_eq = %.4f, beta_eq = %.4f)" % (pl.k_eq, pl.beta_eq))
for x in (0.01, 0.05, 0.1, 0.5):
    d_nlos = float(inverse_equivalent_distance(pl, x))
    print("LOS %5.0f m  <->  NLOS %7.2f m   gains %.3e / %.3e"
          % (1000 * x, 1000 * d_nlos, path_gain(pl, x, True), path_gain(pl, d_nlos, False)))
    assert abs(float(equivalent_distance(pl, d_nlos)) - x) <= 1e-12 * x
