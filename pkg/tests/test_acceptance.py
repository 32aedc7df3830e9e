"""Acceptance criteria 1-7.

Each ``criterion_N`` returns ``(passed, detail)``. Under pytest every result
is also collected into an "acceptance criteria" section of the terminal
summary; run this file directly to print the same seven lines on its own.
"""
import math
import os
import subprocess
import sys
import time

import numpy as np
from scipy import integrate
from scipy.integrate import simpson

sys.path.insert(0, os.path.dirname(__file__))

from conftest import L_VALUES, LAMBDA_GRID  # noqa: E402
from cellgeom.analytics import (  # noqa: E402
    NetworkConfig,
    area_spectral_efficiency,
    default_threshold_grid,
    laplace_interference,
    mean_spectral_efficiency,
    outage_probability,
    serving_distance_bounds,
    serving_distance_pdf,
    serving_distance_tail,
    sir_ccdf,
)
from cellgeom.montecarlo import SimSpec, estimate_mean_se, kolmogorov_distance, simulate  # noqa: E402
from cellgeom.propagation import (  # noqa: E402
    THREEGPP_PICO,
    AlwaysLos,
    QuadExp,
    ThreeGpp,
    equivalent_distance,
    inverse_equivalent_distance,
)

OUTAGE_BANDS = {-10.0: (0.20, 0.34), -5.0: (0.48, 0.62)}
VALIDATION_DENSITIES = (10.0, 100.0, 1000.0)


def _se_grid():
    return {L: np.array([mean_spectral_efficiency(NetworkConfig(lam=lam, los=QuadExp(L))) for lam in LAMBDA_GRID])
            for L in L_VALUES}


def _outage_grid():
    return {L: np.array([outage_probability(NetworkConfig(lam=lam, los=QuadExp(L)), [-10.0, -5.0])
                         for lam in LAMBDA_GRID]).T
            for L in L_VALUES}


def criterion_1(n_trials=100_000):
    """3GPP Monte Carlo against the QuadExp(82.5 m) analytic SIR CDF, exact Kolmogorov distance."""
    start = time.perf_counter()
    db = np.arange(-50.0, 90.0 + 1e-9, 0.2)
    parts, worst = [], 0.0
    for lam in VALIDATION_DENSITIES:
        # analytic CDF on a fine dB grid; linear interpolation error is ~3e-5 at this step
        cdf_db = 1.0 - sir_ccdf(NetworkConfig(lam=lam, los=QuadExp(0.0825)), 10 ** (db / 10))
        batch = simulate(SimSpec(NetworkConfig(lam=lam, los=ThreeGpp()), n_trials, seed=int(lam)))
        samples_db = 10 * np.log10(batch.sir[batch.valid])
        ks = kolmogorov_distance(samples_db, lambda x: np.interp(x, db, cdf_db))
        worst = max(worst, ks)
        parts.append("lambda=%g KS=%.4f" % (lam, ks))
    elapsed = time.perf_counter() - start
    ok = worst < 0.02 and elapsed < 300.0
    return ok, "%s (limit 0.02), %d trials each, %.0f s (limit 300 s)" % (", ".join(parts), n_trials, elapsed)


def criterion_2(outage_grid=None):
    """Maximum analytic outage over the density grid lies in the widened bands for every L."""
    grid = outage_grid or _outage_grid()
    ok, parts = True, []
    for row, (t, (lo, hi)) in enumerate(OUTAGE_BANDS.items()):
        peaks = [float(grid[L][row].max()) for L in L_VALUES]
        ok &= all(lo <= p <= hi for p in peaks)
        parts.append("%gdB max outage %s in [%.2f, %.2f]" % (t, "/".join("%.4f" % p for p in peaks), lo, hi))
    return ok, "; ".join(parts) + " for L=40/82.5/120 m"


def criterion_3(se_grid=None):
    """Interior SE maximum for each L and the ordering of the peak densities."""
    grid = se_grid or _se_grid()
    idx = {L: int(np.argmax(grid[L])) for L in L_VALUES}
    interior = all(0 < k < LAMBDA_GRID.size - 1 for k in idx.values())
    star = {L: LAMBDA_GRID[k] for L, k in idx.items()}
    ordered = star[0.120] < star[0.0825] < star[0.040]
    detail = "peak lambda %s for L=40/82.5/120 m, interior=%s, ordered=%s" % (
        "/".join("%.1f" % star[L] for L in L_VALUES), interior, ordered)
    return interior and ordered, detail


def criterion_4(h=0.02):
    """Log-log ASE slope at L=82.5 m by central differences in log lambda."""
    def slope(lam):
        lo, hi = (area_spectral_efficiency(NetworkConfig(lam=lam * math.exp(k * h))) for k in (-1, 1))
        return (math.log(hi) - math.log(lo)) / (2 * h)

    s10, s1e4 = slope(10.0), slope(1e4)
    return s10 > 1.0 and s1e4 < 1.0, "slope %.3f at lambda=10 (>1), %.3f at lambda=1e4 (<1)" % (s10, s1e4)


def criterion_5(n_trials=20_000):
    """AlwaysLos: analytic CCDF and Monte Carlo SE do not depend on density."""
    y = 10 ** (default_threshold_grid() / 10)
    a, b = (sir_ccdf(NetworkConfig(lam=lam, los=AlwaysLos()), y) for lam in (10.0, 1000.0))
    gap = float(np.max(np.abs(a - b)))
    se10 = estimate_mean_se(SimSpec(NetworkConfig(lam=10.0, los=AlwaysLos()), n_trials, seed=1))
    se1k = estimate_mean_se(SimSpec(NetworkConfig(lam=1000.0, los=AlwaysLos()), n_trials, seed=2))
    joint = math.hypot(se10.stderr, se1k.stderr)
    diff = abs(se10.mean - se1k.mean)
    ok = gap <= 1e-4 and diff < 3 * joint
    return ok, "CCDF gap %.1e (limit 1e-4); MC SE %.4f vs %.4f, |diff| %.4f < 3 x %.4f" % (
        gap, se10.mean, se1k.mean, diff, joint)


def criterion_6():
    """Internal consistency suite."""
    cfg = NetworkConfig(lam=100.0, los=QuadExp(0.0825))
    checks = {}

    lo, hi = serving_distance_bounds(cfg)
    mass, _ = integrate.quad(lambda z: serving_distance_pdf(cfg, math.exp(z)) * math.exp(z),
                             math.log(lo), math.log(hi), epsabs=0, epsrel=1e-12, limit=1000)
    checks["|int f_r - 1|"] = (abs(mass - 1.0), 1e-6)

    worst = 0.0
    for lam in (1.0, 100.0, 1e4):
        c = cfg.replace(lam=lam)
        R = np.geomspace(*serving_distance_bounds(c), 60)
        for fn in (serving_distance_tail, serving_distance_pdf):
            closed, numeric = fn(c, R, method="closed"), fn(c, R, method="numeric")
            keep = closed > 1e-300
            worst = max(worst, float(np.max(np.abs(numeric[keep] / closed[keep] - 1.0))))
    checks["closed vs numeric rel err"] = (worst, 1e-6)

    lap0 = max(abs(laplace_interference(NetworkConfig(lam=100.0, los=los), 0.0, R) - 1.0)
               for los in (QuadExp(0.0825), ThreeGpp()) for R in (0.01, 0.05, 0.3))
    checks["|L(0) - 1|"] = (lap0, 1e-15)

    x = np.geomspace(1e-6, 1e3, 400)
    trip = max(float(np.max(np.abs(equivalent_distance(THREEGPP_PICO, inverse_equivalent_distance(THREEGPP_PICO, x)) / x - 1))),
               float(np.max(np.abs(inverse_equivalent_distance(THREEGPP_PICO, equivalent_distance(THREEGPP_PICO, x)) / x - 1))))
    checks["round trip rel err"] = (trip, 1e-12)

    u = np.linspace(0.0, 60.0, 601)
    ref = simpson(sir_ccdf(cfg, np.expm1(u * math.log(2.0)) + 1e-300), x=u)
    checks["SE vs CCDF-of-log rel err"] = (abs(mean_spectral_efficiency(cfg) / ref - 1.0), 1e-2)

    ok = all(v <= tol for v, tol in checks.values())
    return ok, ", ".join("%s %.1e (<=%.0e)" % (k, v, tol) for k, (v, tol) in checks.items())


CLI_COMMANDS = (
    ["ccdf", "--lambda", "100", "--los", "3gpp", "--engine", "both", "--trials", "5000", "--seed", "17"],
    ["sweep", "--var", "lambda", "--values", "10,100,1000", "--metrics", "outage@-5dB,se",
     "--engine", "both", "--trials", "2000", "--seed", "5", "--optimum"],
    ["sweep", "--var", "L", "--values", "40m,82.5m,120m", "--metrics", "outage@-10dB", "--lambda", "300"],
    ["losprob"],
)


def criterion_7():
    """Every CLI command with a fixed seed prints byte-identical output twice."""
    env = {k: v for k, v in os.environ.items() if k != "CELLGEOM_SEED"}
    results = []
    for argv in CLI_COMMANDS:
        runs = [subprocess.run([sys.executable, "-m", "cellgeom", *argv], capture_output=True, env=env)
                for _ in range(2)]
        same = runs[0].returncode == runs[1].returncode == 0 and runs[0].stdout == runs[1].stdout and runs[0].stdout
        results.append((argv[0], bool(same), len(runs[0].stdout)))
    ok = all(same for _, same, _ in results)
    return ok, ", ".join("%s %s (%d bytes)" % (name, "identical" if same else "DIFFERENT", n) for name, same, n in results)


def _record(log, number, result):
    ok, detail = result
    line = "criterion %d: %s - %s" % (number, "PASS" if ok else "FAIL", detail)
    log.append(line)
    print(line)
    assert ok, line


def test_criterion_1_validation_reproduction(acceptance_log):
    _record(acceptance_log, 1, criterion_1())


def test_criterion_2_outage_magnitudes(acceptance_log, outage_grid):
    _record(acceptance_log, 2, criterion_2(outage_grid))


def test_criterion_3_se_peak_ordering(acceptance_log, se_grid):
    _record(acceptance_log, 3, criterion_3(se_grid))


def test_criterion_4_ase_elasticity(acceptance_log):
    _record(acceptance_log, 4, criterion_4())


def test_criterion_5_single_slope_invariance(acceptance_log):
    _record(acceptance_log, 5, criterion_5())


def test_criterion_6_internal_consistency(acceptance_log):
    _record(acceptance_log, 6, criterion_6())


def test_criterion_7_cli_determinism(acceptance_log):
    _record(acceptance_log, 7, criterion_7())


if __name__ == "__main__":
    failed = 0
    for n, fn in enumerate((criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7), 1):
        ok, detail = fn()
        failed += not ok
        print("criterion %d: %s - %s" % (n, "PASS" if ok else "FAIL", detail), flush=True)
    sys.exit(1 if failed else 0)
