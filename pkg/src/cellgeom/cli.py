"""Coverage, spectral efficiency and LOS tables for LOS/NLOS cellular networks.

    cellgeom ccdf    --lambda 100 --los quadexp --L 82.5m --engine both --seed 7
    cellgeom sweep   --var lambda --values 1:10000:log17 --metrics se,ase,outage@-5dB
    cellgeom losprob --L 82.5m

Lengths given on flags or in a ``--config`` file are meters unless suffixed
with ``km``; densities are BS/km^2. Output is CSV with ``#`` provenance lines.
Exit status: 0 on success, 1 when some cells failed, 2 on invalid input.
"""
from __future__ import annotations

import argparse
import io
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .analytics import NetworkConfig, default_threshold_grid, sir_ccdf
from .experiments import ResultTable, SweepSpec, find_optimal_density, parse_metrics, run_sweep
from .montecarlo import SimSpec, estimate_sir_cdf, simulate
from .propagation import THREEGPP_PICO, AlwaysLos, ExpLinear, NeverLos, PathLossParams, QuadExp, ThreeGpp

LOS_MODELS = ("quadexp", "3gpp", "explinear", "always", "never")

# config-file key -> parser of the raw string
_LENGTH_KEYS = {"L", "d0", "d1", "window", "guard"}
_FLOAT_KEYS = {"lambda", "mu", "sigma2", "alpha", "p", "k_los_db", "beta_los", "k_nlos_db", "beta_nlos"}
_INT_KEYS = {"trials", "seed", "jobs"}
_STR_KEYS = {"los", "engine", "var", "values", "metrics", "thresholds", "models", "dmax", "step", "far_field"}
CONFIG_KEYS = _LENGTH_KEYS | _FLOAT_KEYS | _INT_KEYS | _STR_KEYS

DEFAULTS = {
    "lambda": 100.0,
    "los": "quadexp",
    "L": 0.0825,
    "d0": 0.156,
    "d1": 0.030,
    "alpha": 8.59e-3,
    "p": 0.101,
    "mu": 1.0,
    "sigma2": 0.0,
    "k_los_db": THREEGPP_PICO.k_los_db,
    "beta_los": THREEGPP_PICO.beta_los,
    "k_nlos_db": THREEGPP_PICO.k_nlos_db,
    "beta_nlos": THREEGPP_PICO.beta_nlos,
    "engine": "analytic",
    "trials": 10_000,
    "window": None,
    "guard": 1e-6,
    "jobs": 1,
    "far_field": "on",
}


class ConfigError(ValueError):
    pass


def parse_length(text) -> float:
    """Length in km from ``"82.5"``/``"82.5m"`` (meters) or ``"0.0825km"``."""
    s = str(text).strip()
    try:
        if s.endswith("km"):
            return float(s[:-2])
        if s.endswith("m"):
            s = s[:-1]
        return float(s) / 1000.0
    except ValueError:
        raise ConfigError("malformed length %r" % text) from None


def parse_values(text: str, variable: str) -> list:
    """Sweep values: ``a:b:logN``, ``a:b:N`` or a comma list; lengths for ``L``."""
    s = text.strip()
    conv = parse_length if variable == "L" else _float
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ConfigError("malformed range %r" % text)
        lo, hi, n = parts
        log = n.startswith("log")
        try:
            count = int(n[3:] if log else n)
        except ValueError:
            raise ConfigError("malformed range %r" % text) from None
        a, b = conv(lo), conv(hi)
        if count < 1:
            raise ConfigError("range needs at least one point: %r" % text)
        if log:
            if not (a > 0 and b > 0):
                raise ConfigError("log range needs positive ends: %r" % text)
            return np.logspace(math.log10(a), math.log10(b), count).tolist()
        return np.linspace(a, b, count).tolist()
    return [conv(tok) for tok in s.split(",") if tok.strip()]


def _float(text) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError("malformed number %r" % text) from None


def parse_thresholds(text: str) -> np.ndarray:
    """``lo:hi:n`` (linear, dB) or a comma list."""
    if ":" in text:
        lo, hi, n = text.split(":")
        return np.linspace(_float(lo), _float(hi), int(_float(n)))
    return np.array([_float(t) for t in text.split(",")])


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("%s:%d: expected key=value" % (path, lineno))
            key, val = (t.strip() for t in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ConfigError("%s:%d: unknown key %r" % (path, lineno, key))
            out[key] = val
    return out


def _coerce(key: str, raw):
    if raw is None:
        return None
    if key in _LENGTH_KEYS:
        return parse_length(raw) if isinstance(raw, str) else float(raw)
    if key in _FLOAT_KEYS:
        return _float(raw)
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError("malformed integer for %s: %r" % (key, raw)) from None
    return raw


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < environment seed < flags; lengths become km."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(read_config_file(args.config))
    if "seed" not in settings and os.environ.get("CELLGEOM_SEED"):
        settings["seed"] = os.environ["CELLGEOM_SEED"]
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    settings.setdefault("seed", 0)
    resolved = {k: _coerce(k, v) for k, v in settings.items()}
    if resolved["los"] not in LOS_MODELS:
        raise ConfigError("unknown LOS model %r (choose from %s)" % (resolved["los"], ", ".join(LOS_MODELS)))
    if resolved["engine"] not in ("analytic", "montecarlo", "both"):
        raise ConfigError("unknown engine %r" % resolved["engine"])
    if resolved["far_field"] not in ("on", "off"):
        raise ConfigError("far_field must be 'on' or 'off', got %r" % resolved["far_field"])
    if not 0 <= resolved["seed"] < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return resolved


def build_los(s: dict, name: Optional[str] = None):
    name = name or s["los"]
    if name == "quadexp":
        return QuadExp(s["L"])
    if name == "3gpp":
        return ThreeGpp(d0=s["d0"], d1=s["d1"])
    if name == "explinear":
        return ExpLinear.from_per_meter(s["alpha"], s["p"])
    if name == "always":
        return AlwaysLos()
    if name == "never":
        return NeverLos()
    raise ConfigError("unknown LOS model %r" % name)


def build_config(s: dict) -> NetworkConfig:
    pl = PathLossParams(s["k_los_db"], s["beta_los"], s["k_nlos_db"], s["beta_nlos"])
    return NetworkConfig(lam=s["lambda"], mu=s["mu"], sigma2=s["sigma2"], pathloss=pl, los=build_los(s))


def _provenance_lines(s: dict, extra: Optional[dict] = None) -> str:
    lines = ["# generator: cellgeom %s\n" % __version__, "# units: lengths km, lambda BS/km^2\n"]
    for key in sorted(s):
        if s[key] is not None:
            lines.append("# %s: %s\n" % (key, s[key]))
    for key, val in (extra or {}).items():
        lines.append("# %s: %s\n" % (key, val))
    return "".join(lines)


def _num(v: float) -> str:
    return "nan" if math.isnan(v) else repr(float(v))


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_ccdf(args) -> int:
    s = resolve(args)
    cfg = build_config(s)
    t = parse_thresholds(s["thresholds"]) if s.get("thresholds") else default_threshold_grid()
    engine = s["engine"]
    failures = []
    cols = {"threshold_db": t}
    extra = {"config_digest": cfg.digest()}

    if engine in ("analytic", "both"):
        try:
            cols["analytic_ccdf"] = np.atleast_1d(sir_ccdf(cfg, 10.0 ** (t / 10.0)))
        except Exception as exc:  # noqa: BLE001
            cols["analytic_ccdf"] = np.full(t.size, np.nan)
            failures.append("analytic_ccdf: %s" % exc)
    if engine in ("montecarlo", "both"):
        spec = SimSpec(cfg, s["trials"], s["window"], s["guard"], s["seed"], far_field=s["far_field"] == "on")
        try:
            batch = simulate(spec, n_jobs=s["jobs"])
            curve = estimate_sir_cdf(spec, t, batch)
            cols["mc_ccdf"] = 1.0 - curve.y
            cols["mc_ci"] = curve.err
            extra["window_radius_km"] = repr(spec.radius)
            extra["mc_degenerate"] = curve.meta["n_degenerate"]
            if "analytic_ccdf" in cols and not failures:
                extra["grid_kolmogorov"] = _num(np.max(np.abs(cols["analytic_ccdf"] - cols["mc_ccdf"])))
        except Exception as exc:  # noqa: BLE001
            cols["mc_ccdf"] = np.full(t.size, np.nan)
            cols["mc_ci"] = np.full(t.size, np.nan)
            failures.append("mc_ccdf: %s" % exc)

    buf = io.StringIO()
    buf.write(_provenance_lines(s, extra))
    names = list(cols)
    buf.write(",".join(names) + "\n")
    for i in range(t.size):
        buf.write(",".join(_num(cols[n][i]) for n in names) + "\n")
    for f in failures:
        buf.write("# failed: %s\n" % f)
        print("failed: %s" % f, file=sys.stderr)
    _emit(buf.getvalue(), args.out)
    return 1 if failures else 0


def _plot_script(csv_path: str, table: ResultTable) -> str:
    names = list(table.columns)
    x = names[0]
    series = [n for n in names[1:] if not n.endswith("_mc_ci")]
    lines = [
        "# gnuplot script for %s\n" % csv_path,
        "set datafile separator ','\n",
        "set datafile commentschars '#'\n",
        "set key autotitle columnhead\n",
        "set xlabel '%s'\n" % x,
    ]
    if x == "lambda":
        lines.append("set logscale x\n")
    plots = ", ".join("'%s' using 1:%d with linespoints" % (csv_path, names.index(n) + 1) for n in series)
    lines.append("plot %s\n" % plots)
    return "".join(lines)


def cmd_sweep(args) -> int:
    s = resolve(args)
    if not s.get("var"):
        raise ConfigError("--var is required")
    if s["var"] not in ("lambda", "L"):
        raise ConfigError("unknown sweep variable %r" % s["var"])
    metrics = parse_metrics(s.get("metrics") or "se")
    values = parse_values(s["values"], s["var"]) if s.get("values") else None
    if values is None:
        if s["var"] != "lambda":
            raise ConfigError("--values is required for an L sweep")
        values = np.logspace(0, 4, 17).tolist()
    base = build_config(s)
    if s["var"] == "L" and s["los"] != "quadexp":
        raise ConfigError("an L sweep needs --los quadexp")
    mc = {"n_trials": s["trials"], "seed": s["seed"], "min_distance_guard": s["guard"], "n_jobs": s["jobs"],
          "far_field": s["far_field"] == "on"}
    if s["window"] is not None:
        mc["window_radius"] = s["window"]
    spec = SweepSpec(base, s["var"], values, metrics, engine=s["engine"], mc=mc)
    table = run_sweep(spec)
    table.provenance["settings"] = {k: v for k, v in sorted(s.items()) if v is not None}
    if args.optimum:
        if s["var"] != "lambda":
            raise ConfigError("--optimum needs a lambda sweep")
        opt_metric = next((m for m in spec.metrics if m.kind in ("se", "outage")), None)
        if opt_metric is None:
            raise ConfigError("--optimum needs an se or outage metric")
        opt = find_optimal_density(spec, opt_metric)
        table.provenance["optimum"] = {
            "metric": opt_metric.name,
            "lambda_star": opt.lambda_star,
            "value": opt.value,
            "bracket": list(opt.bracket),
            "unimodal": opt.unimodal,
            "flat": opt.flat,
        }
    _emit(table.to_csv(), args.out)
    if args.plot_script:
        if not args.out:
            raise ConfigError("--plot-script needs --out")
        with open(args.plot_script, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(_plot_script(args.out, table))
    for row, col, reason in table.failures:
        print("failed: %s=%s %s: %s" % (s["var"], row, col, reason), file=sys.stderr)
    return 0 if table.ok else 1


def _crossing(d: np.ndarray, p: np.ndarray) -> float:
    """First grid distance where ``p`` is at or below 0.5 (NaN if never)."""
    idx = np.flatnonzero(p <= 0.5)
    return float(d[idx[0]]) if idx.size else math.nan


def cmd_losprob(args) -> int:
    s = resolve(args)
    models = (s.get("models") or "quadexp,3gpp,explinear").split(",")
    dmax = parse_length(s.get("dmax") or "500m")
    step = parse_length(s.get("step") or "1m")
    if not (dmax > 0 and step > 0):
        raise ConfigError("dmax and step must be positive")
    n = int(round(dmax / step)) + 1
    # build the grid in meters so the printed distances are exact
    d_m = np.arange(n) * round(step * 1000.0, 9)
    d_km = d_m / 1000.0
    cols = {"d_m": d_m}
    crossings = {}
    for name in models:
        name = name.strip()
        model = build_los(s, name)
        p = np.clip(model(d_km), 0.0, 1.0)
        cols[name] = p
        crossings[name] = _crossing(cols["d_m"], p)
    extra = {"crossing_0.5_m": " ".join("%s=%s" % (k, _num(v)) for k, v in crossings.items())}
    if "quadexp" in crossings and "3gpp" in crossings:
        gap = abs(crossings["quadexp"] - crossings["3gpp"])
        extra["crossing_gap_steps"] = _num(gap / (step * 1000.0))
    buf = io.StringIO()
    buf.write(_provenance_lines(s, extra))
    names = list(cols)
    buf.write(",".join(names) + "\n")
    for i in range(n):
        buf.write(",".join(_num(cols[k][i]) for k in names) + "\n")
    _emit(buf.getvalue(), args.out)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="key=value settings file (flags override it)")
    p.add_argument("--lambda", dest="lambda", metavar="BS_PER_KM2", help="base-station density, BS/km^2")
    p.add_argument("--los", choices=LOS_MODELS, help="LOS probability model")
    p.add_argument("--L", dest="L", metavar="LEN", help="QuadExp length scale (m, or suffix km)")
    p.add_argument("--d0", metavar="LEN", help="3GPP d0 (m)")
    p.add_argument("--d1", metavar="LEN", help="3GPP d1 (m)")
    p.add_argument("--alpha", metavar="PER_M", help="ExpLinear slope, 1/m")
    p.add_argument("--p", metavar="P", help="ExpLinear offset")
    p.add_argument("--mu", help="Rayleigh fading rate")
    p.add_argument("--sigma2", help="normalised noise power (0 = interference limited)")
    p.add_argument("--engine", choices=("analytic", "montecarlo", "both"))
    p.add_argument("--trials", metavar="N", help="Monte Carlo trials")
    p.add_argument("--seed", metavar="N", help="Monte Carlo seed (falls back to $CELLGEOM_SEED, then 0)")
    p.add_argument("--window", metavar="LEN", help="simulation disk radius (m); automatic if omitted")
    p.add_argument("--guard", metavar="LEN", help="minimum BS distance (m)")
    p.add_argument("--jobs", metavar="N", help="worker processes for Monte Carlo")
    p.add_argument("--far-field", dest="far_field", choices=("on", "off"),
                   help="add the mean interference from beyond the disk (default on)")
    p.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellgeom",
        description=__doc__.split("\n\n")[0],
        epilog="Bare lengths are meters; bare densities are BS/km^2.",
    )
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ccdf", help="SIR coverage curve")
    _add_common(p)
    p.add_argument("--thresholds", metavar="LO:HI:N", help="dB grid (default -20:30:101)")
    p.set_defaults(func=cmd_ccdf)

    p = sub.add_parser("sweep", help="metrics over density or L")
    _add_common(p)
    p.add_argument("--var", choices=("lambda", "L"))
    p.add_argument("--values", metavar="SPEC", help="e.g. 1:10000:log17 or 40m,82.5m,120m")
    p.add_argument("--metrics", metavar="LIST", help="e.g. se,ase,outage@-5dB")
    p.add_argument("--optimum", action="store_true", help="also refine the optimal density")
    p.add_argument("--plot-script", metavar="PATH", help="write a gnuplot script for the CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("losprob", help="tabulate p_L(d)")
    _add_common(p)
    p.add_argument("--models", metavar="LIST", help="comma list of LOS models (default quadexp,3gpp,explinear)")
    p.add_argument("--dmax", metavar="LEN", help="largest distance (default 500m)")
    p.add_argument("--step", metavar="LEN", help="grid step (default 1m)")
    p.set_defaults(func=cmd_losprob)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
