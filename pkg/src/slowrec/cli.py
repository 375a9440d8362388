"""Command-line entry point: ``slowrec <subcommand> --config run.json``.

Exit codes: 0 success, 2 configuration/input error, 3 numeric
non-convergence, 4 bracket FAIL, 5 truncation cap too small.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .classifier import classify_model, predict_bracket, predict_tv_rate
from .errors import (CapError, ConfigError, InsufficientPointsError, NonConvergenceError,
                     OrderingError, SchemaError, WindowError)
from .io import atomic_write, write_csv, write_json
from .models import BesselLikeWalk, TrajectoryConfig, model_from_dict
from .montecarlo import (check_drift_power, check_drift_transformed, default_grid,
                         estimate_survival)
from .oracle import build_kernel, exact_survival, invariant_measure, tv_decay
from .plot import plot_csv, survival_svg
from .stats import Sandwich, default_window, fit_tail, sandwich_verdict
from .transforms import make_engine

log = logging.getLogger("slowrec")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONV, EXIT_FAIL, EXIT_CAP = 0, 2, 3, 4, 5


def _jsonable(obj):
    """Replace non-finite floats so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Run:
    """Resolved config plus output directory handling for one command."""

    def __init__(self, args):
        doc = cfgmod.load(args.config)
        self.cfg = cfgmod.resolve(doc, seed=args.seed, out=args.out)
        self.model = model_from_dict(self.cfg["model"])
        self.out = Path(self.cfg["output"]["directory"])
        self.formats = set(self.cfg["output"]["formats"])
        self.threads = args.threads
        self.out.mkdir(parents=True, exist_ok=True)
        write_json(self.out / "config-echo.json", self.cfg)

    @property
    def run(self):
        return self.cfg["run"]

    @property
    def analysis(self):
        return self.cfg["analysis"]

    def grid(self, horizon):
        spec = self.run["n_grid"]
        if isinstance(spec, list):
            return np.asarray(spec, dtype=np.int64)
        return default_grid(horizon, spec.get("points", 40), spec.get("start", 10))

    def alpha_beta(self, theta):
        a, b = self.analysis.get("alpha"), self.analysis.get("beta")
        if a is None or b is None:
            # default: 30% either side of the tail centre 1 - theta
            center = 1.0 - theta
            a = 0.7 * center if a is None else a
            b = 1.3 * center if b is None else b
        return a, b

    def write_json(self, name, obj):
        write_json(self.out / name, _jsonable(obj))


def cmd_classify(args):
    r = Run(args)
    a, b = r.analysis.get("alpha"), r.analysis.get("beta")
    rep = classify_model(r.model, a, b)
    doc = _jsonable(rep.to_dict())
    r.write_json("classification.json", doc)
    print(json.dumps(doc, indent=2, sort_keys=True))
    log.info("classify: regime %s", rep.regime.value)
    return EXIT_OK if rep.converged else EXIT_NONCONV


def cmd_tail(args):
    r = Run(args)
    run = r.run
    tcfg = TrajectoryConfig(run["x0"], run["A"], run["horizon"], run["seed"])
    grid = r.grid(run["horizon"])
    log.info("tail: simulating %d trajectories", run["trajectories"])
    est = estimate_survival(r.model, tcfg, run["trajectories"], grid, n_threads=r.threads)
    if "csv" in r.formats:
        est.to_csv(r.out / "survival.csv")
    theta = float(r.model.theta)
    summary = {"survival": est.summary(), "theta": theta, "verdict": None}
    try:
        window = r.analysis.get("window")
        fit = fit_tail(est, tuple(window) if window else default_window(est))
        summary["fit"] = fit.to_dict()
        a, b = r.alpha_beta(theta)
        summary.update(alpha=a, beta=b)
        bracket = predict_bracket(make_engine(r.model.drift()), theta, a, b)
    except (InsufficientPointsError, OrderingError) as exc:
        summary["error"] = str(exc)
        r.write_json("tail.json", summary)
        raise
    verdict = sandwich_verdict(fit, bracket)
    summary.update(bracket=list(bracket), verdict=verdict.value)
    r.write_json("tail.json", summary)
    if "svg" in r.formats:
        atomic_write(r.out / "survival.svg",
                     survival_svg([("surv", est.n_grid, est.surv)], bracket, "survival"))
    print(json.dumps(_jsonable({"verdict": verdict.value, "slope": fit.slope,
                                "bracket": list(bracket)})))
    log.info("tail: verdict %s", verdict.value)
    return EXIT_FAIL if verdict is Sandwich.FAIL else EXIT_OK


def cmd_drift_check(args):
    r = Run(args)
    an = r.analysis
    xs = an.get("drift_x", [1e2, 1e3, 1e4])
    alphas = an.get("drift_alphas") or ([an["alpha"]] if "alpha" in an else [0.2, 0.4, 0.6, 0.8])
    seed = r.run["seed"]
    samples = an["samples"]
    out = {"power": [check_drift_power(r.model, a, xs, samples, seed).to_dict()
                     for a in alphas]}
    engine = make_engine(r.model.drift())
    out["transformed"] = check_drift_transformed(r.model, engine, xs, samples, seed).to_dict()
    r.write_json("drift.json", out)
    print(json.dumps(_jsonable({"power": {str(p["alpha"]): p["verdict"] for p in out["power"]},
                                "C": out["transformed"]["C"], "D": out["transformed"]["D"]})))
    return EXIT_OK


def _kernel(r, n_max=None):
    cap = r.run.get("cap")
    if cap is None:
        if isinstance(r.model, BesselLikeWalk) and n_max is not None:
            cap = int(math.ceil(r.run["x0"])) + n_max
        else:
            raise ConfigError("run.cap is required for this model")
    return build_kernel(r.model, cap, A=None)


def cmd_oracle(args):
    r = Run(args)
    sub = args.which
    an = r.analysis
    if sub == "survival":
        n_max = an.get("n_max", r.run["horizon"])
        k = _kernel(r, n_max).with_absorbing(r.run["A"])
        log.info("oracle survival: cap %d, n_max %d", k.cap, n_max)
        ex = exact_survival(k, int(r.run["x0"]), n_max, an["accuracy"])
        grid = r.grid(n_max)
        est = ex.on_grid(grid)
        est.to_csv(r.out / "oracle-survival.csv")
        r.write_json("oracle-survival.json", {"cap": k.cap, "x0": ex.x0, "n_max": n_max,
                                              "error_bound": float(ex.error_bound[-1])})
    elif sub == "invariant":
        k = _kernel(r)
        im = invariant_measure(k, an["tol"])
        write_csv(r.out / "invariant.csv", ("x", "pi"),
                  ((i, float(p)) for i, p in enumerate(im.pi)))
        r.write_json("invariant.json", {"cap": k.cap, "residual": im.residual,
                                        "error_bound": im.error_bound,
                                        "tol_attainable": im.tol_attainable,
                                        "iterations": im.iterations})
    else:
        k = _kernel(r)
        im = invariant_measure(k, an["tol"])
        grid = an.get("tv_grid", [10, 100, 1000, 10000])
        rate = None
        if "alpha" in an:
            rate = predict_tv_rate(make_engine(r.model.drift()), an["alpha"],
                                   float(r.model.theta))
        tv = tv_decay(k, im, int(r.run["x0"]), grid, rate)
        tv.to_csv(r.out / "tv.csv")
        r.write_json("tv.json", {"cap": k.cap, "pi_residual": im.residual,
                                 "error_bound": float(tv.error_bound[-1]),
                                 "rate_slope": rate.slope if rate else None})
    return EXIT_OK


def cmd_transforms(args):
    r = Run(args)
    an = r.analysis
    engine = make_engine(r.model.drift())
    xs = an.get("transform_x", [1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6])
    alpha = an.get("alpha", 0.5)
    rows = []
    for x in xs:
        g = engine.G(x)
        rows.append((float(x), g, engine.G_inverse(g), engine.ell(alpha, x),
                     engine.ell_prime(alpha, x)))
    write_csv(r.out / "transforms.csv", ("x", "G", "G_inverse_of_G", "ell", "ell_prime"), rows)
    r.write_json("transforms.json", {"alpha": alpha, "closed_form": bool(engine.closed_form_),
                                     "log_slope_ell": engine.log_slope_ell(alpha, 1e3, 1e6)})
    return EXIT_OK


def cmd_plot(args):
    bracket = tuple(args.bracket) if args.bracket else None
    plot_csv(args.input, args.output, bracket)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="slowrec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="run configuration (JSON)")
        sp.add_argument("--out", help="output directory (overrides output.directory)")
        sp.add_argument("--seed", type=int, help="override run.seed")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker threads; changes speed only, never results")

    for name, fn in (("classify", cmd_classify), ("tail", cmd_tail),
                     ("drift-check", cmd_drift_check), ("transforms", cmd_transforms)):
        sp = sub.add_parser(name)
        common(sp)
        sp.set_defaults(func=fn)
    sp = sub.add_parser("oracle")
    sp.add_argument("which", choices=("survival", "invariant", "tv"))
    common(sp)
    sp.set_defaults(func=cmd_oracle)
    sp = sub.add_parser("plot")
    sp.add_argument("input", help="survival or TV CSV")
    sp.add_argument("output", help="SVG path")
    sp.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"))
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaError, InsufficientPointsError, OrderingError,
            WindowError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        log.error("%s", exc)
        return EXIT_NONCONV
    except CapError as exc:
        log.error("%s", exc)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
