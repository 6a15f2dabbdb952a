"""Command-line interface.

Subcommands cover the full workflow: generate designs (``doe``), fit and
serialize models (``fit``), evaluate them (``predict``, ``submodel``),
audit designs for additive-kernel singularities (``audit``), and run the
benchmark experiments (``bench-p``, ``bench-addsep``, ``bench-gfun``).

Options resolve in the order: command-line flag, then the JSON file
given with ``--config`` (keys are option names with underscores), then
built-in defaults.  Exit codes: 0 on success, 1 on usage or input
errors, 2 on numerical failure (including rank-deficient designs, whose
null relations are printed).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import (
    fig_add_vs_sep,
    fig_p_collapse,
    fig_q2_quartiles,
    main_effect_overlay,
    run_add_vs_sep,
    run_gfun_benchmark,
    run_p_collapse,
    save_fig_csv,
    save_records,
)
from .design import RNG_ALGORITHM, Design, DesignKind, DoeConfig, generate, load_design, save_design
from .kernels import KernelSpec
from .kriging import (
    NumericalError,
    OrdinaryTrend,
    SimpleTrend,
    SingularDesignError,
    detect_rank_deficiency,
    fit,
    load_model,
    save_model,
)
from .likelihood import FitConfig, FitError, mle_fit, save_trace
from .submodels import SubmodelCurve, centered_submodel, save_curve, submodel_mean, submodel_var

__all__ = ["main"]

_VERSION_LINE = f"addkrig {__version__} (rng: {RNG_ALGORITHM})"

_P_NOTE = (
    "P is the resolved-variance fraction 1 - sum_t v(x_t) / sum_t K(x_t, x_t): "
    "1 means the design determines the process at the test points, 0 means "
    "the prior is untouched."
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class _Opts:
    """Flag > config > default resolution for one subcommand invocation."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args = args
        self._config = config

    def get(self, name, default=None):
        val = getattr(self._args, name, None)
        if val is None:
            val = self._config.get(name, default)
        return val

    def require(self, name):
        val = self.get(name)
        if val is None:
            raise UsageError(f"missing required option --{name.replace('_', '-')}")
        return val


def _int_list(val) -> list[int]:
    if isinstance(val, str):
        val = val.split(",")
    return [int(v) for v in val]


def _theta_list(val) -> list:
    if isinstance(val, str):
        val = val.split(",")
    return [v if v == "sqrt" else float(v) for v in val]


def _read_matrix(path) -> np.ndarray:
    """Read a CSV with header x1..xd into an (m, d) array (duplicates allowed)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        expected = [f"x{j + 1}" for j in range(len(header))]
        if header != expected:
            raise ValueError(f"{path}: expected header {expected}, got {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no points")
    return np.asarray(rows, dtype=float)


def _read_xy(path):
    """Read a CSV with header x1..xd,y into (Design, observations)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        d = len(header) - 1
        expected = [f"x{j + 1}" for j in range(d)] + ["y"]
        if d < 1 or header != expected:
            raise ValueError(f"{path}: expected header x1..xd,y, got {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    return Design(data[:, :d]), data[:, d]


def _load_spec(path) -> KernelSpec:
    return KernelSpec.from_json(Path(path).read_text())


def _trend_from_opts(o: _Opts):
    kind = o.get("trend", "ordinary")
    if kind == "ordinary":
        return OrdinaryTrend()
    if kind == "simple":
        return SimpleTrend(float(o.get("trend_mean", 0.0)))
    raise UsageError(f"trend must be 'ordinary' or 'simple', got {kind!r}")


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_doe(o: _Opts) -> int:
    kind = DesignKind(o.require("kind"))
    fixed = {DesignKind.RECTANGLE: (4, 2), DesignKind.LADDER: (6, 2)}
    if kind in fixed:
        n, d = fixed[kind]
    else:
        n, d = int(o.require("n")), int(o.require("d"))
    cfg = DoeConfig(kind, n=n, d=d, seed=int(o.get("seed", 0)))
    design = generate(cfg)
    out = o.require("out")
    save_design(design, out, cfg)
    print(f"wrote {len(design)} x {design.dim} {kind.value} design to {out}")
    return 0


def _cmd_fit(o: _Opts) -> int:
    design, y = _read_xy(o.require("data"))
    trend = _trend_from_opts(o)
    kernel_path = o.get("kernel")
    if kernel_path is not None:
        spec = _load_spec(kernel_path)
        model = fit(spec, design, y, trend)
        print(f"fitted fixed-kernel model on {len(design)} points")
    else:
        cfg = FitConfig(
            n_starts=int(o.get("n_starts", 5)),
            max_evals=int(o.get("max_evals", 2000)),
            seed=int(o.get("seed", 0)),
            isotropic=not bool(o.get("anisotropic", False)),
        )
        result = mle_fit(o.get("family", "matern52"), o.get("structure", "additive"),
                         design, y, trend, cfg)
        model = fit(result.spec, design, y, trend)
        trace_path = o.get("trace")
        if trace_path is not None:
            save_trace(result, trace_path)
        flag = " (degenerate: constant observations)" if result.degenerate else ""
        print(f"fitted model on {len(design)} points, "
              f"log-likelihood {result.log_likelihood:.6f}{flag}")
    out = o.require("out")
    save_model(model, out)
    print(f"wrote model to {out}")
    return 0


def _cmd_predict(o: _Opts) -> int:
    model = load_model(o.require("model"))
    pts = _read_matrix(o.require("points"))
    if pts.shape[1] != model.spec.dim:
        raise ValueError(
            f"points have {pts.shape[1]} coordinates but the model has {model.spec.dim}"
        )
    mean = model.predict_mean(pts)
    var = model.predict_var(pts)
    out = o.require("out")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(pts.shape[1])] + ["mean", "variance"])
        for row, m, v in zip(pts, mean, var):
            writer.writerow([repr(float(x)) for x in row] + [repr(float(m)), repr(float(v))])
    print(f"wrote {pts.shape[0]} predictions to {out}")
    return 0


def _cmd_submodel(o: _Opts) -> int:
    model = load_model(o.require("model"))
    dim = int(o.require("dim"))
    grid = np.linspace(0.0, 1.0, int(o.get("grid_size", 101)))
    if bool(o.get("raw", False)):
        curve = SubmodelCurve(
            dim=dim, grid=grid,
            mean=submodel_mean(model, dim, grid),
            variance=submodel_var(model, dim, grid),
            centered=False,
        )
    else:
        curve = centered_submodel(model, dim, grid)
    out = o.require("out")
    save_curve(curve, out)
    kind = "raw" if not curve.centered else "centered"
    print(f"wrote {kind} submodel curve for dimension {dim} to {out}")
    return 0


def _cmd_audit(o: _Opts) -> int:
    design = load_design(o.require("design"))
    spec = _load_spec(o.require("kernel"))
    report = detect_rank_deficiency(spec, design, tol=float(o.get("tol", 1e-8)))
    print(report.describe())
    return 2 if report.deficient else 0


def _bench_meta(o: _Opts, **extra) -> dict:
    meta = {"seed": int(o.get("seed", 0))}
    meta.update(extra)
    return meta


def _cmd_bench_p(o: _Opts) -> int:
    d_grid = _int_list(o.get("d", "2,5,10,15"))
    thetas = _theta_list(o.get("theta", "0.3,0.5,sqrt"))
    n_test = int(o.get("n_test", 2000))
    replicates = int(o.get("replicates", 5))
    seed = int(o.get("seed", 0))
    records = run_p_collapse(d_grid, thetas, n_test, seed, replicates,
                             jobs=int(o.get("jobs", 1)))
    out = o.require("out")
    save_records(records, out, _bench_meta(o, experiment="p-collapse", d_grid=d_grid,
                                           thetas=[str(t) for t in thetas],
                                           n_test=n_test, replicates=replicates))
    print(f"wrote {len(records)} records to {out}")
    fig_out = o.get("fig_out")
    if fig_out is not None:
        save_fig_csv(fig_p_collapse(records), ["d", "theta", "P"], fig_out)
        print(f"wrote aggregated P-vs-d data to {fig_out}")
    return 0


def _cmd_bench_addsep(o: _Opts) -> int:
    d_grid = _int_list(o.get("d", "2,5,10,15"))
    n_test = int(o.get("n_test", 2000))
    replicates = int(o.get("replicates", 5))
    seed = int(o.get("seed", 0))
    records = run_add_vs_sep(d_grid, n_test, seed, replicates,
                             jobs=int(o.get("jobs", 1)))
    out = o.require("out")
    save_records(records, out, _bench_meta(o, experiment="add-vs-sep", d_grid=d_grid,
                                           n_test=n_test, replicates=replicates))
    print(f"wrote {len(records)} records to {out}")
    fig_out = o.get("fig_out")
    if fig_out is not None:
        save_fig_csv(fig_add_vs_sep(records), ["d", "P_mA", "P_mS"], fig_out)
        print(f"wrote aggregated predictor-part data to {fig_out}")
    return 0


def _cmd_bench_gfun(o: _Opts) -> int:
    d_grid = _int_list(o.get("d", "5"))
    replicates = int(o.get("replicates", 10))
    n_test = int(o.get("n_test", 1000))
    seed = int(o.get("seed", 0))
    target = float(o.get("target", 0.75))
    cfg = FitConfig(n_starts=int(o.get("n_starts", 5)),
                    max_evals=int(o.get("max_evals", 2000)))
    records = run_gfun_benchmark(d_grid, replicates, n_test, seed, target, cfg,
                                 jobs=int(o.get("jobs", 1)))
    out = o.require("out")
    save_records(records, out, _bench_meta(o, experiment="gfun-q2", d_grid=d_grid,
                                           n_test=n_test, replicates=replicates,
                                           target=target))
    print(f"wrote {len(records)} records to {out}")
    fig_out = o.get("fig_out")
    if fig_out is not None:
        save_fig_csv(fig_q2_quartiles(records),
                     ["d", "model", "q2_q25", "q2_q50", "q2_q75"], fig_out)
        print(f"wrote Q2 quartiles to {fig_out}")
    effect_out = o.get("effect_out")
    if effect_out is not None:
        overlay = main_effect_overlay(int(o.get("effect_d", 10)), seed,
                                      grid_size=int(o.get("effect_grid", 101)),
                                      target=target, cfg=cfg)
        rows = [
            {"x": float(x), "mean": float(m), "analytic": float(a)}
            for x, m, a in zip(overlay.grid, overlay.mean, overlay.analytic)
        ]
        save_fig_csv(rows, ["x", "mean", "analytic"], effect_out)
        print(f"wrote main-effect overlay to {effect_out}")
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file with option defaults for this subcommand")


def build_parser() -> _Parser:
    parser = _Parser(prog="addkrig", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=_VERSION_LINE)
    subs = parser.add_subparsers(dest="cmd", parser_class=_Parser)

    p = subs.add_parser("doe", help="generate a design of experiments")
    p.add_argument("--kind", choices=[k.value for k in DesignKind])
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(run=_cmd_doe)

    p = subs.add_parser("fit", help="fit a model to x1..xd,y data")
    p.add_argument("--data", help="CSV with columns x1..xd,y")
    p.add_argument("--family", choices=["se", "matern52"])
    p.add_argument("--structure", choices=["additive", "separable"])
    p.add_argument("--trend", choices=["ordinary", "simple"])
    p.add_argument("--trend-mean", type=float)
    p.add_argument("--kernel", help="fixed KernelSpec JSON (skips the likelihood search)")
    p.add_argument("--n-starts", type=int)
    p.add_argument("--max-evals", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--anisotropic", action="store_const", const=True)
    p.add_argument("--trace", help="write the optimizer trace CSV here")
    p.add_argument("--out")
    p.set_defaults(run=_cmd_fit)

    p = subs.add_parser("predict", help="evaluate a saved model at points")
    p.add_argument("--model")
    p.add_argument("--points", help="CSV with header x1..xd")
    p.add_argument("--out")
    p.set_defaults(run=_cmd_predict)

    p = subs.add_parser("submodel", help="export a per-dimension submodel curve")
    p.add_argument("--model")
    p.add_argument("--dim", type=int, help="dimension index, zero-based")
    p.add_argument("--grid-size", type=int)
    p.add_argument("--raw", action="store_const", const=True,
                   help="export the uncentered curve")
    p.add_argument("--out")
    p.set_defaults(run=_cmd_submodel)

    p = subs.add_parser("audit", help="check a design for additive-kernel singularity")
    p.add_argument("--design", help="CSV with header x1..xd")
    p.add_argument("--kernel", help="KernelSpec JSON")
    p.add_argument("--tol", type=float)
    p.set_defaults(run=_cmd_audit)

    p = subs.add_parser("bench-p", help="predictivity collapse vs dimension",
                        description=_P_NOTE)
    p.add_argument("--d", help="comma-separated dimensions")
    p.add_argument("--theta", help="comma-separated ranges; 'sqrt' means sqrt(d)")
    p.add_argument("--n-test", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out")
    p.add_argument("--fig-out")
    p.set_defaults(run=_cmd_bench_p)

    p = subs.add_parser("bench-addsep",
                        help="additive vs separable predictor parts",
                        description=_P_NOTE)
    p.add_argument("--d", help="comma-separated dimensions")
    p.add_argument("--n-test", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out")
    p.add_argument("--fig-out")
    p.set_defaults(run=_cmd_bench_addsep)

    p = subs.add_parser("bench-gfun", help="g-function Q2 benchmark")
    p.add_argument("--d", help="comma-separated dimensions")
    p.add_argument("--replicates", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--target", type=float,
                   help="prescribed sum of first-order indices (default 0.75)")
    p.add_argument("--n-starts", type=int)
    p.add_argument("--max-evals", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out")
    p.add_argument("--fig-out")
    p.add_argument("--effect-out", help="write an x,mean,analytic main-effect overlay")
    p.add_argument("--effect-d", type=int)
    p.add_argument("--effect-grid", type=int)
    p.set_defaults(run=_cmd_bench_gfun)

    for sub_action in subs.choices.values():
        _add_common(sub_action)
    return parser


def _config_for(args: argparse.Namespace, parser: _Parser) -> dict:
    path = getattr(args, "config", None)
    if path is None:
        return {}
    with open(path) as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    known = {a for a in vars(args) if a not in ("cmd", "run", "config")}
    unknown = config.keys() - known
    if unknown:
        raise UsageError(f"{path}: unknown config keys for '{args.cmd}': {sorted(unknown)}")
    return config


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "cmd", None) is None:
            parser.error("a subcommand is required (see --help)")
        config = _config_for(args, parser)
        return args.run(_Opts(args, config))
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except SingularDesignError as exc:
        print(exc.report.describe(), file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FitError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
