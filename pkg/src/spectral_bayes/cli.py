"""Command-line experiment runner.

Subcommands: ``run``, ``sweep``, ``mcmc`` and ``export-marginals``. Experiments can be
described by a JSON config file (validated against :data:`CONFIG_SCHEMA`); command-line
flags override file fields. The ``SPECTRAL_BAYES_THREADS`` environment variable caps
the number of BLAS threads.
"""

import argparse
import csv
import importlib
import inspect
import json
import os
import sys
import time
import traceback
from pathlib import Path

import jsonschema
import numpy as np
from scipy.special import ndtri
from threadpoolctl import threadpool_limits

from .asle import two_step_adapt
from .design import make_design, strategy_from_name
from .multibasis import BasisSpec
from .reference import rwm_posterior
from .sle import Expansion, evaluate_loglike, fit_log_target, fit_sle, marginal_1d, summarize
from .transforms import PriorSpec

THREADS_ENV = "SPECTRAL_BAYES_THREADS"
GRID_POINTS = 256

_MARGINAL_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["uniform", "gaussian", "lognormal"]},
        "lower": {"type": "number"},
        "upper": {"type": "number"},
        "mean": {"type": "number"},
        "std": {"type": "number", "exclusiveMinimum": 0},
        "log_location": {"type": "number"},
        "log_scale": {"type": "number", "exclusiveMinimum": 0},
    },
}

_POINT = {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}, "minItems": 2, "maxItems": 2}

_HEAT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kappa0", "inclusions", "dirichlet_top", "neumann_bottom_flux", "measurement_points"],
    "properties": {
        "n": {"type": "integer", "minimum": 2},
        "kappa0": {"type": "number", "exclusiveMinimum": 0},
        "inclusions": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}, "minItems": 4, "maxItems": 4},
        },
        "dirichlet_top": {"type": "number"},
        "neumann_bottom_flux": {"type": "number"},
        "measurement_points": {"type": "array", "minItems": 1, "items": _POINT},
        "kappa_true": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "sigma_t": {"type": "number", "exclusiveMinimum": 0},
        "noise_seed": {"type": "integer", "minimum": 0},
        "data": {"type": "array", "items": {"type": "number"}},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["problem"],
    "properties": {
        "problem": {"enum": ["conjugate1d", "normal2d", "ihcp2d", "ihcp6d", "custom"]},
        "loglike": {"type": "string", "pattern": "^[A-Za-z_][\\w.]*:[A-Za-z_]\\w*$"},
        "prior": {
            "type": "object",
            "required": ["marginals"],
            "properties": {"marginals": {"type": "array", "minItems": 1, "items": _MARGINAL_SCHEMA}},
        },
        "degree": {"type": "integer", "minimum": 0},
        "K": {"type": "integer", "minimum": 1},
        "q": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "design": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"strategy": {"enum": ["sobol", "random"]}, "seed": {"type": "integer", "minimum": 0}},
        },
        "reference_change": {"enum": ["none", "two_step"]},
        "stage2": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"degree": {"type": "integer", "minimum": 0}, "K": {"type": "integer", "minimum": 1}},
        },
        "mcmc": {
            "type": "object",
            "additionalProperties": False,
            "required": ["T"],
            "properties": {
                "T": {"type": "integer", "minimum": 1},
                "proposal_std": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "seed": {"type": "integer", "minimum": 0},
                "burn_in": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            },
        },
        "problem_options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
                "sensor_height": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "heat_problem": _HEAT_SCHEMA,
        "export_field": {"type": "boolean"},
        "marginals": {"type": "boolean"},
        "outputs": {"type": "string"},
    },
    "if": {"properties": {"problem": {"const": "custom"}}},
    "then": {"required": ["loglike", "prior"]},
}

DEFAULTS = {"degree": 5, "K": 1000, "q": 1.0, "reference_change": "none", "marginals": True, "outputs": "results"}


class ConfigError(ValueError):
    pass


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finite_or_none(value):
    value = float(value)
    return value if np.isfinite(value) else None


def _num(value, units):
    """Number with units; non-finite values (e.g. the std of a negative variance) become null."""
    return {"value": _finite_or_none(value), "units": units}


def _count(value):
    return {"value": int(value), "units": "1"}


def load_config(path):
    """Parse and validate a JSON config, reporting line/column or field paths on failure."""
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    validate_config(cfg, source=str(path))
    return cfg


def validate_config(cfg, source="config"):
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            field = "/".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"{source}: field '{field}': {err.message}")
        raise ConfigError("\n".join(lines))


def merge_config(cfg, args):
    """Defaults < config file < command-line flags."""
    out = dict(DEFAULTS)
    out.update(cfg or {})
    if getattr(args, "problem", None):
        out["problem"] = args.problem
    for key, flag in (("degree", "p"), ("K", "K"), ("q", "q"), ("outputs", "out")):
        val = getattr(args, flag, None)
        if val is not None:
            out[key] = val
    if getattr(args, "strategy", None):
        out["design"] = dict(out.get("design", {}), strategy=args.strategy)
    if getattr(args, "export_field", False):
        out["export_field"] = True
    if getattr(args, "reference_change", None):
        out["reference_change"] = args.reference_change
    if getattr(args, "mcmc_T", None):
        out["mcmc"] = dict(out.get("mcmc", {}), T=args.mcmc_T)
    if getattr(args, "seed", None) is not None:
        out.setdefault("design", {})
        out["design"] = dict(out["design"], seed=args.seed)
        if "mcmc" in out:
            out["mcmc"] = dict(out["mcmc"], seed=args.seed)
    if "problem" not in out:
        raise ConfigError("no problem given (positional argument or config field 'problem')")
    validate_config(out, source="effective config")
    return out


def build_problem(cfg):
    """Benchmark object (prior, vectorized loglike, names and units) for a config."""
    from .models.benchmarks import Benchmark, get_benchmark

    opts = dict(cfg.get("problem_options", {}))
    if cfg["problem"] == "custom":
        module, attr = cfg["loglike"].split(":")
        loglike = getattr(importlib.import_module(module), attr)
        prior = PriorSpec.from_dict(cfg["prior"])
        names = tuple(f"x{i + 1}" for i in range(prior.M))
        return Benchmark("custom", prior, loglike, names, ("1",) * prior.M, np.array([]), "1")
    if cfg["problem"] in ("ihcp2d", "ihcp6d"):
        bench = get_benchmark(cfg["problem"], **{k: v for k, v in opts.items() if k in ("n", "seed", "sensor_height")})
        if "heat_problem" in cfg:
            return _custom_heat(cfg, bench)
    elif "heat_problem" in cfg:
        raise ConfigError("field 'heat_problem' applies only to the ihcp2d and ihcp6d problems")
    else:
        bench = get_benchmark(cfg["problem"])
    if "prior" in cfg:
        bench.prior = PriorSpec.from_dict(cfg["prior"])
    return bench


def _custom_heat(cfg, bench):
    """IHCP benchmark on a geometry taken from the config; unset fields keep the benchmark defaults."""
    from .models.benchmarks import ihcp_benchmark
    from .models.heat import HeatProblem

    hp = dict(cfg["heat_problem"])
    hp.setdefault("n", bench.extra["problem"].n)
    problem = HeatProblem.from_dict(hp)
    prior = PriorSpec.from_dict(cfg["prior"]) if "prior" in cfg else bench.prior
    kappa_true = hp.get("kappa_true", bench.extra["kappa_true"])
    if "data" not in hp and len(kappa_true) != problem.n_params:
        raise ConfigError(f"field 'heat_problem/kappa_true': expected {problem.n_params} entries, got {len(kappa_true)}")
    seed = hp.get("noise_seed", bench.extra["noise_seed"])
    sigma_t = hp.get("sigma_t", bench.extra["sigma_t"])
    try:
        return ihcp_benchmark(bench.name, problem, prior, kappa_true, seed, sigma_t, hp.get("data"))
    except ValueError as exc:
        raise ConfigError(f"field 'heat_problem': {exc}") from None


def _strategy(cfg):
    d = cfg.get("design", {})
    return strategy_from_name(d.get("strategy", "sobol"), d.get("seed", 0))


def _seeds(cfg, bench):
    d = cfg.get("design", {})
    seeds = {"design_strategy": d.get("strategy", "sobol"), "design_seed": d.get("seed", 0)}
    if "mcmc" in cfg:
        seeds["mcmc_seed"] = cfg["mcmc"].get("seed", 0)
    if "noise_seed" in bench.extra:
        seeds["data_noise_seed"] = bench.extra["noise_seed"]
    return seeds


def plot_range(marginal, tail=1e-4):
    lo, hi = marginal.support
    if np.isfinite(lo) and np.isfinite(hi):
        return lo, hi
    a, b = ndtri(tail), ndtri(1.0 - tail)
    return float(marginal.from_standard(a)), float(marginal.from_standard(b))


def write_marginals(expansion, prior, out, points=GRID_POINTS, clamp=False):
    """One ``marginal_<j>.csv`` per dimension on the prior's plotting range, header ``x<j>,density``."""
    paths = []
    for j in range(expansion.spec.M):
        lo, hi = plot_range(prior.marginals[j])
        x = np.linspace(lo, hi, points)
        dens = marginal_1d(expansion, j)(x)
        label = "density"
        if clamp:
            dens = np.maximum(dens, 0.0)
            label = "density_clamped_at_zero"
        path = Path(out) / f"marginal_{j + 1}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{j + 1}", label])
            for a, b in zip(x, dens):
                w.writerow([repr(float(a)), repr(float(b))])
        paths.append(path)
    return paths


def _summary_block(s, bench):
    params = []
    for j, name in enumerate(bench.param_names):
        u = bench.param_units[j]
        params.append(
            {
                "name": name,
                "mean": _num(s.means[j], u),
                "std": _num(s.stds[j], u),
            }
        )
    return {
        "evidence": _num(s.evidence, bench.evidence_units),
        "parameters": params,
        "correlations": {"value": [[_finite_or_none(v) for v in row] for row in np.atleast_2d(s.correlations)], "units": "1"},
        "flags": list(s.flags),
    }


def _fit_block(report):
    d = report.to_dict(include_coefficients=False)
    return {k: (_count(v) if isinstance(v, int) else {"value": v, "units": "1"}) for k, v in d.items()}


def cmd_run(cfg, clamp=False):
    out = Path(cfg["outputs"])
    out.mkdir(parents=True, exist_ok=True)
    bench = build_problem(cfg)
    if cfg.get("export_field", False) and "problem" not in bench.extra:
        raise ConfigError("field 'export_field' applies only to the ihcp2d and ihcp6d problems")
    prior = bench.prior
    timings = {}
    t0 = time.perf_counter()
    strategy = _strategy(cfg)
    fits = {}
    if cfg.get("reference_change", "none") == "two_step":
        st2 = cfg.get("stage2", {})
        res = two_step_adapt(
            bench.loglike, prior, cfg["degree"], cfg["K"], cfg["q"], st2.get("K"), st2.get("degree"), strategy
        )
        e = res.expansion
        fits["stage1"] = _fit_block(res.stage1.fit)
        fits["stage2"] = _fit_block(e.fit)
    else:
        spec = BasisSpec.build(prior.families, cfg["degree"], cfg["q"])
        e = fit_sle(bench.loglike, prior, spec, make_design(prior, cfg["K"], strategy))
        fits["sle"] = _fit_block(e.fit)
    timings["fit"] = time.perf_counter() - t0
    s = summarize(e)
    summary = {
        "problem": bench.name,
        "config": {k: v for k, v in cfg.items() if k != "outputs"},
        "prior": prior.to_dict(),
        "posterior": _summary_block(s, bench),
        "fit": fits,
        "seeds": _seeds(cfg, bench),
    }
    (out / "coefficients.json").write_text(_dumps(e.to_dict()))
    if cfg.get("marginals", True):
        write_marginals(e, prior, out, clamp=clamp)
    if cfg.get("export_field", False):
        from .models.heat import field_to_csv, solve_heat

        problem = bench.extra["problem"]
        sol = solve_heat(problem, np.clip(s.means, 1e-12, None))
        (out / "temperature_field.csv").write_text(field_to_csv(problem, sol.field))
        summary["temperature_field_at"] = [_num(v, u) for v, u in zip(s.means, bench.param_units)]
    if "mcmc" in cfg:
        t1 = time.perf_counter()
        chain = _run_chain(cfg, bench)
        timings["mcmc"] = time.perf_counter() - t1
        (out / "chain.csv").write_text(chain.to_csv(list(bench.param_names)))
        summary["mcmc"] = _chain_block(chain, bench, cfg["mcmc"].get("burn_in", 0.1))
    summary["runtime_seconds"] = {k: _num(round(v, 6), "s") for k, v in timings.items()}
    (out / "summary.json").write_text(_dumps(summary))
    return summary


def _run_chain(cfg, bench):
    m = cfg["mcmc"]
    prop = m.get("proposal_std")
    if prop is not None and len(prop) != bench.M:
        raise ConfigError(f"field 'mcmc/proposal_std': expected {bench.M} entries, got {len(prop)}")
    return rwm_posterior(bench.loglike, bench.prior, m["T"], seed=m.get("seed", 0), proposal_std=prop)


def _chain_block(chain, bench, burn_in):
    mean, std = chain.mean(burn_in), chain.std(burn_in)
    return {
        "T": _count(chain.T),
        "burn_in_fraction": _num(burn_in, "1"),
        "acceptance_rate": _num(chain.acceptance_rate, "1"),
        "parameters": [
            {"name": n, "mean": _num(mean[j], u), "std": _num(std[j], u)}
            for j, (n, u) in enumerate(zip(bench.param_names, bench.param_units))
        ],
        "correlations": {"value": chain.corrcoef(burn_in).tolist(), "units": "1"},
        "proposal_std": [_num(v, u) for v, u in zip(chain.proposal_std, bench.param_units)],
    }


def cmd_mcmc(cfg):
    out = Path(cfg["outputs"])
    out.mkdir(parents=True, exist_ok=True)
    cfg.setdefault("mcmc", {"T": 100_000})
    bench = build_problem(cfg)
    t0 = time.perf_counter()
    chain = _run_chain(cfg, bench)
    elapsed = time.perf_counter() - t0
    (out / "chain.csv").write_text(chain.to_csv(list(bench.param_names)))
    summary = {
        "problem": bench.name,
        "mcmc": _chain_block(chain, bench, cfg["mcmc"].get("burn_in", 0.1)),
        "seeds": _seeds(cfg, bench),
        "runtime_seconds": {"mcmc": _num(round(elapsed, 6), "s")},
    }
    (out / "summary.json").write_text(_dumps(summary))
    return summary


def convergence_sweep(cfg, degrees, sizes):
    """Rows ``(K, p, eps_emp, eps_loo)`` for every pair of sizes and degrees."""
    if not degrees or not sizes:
        raise ValueError("degrees and sizes must be nonempty")
    bench = build_problem(cfg)
    prior = bench.prior
    strategy = _strategy(cfg)
    rows = []
    for K in sizes:
        design = make_design(prior, K, strategy)
        values = evaluate_loglike(bench.loglike, design.points_physical)
        for p in degrees:
            spec = BasisSpec.build(prior.families, p, cfg["q"])
            e = fit_log_target(values, prior, spec, design.points_standard)
            rows.append((K, p, e.fit.normalized_empirical, e.fit.normalized_loo))
    return rows


def cmd_sweep(cfg, degrees, sizes):
    out = Path(cfg["outputs"])
    out.mkdir(parents=True, exist_ok=True)
    rows = convergence_sweep(cfg, degrees, sizes)
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "p", "eps_emp", "eps_loo"])
        for K, p, emp, loo in rows:
            w.writerow([K, p, repr(float(emp)), repr(float(loo))])
    return rows


def cmd_export_marginals(coefficients, out, points, clamp):
    e = Expansion.from_json(Path(coefficients).read_text())
    prior = e.prior or e.reference
    Path(out).mkdir(parents=True, exist_ok=True)
    return write_marginals(e, prior, out, points, clamp)


def _int_list(text):
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="spectral-bayes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, problem=True):
        if problem:
            p.add_argument("problem", nargs="?", help="conjugate1d, normal2d, ihcp2d, ihcp6d or custom")
            p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--p", type=int, help="expansion degree")
        p.add_argument("--K", type=int, help="experimental design size")
        p.add_argument("--q", type=float, help="hyperbolic truncation quasi-norm in (0, 1]")
        p.add_argument("--seed", type=int, help="seed for pseudo-random designs and chains")
        p.add_argument("--out", help="output directory")

    run = sub.add_parser("run", help="fit an SLE (or two-step aSLE) and write a summary")
    common(run)
    run.add_argument("--strategy", choices=["sobol", "random"])
    run.add_argument("--reference-change", choices=["none", "two_step"])
    run.add_argument("--mcmc-T", type=int, help="also run a reference chain of this length")
    run.add_argument("--clamp-negative-density", action="store_true", help="clip marginal plot files at zero")
    run.add_argument("--export-field", action="store_true", help="IHCP only: temperature field at the posterior mean")

    sweep = sub.add_parser("sweep", help="normalized empirical and LOO errors over (K, p) pairs")
    common(sweep)
    sweep.add_argument("--degrees", type=_int_list, required=True)
    sweep.add_argument("--sizes", type=_int_list, required=True)
    sweep.add_argument("--strategy", choices=["sobol", "random"])

    mcmc = sub.add_parser("mcmc", help="random-walk Metropolis reference chain")
    common(mcmc)
    mcmc.add_argument("--T", type=int, dest="mcmc_T", help="chain length")

    exp = sub.add_parser("export-marginals", help="density grids from a coefficients.json file")
    exp.add_argument("coefficients")
    exp.add_argument("--out", default=".")
    exp.add_argument("--points", type=int, default=GRID_POINTS)
    exp.add_argument("--clamp-negative-density", action="store_true")
    return parser


def _provenance(exc):
    tb = traceback.extract_tb(exc.__traceback__)
    for frame in reversed(tb):
        mod = inspect.getmodulename(frame.filename)
        if "spectral_bayes" in frame.filename:
            return f"spectral_bayes.{mod}" if mod else "spectral_bayes"
    return "spectral_bayes.cli"


def _error_record(exc, kind):
    return {"status": "error", "kind": kind, "type": type(exc).__name__, "message": str(exc), "module": _provenance(exc)}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = os.environ.get(THREADS_ENV)
    limit = int(threads) if threads and threads.isdigit() and int(threads) > 0 else None
    out_dir = getattr(args, "out", None)
    try:
        with threadpool_limits(limits=limit):
            if args.command == "export-marginals":
                cmd_export_marginals(args.coefficients, args.out, args.points, args.clamp_negative_density)
                return 0
            cfg = load_config(args.config) if args.config else {}
            cfg = merge_config(cfg, args)
            out_dir = cfg["outputs"]
            if args.command == "run":
                cmd_run(cfg, clamp=args.clamp_negative_density)
            elif args.command == "sweep":
                cmd_sweep(cfg, args.degrees, args.sizes)
            elif args.command == "mcmc":
                cfg["mcmc"] = dict(cfg.get("mcmc", {"T": 100_000}))
                cmd_mcmc(cfg)
        return 0
    except ConfigError as exc:
        record, code = _error_record(exc, "config"), 2
    except Exception as exc:  # surfaced as a machine-readable record
        record, code = _error_record(exc, "runtime"), 1
    sys.stderr.write(json.dumps(record) + "\n")
    if out_dir:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / "error.json").write_text(_dumps(record))
        except OSError:
            pass
    return code


if __name__ == "__main__":
    sys.exit(main())
