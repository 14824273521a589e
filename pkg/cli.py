# ───────────────────────────────────────────────
# CLI.PY
# ───────────────────────────────────────────────
"""
Command handlers: gen, train, predict, cv, sweep, bench.

Every handler takes a validated RunConfig and returns a process exit code
(0 success, 1 input/parse error, 2 solver budget exhausted).
"""

import argparse
import hashlib
import itertools
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from svm01 import __version__
from svm01.data import (
    Dataset,
    Scaling,
    SyntheticSpec,
    apply_scaling,
    generate_synthetic,
    holdout_split,
    make_folds,
    read_libsvm,
    s_grid,
    scale_features,
    split,
    write_libsvm,
)
from svm01.errors import InputError, Svm01Error
from svm01.ipal import IpalConfig, OuterTermination, SolveReport, problem_from, solve
from svm01.model import build_problem, classification_metrics, predict, decision_values
from svm01.settings import DEFAULT_JOBS, DEFAULT_SEED, ZERO_TOL

logger = logging.getLogger("svm01.cli")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_BUDGET = 2

TRACE_COLUMNS = [
    "iter", "vfc", "dist_p", "dist_d", "dist_c", "lyapunov_eta", "lyapunov_mu",
    "inner_iters", "step_kinds", "nnz", "nsv", "wall_ms",
]

SWEEP_PRESETS: dict[str, list[float]] = {
    "rho": [10.0**e for e in range(-3, 4)],
    "mu": [0.01 * 2**e for e in range(11)],
    "s": [float(s) for s in range(20, 201, 20)],
}
LAMBDA_GRID_PRESET = [10.0**e for e in range(-5, 6)]

BENCH_DEFAULTS = {"m": 1000, "n": 1000, "r": 0.1}
BENCH_PRESETS: dict[str, list[float]] = {
    "n": [5000.0, 10000.0, 15000.0, 20000.0, 25000.0, 30000.0],
    "m": [5000.0, 10000.0, 15000.0, 20000.0, 25000.0, 30000.0],
    "r": [0.0, 0.05, 0.1, 0.15, 0.2],
}


# ───────────────────────────────────────────────
# CONFIG RECORDS
# ───────────────────────────────────────────────
class RunConfig(BaseModel):
    command: Literal["gen", "train", "predict", "cv", "sweep", "bench"]
    data: str | None = None
    out: str | None = None
    trace: str | None = None
    model: str | None = None
    predictions: str | None = None
    format: Literal["csv", "json"] = "csv"
    seed: int = DEFAULT_SEED
    jobs: int = Field(default=DEFAULT_JOBS, ge=1)
    timing: bool = True
    scale: bool = False

    solver: IpalConfig = Field(default_factory=IpalConfig)
    synthetic: SyntheticSpec | None = None

    # cv
    k: int = Field(default=5, ge=2)
    lambda_grid: list[float] | None = None
    mu_grid: list[float] | None = None
    s_grid: list[int] | None = None
    fraction_s_grid: bool = False
    tie_rho: bool = True

    # sweep
    sweep_param: Literal["rho", "mu", "s"] = "rho"
    sweep_values: list[float] | None = None

    # bench
    bench_vary: Literal["n", "m", "r"] = "n"
    bench_values: list[float] | None = None
    train_fraction: float = Field(default=0.5, gt=0, lt=1)


class ModelFile(BaseModel):
    w: list[float]  # last coordinate is the intercept
    n_features: int
    scaling_lo: list[float] | None = None
    scaling_hi: list[float] | None = None
    lam: float
    rho: float
    mu: float
    s: int
    sparsify_intercept: bool
    termination: str
    outer_iters: int
    nsv: int
    config_hash: str
    seed: int
    solver_version: str = __version__


def load_run_config(path: str | Path) -> RunConfig:
    return RunConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))


def save_run_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(cfg.model_dump_json(indent=2), encoding="utf-8")


def config_hash(cfg: IpalConfig, source: str) -> str:
    payload = cfg.model_dump_json() + "|" + source
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# ───────────────────────────────────────────────
# OUTPUT HELPERS
# ───────────────────────────────────────────────
def write_table(df: pd.DataFrame, path: str | Path | None, fmt: str) -> None:
    if path is None:
        print(df.to_string(index=False))
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        df.to_json(path, orient="records", indent=2, double_precision=15)
    else:
        df.to_csv(path, index=False, float_format="%.15g")


def trace_frame(report: SolveReport, timing: bool = True) -> pd.DataFrame:
    rows = [
        {
            "iter": e.k,
            "vfc": e.vfc.vfc,
            "dist_p": e.vfc.dist_p,
            "dist_d": e.vfc.dist_d,
            "dist_c": e.vfc.dist_c,
            "lyapunov_eta": e.lyapunov,
            "lyapunov_mu": e.lyapunov_mu,
            "inner_iters": e.inner_iters,
            "step_kinds": e.step_kinds,
            "nnz": e.nnz,
            "nsv": e.nsv,
            "wall_ms": 1000.0 * e.wall_time if timing else 0.0,
        }
        for e in report.trace
    ]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def _suffix(fmt: str) -> str:
    return ".json" if fmt == "json" else ".csv"


def _require(value: Any, flag: str) -> Any:
    if value is None:
        raise InputError(f"{flag} is required")
    return value


def _load_dataset(cfg: RunConfig) -> Dataset:
    ds = read_libsvm(_require(cfg.data, "--data"))
    return scale_features(ds) if cfg.scale else ds


def _run_pool(fn: Callable[[dict], dict], tasks: list[dict], jobs: int) -> list[dict]:
    """Run tasks serially or in a process pool; results come back in task order."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# ───────────────────────────────────────────────
# WORKERS (module level so process pools can pickle them)
# ───────────────────────────────────────────────
def _train_and_score(task: dict) -> dict:
    solver = IpalConfig.model_validate(task["solver"])
    train_X, train_y = task["train_X"], task["train_y"]
    test_X, test_y = task["test_X"], task["test_y"]

    if task.get("scale"):
        train = scale_features(Dataset(train_X, train_y))
        test = apply_scaling(Dataset(test_X, test_y), train.scaling)
        train_X, test_X = train.features, test.features

    P = problem_from(train_X, train_y, solver)
    started = time.monotonic()
    state, report = solve(P, solver)
    elapsed = time.monotonic() - started

    test_P = build_problem(test_X, test_y, P.lam, P.rho, P.mu, P.s, P.sparsify_intercept)
    acc, acc_sign, nnz = classification_metrics(test_P.A, test_y, state.w, ZERO_TOL)
    row = {
        "acc": acc,
        "acc_sign": acc_sign,
        "time": elapsed if task.get("timing", True) else 0.0,
        "nsv": int(np.count_nonzero(np.abs(state.z) > ZERO_TOL)),
        "nnz": nnz,
        "termination": report.termination.value,
    }
    clean_y = task.get("test_clean_y")
    if clean_y is not None:
        row["acc_clean"] = float(np.mean(predict(state.w, test_X) == clean_y))
    return row


def _train_with_trace(task: dict) -> dict:
    solver = IpalConfig.model_validate(task["solver"])
    P = problem_from(task["X"], task["y"], solver)
    _, report = solve(P, solver)
    return {"report": report}


# ───────────────────────────────────────────────
# COMMANDS
# ───────────────────────────────────────────────
def cmd_gen(cfg: RunConfig) -> int:
    spec = _require(cfg.synthetic, "--m/--n")
    out = _require(cfg.out, "--out")
    ds = generate_synthetic(spec)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_libsvm(ds, out)
    logger.info("[CLI][GEN] wrote %d samples to %s", ds.m, out)
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    ds = _load_dataset(cfg)
    P = problem_from(ds.features, ds.labels, cfg.solver)
    state, report = solve(P, cfg.solver)

    out = Path(cfg.out or "model.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    model = ModelFile(
        w=state.w.tolist(),
        n_features=ds.n_features,
        scaling_lo=ds.scaling.lo.tolist() if ds.scaling is not None else None,
        scaling_hi=ds.scaling.hi.tolist() if ds.scaling is not None else None,
        lam=P.lam,
        rho=P.rho,
        mu=P.mu,
        s=P.s,
        sparsify_intercept=P.sparsify_intercept,
        termination=report.termination.value,
        outer_iters=report.outer_iters,
        nsv=int(np.count_nonzero(np.abs(state.z) > ZERO_TOL)),
        config_hash=config_hash(cfg.solver, ds.source),
        seed=cfg.seed,
    )
    out.write_text(model.model_dump_json(indent=2), encoding="utf-8")

    trace_path = cfg.trace or str(out.with_suffix("")) + ".trace" + _suffix(cfg.format)
    write_table(trace_frame(report, cfg.timing), trace_path, cfg.format)

    logger.info(
        "[CLI][TRAIN] termination=%s outer=%d model=%s trace=%s",
        report.termination.value, report.outer_iters, out, trace_path,
    )
    if report.termination is OuterTermination.MAX_OUTER_REACHED:
        return EXIT_BUDGET
    return EXIT_OK


def cmd_predict(cfg: RunConfig) -> int:
    model = ModelFile.model_validate_json(Path(_require(cfg.model, "--model")).read_text(encoding="utf-8"))
    ds = read_libsvm(_require(cfg.data, "--data"), n_features=model.n_features)

    if model.scaling_lo is not None and model.scaling_hi is not None:
        ds = apply_scaling(ds, Scaling(np.asarray(model.scaling_lo), np.asarray(model.scaling_hi)))
    else:
        logger.warning("[CLI][PREDICT] model has no scaling record; using raw features")

    w = np.asarray(model.w)
    P = build_problem(ds.features, ds.labels, model.lam, model.rho, model.mu, model.s, model.sparsify_intercept)
    acc, acc_sign, nnz = classification_metrics(P.A, ds.labels, w, ZERO_TOL)
    report = pd.DataFrame([{"acc": acc, "acc_sign": acc_sign, "nnz": nnz, "nsv": model.nsv, "m": ds.m}])
    write_table(report, cfg.out, cfg.format)

    if cfg.predictions:
        preds = pd.DataFrame({
            "label": predict(w, ds.features).astype(np.int64),
            "decision": decision_values(w, ds.features),
        })
        write_table(preds, cfg.predictions, cfg.format)

    logger.info("[CLI][PREDICT] m=%d acc=%.4f acc_sign=%.4f", ds.m, acc, acc_sign)
    return EXIT_OK


def _cv_grid(cfg: RunConfig, p: int) -> list[dict]:
    lambdas = cfg.lambda_grid or [cfg.solver.lam]
    mus = cfg.mu_grid or [cfg.solver.mu]
    if cfg.fraction_s_grid:
        sizes = s_grid(p)
    else:
        sizes = cfg.s_grid or [cfg.solver.s]
    return [
        {"lam": lam, "rho": lam if cfg.tie_rho else cfg.solver.rho, "mu": mu, "s": int(s)}
        for lam, mu, s in itertools.product(lambdas, mus, sizes)
    ]


def cmd_cv(cfg: RunConfig) -> int:
    ds = read_libsvm(_require(cfg.data, "--data"))
    plan = make_folds(ds.m, cfg.k, cfg.seed)
    grid = _cv_grid(cfg, ds.n_features)

    tasks = []
    for g, point in enumerate(grid):
        solver = cfg.solver.model_copy(update=point).model_dump()
        for fold in range(plan.k):
            train, test = split(ds, plan, fold)
            tasks.append({
                "grid": g, "fold": fold, "solver": solver, "scale": cfg.scale, "timing": cfg.timing,
                "train_X": train.features, "train_y": train.labels,
                "test_X": test.features, "test_y": test.labels,
            })

    logger.info("[CLI][CV] grid=%d folds=%d jobs=%d", len(grid), plan.k, cfg.jobs)
    rows = _run_pool(_train_and_score, tasks, cfg.jobs)
    for task, row in zip(tasks, rows):
        row.update(grid[task["grid"]], grid_index=task["grid"], fold=task["fold"])

    per_fold = pd.DataFrame(rows)
    table = (
        per_fold.groupby("grid_index", sort=True)
        .agg(lam=("lam", "first"), rho=("rho", "first"), mu=("mu", "first"), s=("s", "first"),
             acc=("acc", "mean"), acc_sign=("acc_sign", "mean"), time=("time", "mean"),
             nsv=("nsv", "mean"), nnz=("nnz", "mean"))
        .reset_index(drop=True)
    )
    write_table(table, cfg.out, cfg.format)
    return EXIT_OK


def _sweep_solver(cfg: RunConfig, value: float) -> IpalConfig:
    if cfg.sweep_param == "rho":
        update = {"rho": value, "lam": value}
    elif cfg.sweep_param == "mu":
        update = {"mu": value}
    else:
        update = {"s": int(value)}
    return IpalConfig.model_validate({**cfg.solver.model_dump(), **update})


def cmd_sweep(cfg: RunConfig) -> int:
    ds = _load_dataset(cfg)
    values = cfg.sweep_values or SWEEP_PRESETS[cfg.sweep_param]
    out_dir = Path(cfg.out or "sweep")
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = [
        {"solver": _sweep_solver(cfg, v).model_dump(), "X": ds.features, "y": ds.labels}
        for v in values
    ]
    results = _run_pool(_train_with_trace, tasks, cfg.jobs)

    summary = []
    for value, result in zip(values, results):
        report: SolveReport = result["report"]
        label = f"{cfg.sweep_param}_{value:g}"
        write_table(trace_frame(report, cfg.timing), out_dir / f"trace_{label}{_suffix(cfg.format)}", cfg.format)
        final_vfc = report.trace[-1].vfc.vfc if report.trace else float("nan")
        summary.append({
            "param": cfg.sweep_param,
            "value": value,
            "iters": report.outer_iters,
            "final_vfc": final_vfc,
            "total_time": report.total_time if cfg.timing else 0.0,
            "termination": report.termination.value,
        })
        logger.info("[CLI][SWEEP] %s iters=%d vfc=%.3e", label, report.outer_iters, final_vfc)

    write_table(pd.DataFrame(summary), out_dir / f"summary{_suffix(cfg.format)}", cfg.format)
    return EXIT_OK


def cmd_bench(cfg: RunConfig) -> int:
    base = cfg.synthetic or SyntheticSpec(
        m=BENCH_DEFAULTS["m"], n=BENCH_DEFAULTS["n"], noise_ratio=BENCH_DEFAULTS["r"], seed=cfg.seed,
    )
    values = cfg.bench_values or BENCH_PRESETS[cfg.bench_vary]
    field = {"n": "n", "m": "m", "r": "noise_ratio"}[cfg.bench_vary]

    tasks = []
    for v in values:
        spec = SyntheticSpec.model_validate({**base.model_dump(), field: v if field == "noise_ratio" else int(v)})
        ds = generate_synthetic(spec)
        train, test = holdout_split(ds, cfg.train_fraction, cfg.seed)
        if cfg.solver.s > ds.n_features + 1:
            raise InputError(f"s={cfg.solver.s} exceeds d={ds.n_features + 1} at {cfg.bench_vary}={v:g}")
        tasks.append({
            "solver": cfg.solver.model_dump(), "scale": cfg.scale, "timing": cfg.timing,
            "train_X": train.features, "train_y": train.labels,
            "test_X": test.features, "test_y": test.labels, "test_clean_y": test.clean_labels,
        })

    rows = _run_pool(_train_and_score, tasks, cfg.jobs)
    table = pd.DataFrame([{cfg.bench_vary: v, **row} for v, row in zip(values, rows)])
    write_table(table, cfg.out, cfg.format)
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "gen": cmd_gen,
    "train": cmd_train,
    "predict": cmd_predict,
    "cv": cmd_cv,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
}


# ───────────────────────────────────────────────
# ARGUMENT PARSING
# ───────────────────────────────────────────────
def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON RunConfig supplying defaults")
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--no-timing", dest="timing", action="store_const", const=False,
                   help="write zero wall-clock columns (byte-identical reruns)")


def _add_solver(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model / solver")
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--rho", type=float)
    g.add_argument("--mu", type=float)
    g.add_argument("--s", type=int)
    g.add_argument("--keep-intercept", dest="sparsify_intercept", action="store_const", const=False,
                   help="exempt the intercept from the sparsity constraint")
    g.add_argument("--c1", type=float)
    g.add_argument("--c2", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--stop-tol", type=float)
    g.add_argument("--max-outer", type=int)
    g.add_argument("--max-inner", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--sigma-g", type=float)
    g.add_argument("--newton-path", choices=["schur", "woodbury"])


def _add_synthetic(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic data")
    g.add_argument("--m", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--r", type=float, help="noise ratio in [0, 1)")
    g.add_argument("--mu1", type=float)
    g.add_argument("--mu2", type=float)
    g.add_argument("--sigma1", type=float)
    g.add_argument("--sigma2", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svm01", description="Sparse 0/1-loss SVM via inexact proximal ALM")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a synthetic two-Gaussian dataset")
    _add_common(gen)
    _add_synthetic(gen)

    train = sub.add_parser("train", help="train a model and write its trace")
    _add_common(train)
    _add_solver(train)
    train.add_argument("--data")
    train.add_argument("--scale", action="store_const", const=True)
    train.add_argument("--trace")

    pred = sub.add_parser("predict", help="score a model on a dataset")
    _add_common(pred)
    pred.add_argument("--model")
    pred.add_argument("--data")
    pred.add_argument("--predictions")

    cv = sub.add_parser("cv", help="k-fold cross-validation over a parameter grid")
    _add_common(cv)
    _add_solver(cv)
    cv.add_argument("--data")
    cv.add_argument("--scale", action="store_const", const=True)
    cv.add_argument("--k", type=int)
    cv.add_argument("--lambda-grid", type=_floats)
    cv.add_argument("--wide-lambda-grid", action="store_true")
    cv.add_argument("--mu-grid", type=_floats)
    cv.add_argument("--s-grid", type=_ints)
    cv.add_argument("--fraction-s-grid", action="store_const", const=True)
    cv.add_argument("--no-tie-rho", dest="tie_rho", action="store_const", const=False)

    sweep = sub.add_parser("sweep", help="convergence traces over rho, mu or s")
    _add_common(sweep)
    _add_solver(sweep)
    sweep.add_argument("--data")
    sweep.add_argument("--scale", action="store_const", const=True)
    sweep.add_argument("--param", dest="sweep_param", choices=["rho", "mu", "s"])
    sweep.add_argument("--values", dest="sweep_values", type=_floats)

    bench = sub.add_parser("bench", help="holdout comparison on synthetic data")
    _add_common(bench)
    _add_solver(bench)
    _add_synthetic(bench)
    bench.add_argument("--scale", action="store_const", const=True)
    bench.add_argument("--vary", dest="bench_vary", choices=["n", "m", "r"])
    bench.add_argument("--values", dest="bench_values", type=_floats)
    bench.add_argument("--train-fraction", type=float)
    return parser


SOLVER_FLAGS = ("lam", "rho", "mu", "s", "sparsify_intercept", "c1", "c2", "gamma", "stop_tol", "max_outer")
PGN_FLAGS = {"max_inner": "max_iters", "alpha": "alpha", "beta": "beta", "sigma_g": "sigma_g", "newton_path": "newton_path"}
SYNTHETIC_FLAGS = {"m": "m", "n": "n", "r": "noise_ratio", "mu1": "mu1", "mu2": "mu2", "sigma1": "sigma1", "sigma2": "sigma2"}
RUN_FLAGS = (
    "data", "out", "trace", "model", "predictions", "format", "seed", "jobs", "timing", "scale",
    "k", "lambda_grid", "mu_grid", "s_grid", "fraction_s_grid", "tie_rho",
    "sweep_param", "sweep_values", "bench_vary", "bench_values", "train_fraction",
)


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    """Config file first, explicit flags on top; the merged record is validated once."""
    base = load_run_config(args.config) if getattr(args, "config", None) else RunConfig(command=args.command)
    merged = base.model_dump()
    merged["command"] = args.command

    for name in RUN_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value

    for name in SOLVER_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            merged["solver"][name] = value
    for flag, name in PGN_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            merged["solver"]["pgn"][name] = value

    if getattr(args, "wide_lambda_grid", False):
        merged["lambda_grid"] = LAMBDA_GRID_PRESET

    synthetic = {name: getattr(args, flag) for flag, name in SYNTHETIC_FLAGS.items() if getattr(args, flag, None) is not None}
    if synthetic or (merged.get("synthetic") and getattr(args, "seed", None) is not None):
        spec = dict(merged.get("synthetic") or {})
        spec.update(synthetic)
        spec.setdefault("seed", merged["seed"])
        if args.command == "bench":
            spec.setdefault("m", BENCH_DEFAULTS["m"])
            spec.setdefault("n", BENCH_DEFAULTS["n"])
            spec.setdefault("noise_ratio", BENCH_DEFAULTS["r"])
        if getattr(args, "seed", None) is not None:
            spec["seed"] = args.seed
        merged["synthetic"] = spec

    return RunConfig.model_validate(merged)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = run_config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except (InputError, ValidationError, ValueError, OSError) as exc:
        logger.error("[CLI][%s] %s", args.command.upper(), exc)
        return EXIT_INPUT
    except Svm01Error as exc:
        logger.error("[CLI][%s] solver failed: %s: %s", args.command.upper(), type(exc).__name__, exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
