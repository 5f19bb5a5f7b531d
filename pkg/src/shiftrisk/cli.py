"""Command-line front end.

Four commands over CSV data:

* ``estimate``   — target-population risk of a prediction model, with
  bootstrap or sandwich uncertainty, written as a flat ``key=value``
  report;
* ``simulate``   — the Monte Carlo benchmark, written as a summary CSV
  (optionally with a raw per-replicate CSV);
* ``split-eval`` — the repeated source/target split experiment on a
  fully labeled dataset, written as a summary CSV;
* ``model-fit``  — fit a main-effects logistic prediction model and
  serialize it to a plain-text model file.

Every output embeds a schema version and the fully resolved
configuration, floats are serialized with ``repr`` (round-trip exact),
and no timestamps or environment state are recorded, so a run is a pure
function of its input files, flags, and seed. Exit codes are stable:
0 success, 1 usage/configuration error, 2 data validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from .core import (
    ABSOLUTE,
    Dataset,
    SQUARED,
    Violation,
    expit,
    read_dataset_csv,
)
from .errors import (
    BootstrapError,
    DataValidationError,
    FitError,
    InvalidArgumentError,
    NuisanceMissingError,
    OracleUnavailableError,
    PositivityError,
    ReplicationError,
    SchemaError,
    ShiftRiskError,
)
from .estimators import (
    BOOTSTRAP,
    CL,
    DR,
    ESTIMATORS,
    IW,
    NAIVE,
    ORACLE,
    SANDWICH,
    estimate_risk,
    needs_nuisance,
)
from .inference import CI_METHODS, CLUSTER, PERCENTILE, RESAMPLE_UNITS, ROW
from .nuisance import (
    BINARY,
    DEFAULT_EPSILON,
    DesignInfo,
    DIRECT,
    FEATURE_MAPS,
    LINEAR,
    NuisanceConfig,
    RIDGE_AUTO,
    SPLINE,
    build_design,
    fit_prediction_model,
)
from .simulation import (
    ARMS,
    ScenarioSpec,
    SPLIT_MODES,
    UNIFORM,
    run_split_eval,
    run_table_s1,
)

SCHEMA_VERSION = 1
REPORT_KINDS = (
    "estimate-report",
    "simulate-summary",
    "simulate-replicates",
    "split-eval-summary",
    "model",
)

LOSS_BY_CLI = {"brier": SQUARED, "absolute": ABSOLUTE}
LOSS_CHOICES = tuple(LOSS_BY_CLI)
METHOD_ORDER = (NAIVE, CL, IW, DR, ORACLE)


# ---------------------------------------------------------------------------
# Serialization helpers


def _fmt(value) -> str:
    """Deterministic text form; floats round-trip exactly via repr."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _pairs_text(pairs) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in pairs)


def _csv_text(meta_pairs, fieldnames, rows) -> str:
    buf = io.StringIO()
    for k, v in meta_pairs:
        buf.write(f"# {k}={_fmt(v)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fieldnames)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, out_path: str | None) -> None:
    sys.stdout.write(text)
    if out_path:
        Path(out_path).write_text(text)


def read_report(path) -> dict[str, str]:
    """Load and re-validate a ``key=value`` report (or model) file."""
    out: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SchemaError(f"{path}: malformed report line {raw!r}")
        key, value = line.split("=", 1)
        if key in out:
            raise SchemaError(f"{path}: duplicate key {key!r}")
        out[key] = value
    if out.get("schema_version") != str(SCHEMA_VERSION):
        raise SchemaError(f"{path}: missing or unsupported schema_version")
    if out.get("kind") not in REPORT_KINDS:
        raise SchemaError(f"{path}: unknown report kind {out.get('kind')!r}")
    for key, value in out.items():
        if key.endswith((".estimate", ".std_error", ".ci_lower", ".ci_upper")):
            try:
                float(value)
            except ValueError:
                raise SchemaError(f"{path}: key {key!r} is not numeric") from None
    return out


def read_csv_report(path):
    """Load and re-validate a CSV report: ``(meta, rows)``."""
    meta: dict[str, str] = {}
    data_lines: list[str] = []
    for raw in Path(path).read_text().splitlines():
        if raw.startswith("#"):
            body = raw.lstrip("#").strip()
            if "=" in body:
                key, value = body.split("=", 1)
                meta[key] = value
        elif raw.strip():
            data_lines.append(raw)
    if meta.get("schema_version") != str(SCHEMA_VERSION):
        raise SchemaError(f"{path}: missing or unsupported schema_version")
    if meta.get("kind") not in REPORT_KINDS:
        raise SchemaError(f"{path}: unknown report kind {meta.get('kind')!r}")
    if not data_lines:
        raise SchemaError(f"{path}: no table rows")
    rows = list(csv.DictReader(io.StringIO("\n".join(data_lines) + "\n")))
    return meta, rows


# ---------------------------------------------------------------------------
# Model files


def model_file_text(names, beta, feature_map: str = LINEAR) -> str:
    """Plain-text model serialization: header plus ``name=coefficient``
    lines, intercept first."""
    beta = np.asarray(beta, dtype=float)
    if beta.size != len(names) + 1:
        raise InvalidArgumentError("beta must hold the intercept plus one coefficient per column")
    pairs = [
        ("schema_version", SCHEMA_VERSION),
        ("kind", "model"),
        ("feature_map", feature_map),
        ("intercept", beta[0]),
    ]
    pairs += [(nm, b) for nm, b in zip(names, beta[1:])]
    return _pairs_text(pairs)


def load_model_file(path):
    """Parse a model file into ``(feature_map, column_names, beta)``."""
    entries = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SchemaError(f"{path}: malformed model line {raw!r}")
        key, value = line.split("=", 1)
        entries.append((key.strip(), value.strip()))
    header = dict(entries[:3])
    if header.get("schema_version") != str(SCHEMA_VERSION):
        raise SchemaError(f"{path}: missing or unsupported schema_version")
    if header.get("kind") != "model":
        raise SchemaError(f"{path}: not a model file")
    feature_map = header.get("feature_map")
    if feature_map != LINEAR:
        raise SchemaError(
            f"{path}: unsupported feature map {feature_map!r} (model files are main-effects only)"
        )
    coef = entries[3:]
    if not coef or coef[0][0] != "intercept":
        raise SchemaError(f"{path}: first coefficient must be 'intercept'")
    names = [k for k, _ in coef[1:]]
    try:
        beta = np.asarray([float(v) for _, v in coef], dtype=float)
    except ValueError:
        raise SchemaError(f"{path}: non-numeric coefficient value") from None
    return feature_map, names, beta


def _predict_from_model(path, dataset: Dataset, covariates) -> np.ndarray:
    _, names, beta = load_model_file(path)
    idx = []
    for nm in names:
        if nm not in covariates:
            raise SchemaError(f"{path}: model column {nm!r} not found in the data")
        idx.append(covariates.index(nm))
    x = dataset.x[:, idx] if idx else np.empty((dataset.n, 0))
    info = DesignInfo(kind=LINEAR, n_covariates=len(idx))
    return expit(build_design(info, x) @ beta)


# ---------------------------------------------------------------------------
# Input resolution


def _csv_columns(path) -> list[str]:
    with open(path, newline="") as fh:
        row = next(csv.reader(fh), None)
    return [] if row is None else [c.strip().upper() for c in row]


def _resolve_predictions(loaded, args) -> tuple[Dataset, np.ndarray, list[str]]:
    """Model predictions for every row: from a model file, a named
    prediction column, or the reserved ``GHAT`` column."""
    dataset, covariates = loaded.dataset, list(loaded.covariates)
    if args.model and args.ghat_col:
        raise InvalidArgumentError("provide either --model or --ghat-col, not both")
    if args.model:
        return dataset, _predict_from_model(args.model, dataset, covariates), covariates
    if args.ghat_col:
        name = args.ghat_col
        if name.upper() == "GHAT":
            if loaded.ghat is None:
                raise SchemaError(f"{args.data}: no GHAT column")
            return dataset, loaded.ghat, covariates
        if name not in covariates:
            raise SchemaError(f"{args.data}: prediction column {name!r} not found")
        j = covariates.index(name)
        g = dataset.x[:, j].copy()
        dataset = Dataset(
            x=np.delete(dataset.x, j, axis=1),
            d=dataset.d,
            y=dataset.y,
            w=dataset.w,
            cluster=dataset.cluster,
            stratum=dataset.stratum,
        )
        covariates.pop(j)
        return dataset, g, covariates
    if loaded.ghat is not None:
        return dataset, loaded.ghat, covariates
    raise InvalidArgumentError(
        "predictions required: pass --model or --ghat-col, or include a GHAT column"
    )


def _resolve_ridge(value, feature_map):
    if value is not None:
        return value
    return RIDGE_AUTO if feature_map == SPLINE else 0.0


def _nuisance_config(args, survey: bool) -> NuisanceConfig:
    return NuisanceConfig(
        p_map=args.p_map,
        h_map=args.h_map,
        h_strategy=args.h_strategy,
        folds=args.folds,
        epsilon=args.epsilon,
        ridge_p=_resolve_ridge(args.ridge_p, args.p_map),
        ridge_h=_resolve_ridge(args.ridge_h, args.h_map),
        survey=survey,
    )


def _nuisance_config_pairs(config: NuisanceConfig):
    return [
        ("p_map", config.p_map),
        ("h_map", config.h_map),
        ("h_strategy", config.h_strategy),
        ("folds", config.folds),
        ("epsilon", config.epsilon),
        ("ridge_p", config.ridge_p),
        ("ridge_h", config.ridge_h),
    ]


# ---------------------------------------------------------------------------
# estimate


def _select_methods(selection: str, dataset: Dataset) -> tuple[str, ...]:
    if selection != "all":
        return (selection,)
    methods = [NAIVE, CL, IW, DR]
    target_y = dataset.y[dataset.target_mask]
    if target_y.size and np.all(np.isfinite(target_y)):
        methods.append(ORACLE)
    return tuple(methods)


def cmd_estimate(args) -> int:
    loaded = read_dataset_csv(args.data)
    if args.survey and "W" not in _csv_columns(args.data):
        raise InvalidArgumentError("--survey requires a W column in the data file")
    dataset, g_pred, _ = _resolve_predictions(loaded, args)
    if args.boot_unit == CLUSTER and dataset.cluster is None:
        raise InvalidArgumentError("--boot-unit cluster requires a CLUSTER column")
    config = _nuisance_config(args, args.survey)
    methods = _select_methods(args.estimator, dataset)
    if args.se == "sandwich":
        if methods != (DR,):
            raise InvalidArgumentError("--se sandwich applies to --estimator dr only")
        se_method = SANDWICH
    else:
        se_method = BOOTSTRAP if args.boot > 0 else None

    reports = [
        estimate_risk(
            dataset,
            g_pred,
            loss=LOSS_BY_CLI[args.loss],
            estimator=m,
            config=config,
            seed=args.seed,
            se_method=se_method,
            boot_replicates=args.boot,
            boot_unit=args.boot_unit,
            ci_method=args.ci,
            boot_refit=(args.boot_refit == "on"),
            threads=args.threads,
        )
        for m in methods
    ]

    pairs = [
        ("schema_version", SCHEMA_VERSION),
        ("kind", "estimate-report"),
        ("command", "estimate"),
        ("data", args.data),
        ("model", args.model or ""),
        ("ghat_col", args.ghat_col or ""),
        ("loss", args.loss),
        ("estimator", args.estimator),
        *_nuisance_config_pairs(config),
        ("survey", args.survey),
        ("se", args.se),
        ("boot", args.boot),
        ("boot_unit", args.boot_unit),
        ("ci", args.ci),
        ("boot_refit", args.boot_refit),
        ("seed", args.seed),
        ("threads", args.threads),
        ("n", dataset.n),
        ("n0", dataset.n_target),
        ("n1", dataset.n_source),
    ]
    for rep in reports:
        m = rep.method
        pairs.append((f"{m}.estimate", rep.estimate))
        if rep.std_error is not None:
            pairs += [
                (f"{m}.std_error", rep.std_error),
                (f"{m}.ci_lower", rep.ci_lower),
                (f"{m}.ci_upper", rep.ci_upper),
                (f"{m}.se_method", rep.se_method),
                (f"{m}.ci_method", rep.ci_method),
            ]
            if rep.se_method == BOOTSTRAP:
                pairs.append((f"{m}.boot_failures", rep.boot_failures))
        need_p, need_h = needs_nuisance(m)
        if need_p:
            pairs += [
                (f"{m}.truncation_count", rep.truncation_count),
                (f"{m}.p_converged", rep.p_converged),
            ]
        if need_h:
            pairs.append((f"{m}.h_converged", rep.h_converged))
    _emit(_pairs_text(pairs), args.out)
    return 0


# ---------------------------------------------------------------------------
# simulate

_SCENARIO_INT = {"n_total", "dim", "n_active", "replications", "seed", "n_truth"}
_SCENARIO_FLOAT = {"rho", "intercept", "linear_coef", "quad_coef", "train_fraction"}
_SCENARIO_STR = {"loss"}


def read_scenario_file(path) -> dict:
    """Parse ``key=value`` scenario overrides for the benchmark spec."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"{path}: malformed scenario line {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _SCENARIO_INT | _SCENARIO_FLOAT | _SCENARIO_STR:
            raise InvalidArgumentError(f"{path}: unknown scenario key {key!r}")
        try:
            if key in _SCENARIO_INT:
                values[key] = int(value)
            elif key in _SCENARIO_FLOAT:
                values[key] = float(value)
            else:
                values[key] = value
        except ValueError:
            raise InvalidArgumentError(f"{path}: bad value for {key!r}: {value!r}") from None
    return values


def _build_scenario(args) -> ScenarioSpec:
    values = read_scenario_file(args.scenario) if args.scenario else {}
    if args.reps is not None:
        values["replications"] = args.reps
    if args.n_total is not None:
        values["n_total"] = args.n_total
    if args.n_truth is not None:
        values["n_truth"] = args.n_truth
    if args.seed is not None:
        values["seed"] = args.seed
    return ScenarioSpec(**values)


def _arm_cli_name(key: str) -> str:
    return key.replace("_", "-")


def _parse_arms(text: str | None) -> tuple[str, ...] | None:
    if text is None:
        return None
    keys = []
    for token in text.split(","):
        key = token.strip().replace("-", "_")
        if key not in ARMS:
            raise InvalidArgumentError(
                f"unknown arm {token.strip()!r}; expected one of "
                + ", ".join(_arm_cli_name(a) for a in ARMS)
            )
        keys.append(key)
    if not keys:
        raise InvalidArgumentError("--arms must name at least one arm")
    return tuple(keys)


def _scenario_pairs(spec: ScenarioSpec):
    return [
        ("n_total", spec.n_total),
        ("dim", spec.dim),
        ("rho", spec.rho),
        ("intercept", spec.intercept),
        ("linear_coef", spec.linear_coef),
        ("quad_coef", spec.quad_coef),
        ("n_active", spec.n_active),
        ("train_fraction", spec.train_fraction),
        ("loss", spec.loss),
        ("replications", spec.replications),
        ("seed", spec.seed),
        ("n_truth", spec.n_truth),
    ]


def cmd_simulate(args) -> int:
    spec = _build_scenario(args)
    arm_keys = _parse_arms(args.arms)
    result = run_table_s1(spec, arms=arm_keys, threads=args.threads)
    summary = result.summarize()
    meta = [
        ("schema_version", SCHEMA_VERSION),
        ("kind", "simulate-summary"),
        ("command", "simulate"),
        *_scenario_pairs(spec),
        ("arms", ",".join(_arm_cli_name(a) for a in result.arms)),
        ("truth", summary.truth),
        ("n_eval_mean", summary.n_eval_mean),
        ("failed_replicates", len(result.failures)),
        ("truncated_probabilities", result.truncated),
    ]
    fieldnames = ["arm", "label", "avg_estimate", "sqrt_n_bias", "sqrt_n_sd", "rel_bias_pct"]
    rows = [
        (_arm_cli_name(r.arm), r.label, r.avg_estimate, r.sqrt_n_bias, r.sqrt_n_sd, r.rel_bias_pct)
        for r in summary.rows
    ]
    _emit(_csv_text(meta, fieldnames, rows), args.out)
    if args.raw_out:
        raw_meta = [
            ("schema_version", SCHEMA_VERSION),
            ("kind", "simulate-replicates"),
            ("command", "simulate"),
            *_scenario_pairs(spec),
            ("arms", ",".join(_arm_cli_name(a) for a in result.arms)),
        ]
        se_arms = sorted(result.sandwich_se)
        raw_fields = (
            ["replicate", "n_eval", "truth"]
            + [_arm_cli_name(a) for a in result.arms]
            + [f"{_arm_cli_name(a)}-sandwich-se" for a in se_arms]
        )
        raw_rows = [
            [r, result.n_eval[r], result.truths[r]]
            + [result.estimates[a][r] for a in result.arms]
            + [result.sandwich_se[a][r] for a in se_arms]
            for r in range(spec.replications)
        ]
        Path(args.raw_out).write_text(_csv_text(raw_meta, raw_fields, raw_rows))
    return 0


# ---------------------------------------------------------------------------
# split-eval


def cmd_split_eval(args) -> int:
    loaded = read_dataset_csv(args.data)
    dataset, g_pred, _ = _resolve_predictions(loaded, args)
    config = _nuisance_config(args, survey=False)
    result = run_split_eval(
        dataset,
        g_pred,
        mode=args.mode,
        m=args.m,
        n_splits=args.splits,
        seed=args.seed,
        loss=LOSS_BY_CLI[args.loss],
        config=config,
        boot_replicates=args.boot,
        boot_unit=args.boot_unit,
        threads=args.threads,
    )
    meta = [
        ("schema_version", SCHEMA_VERSION),
        ("kind", "split-eval-summary"),
        ("command", "split-eval"),
        ("data", args.data),
        ("model", args.model or ""),
        ("ghat_col", args.ghat_col or ""),
        ("loss", args.loss),
        ("mode", args.mode),
        ("m", args.m),
        ("splits", args.splits),
        *_nuisance_config_pairs(config),
        ("boot", args.boot),
        ("boot_unit", args.boot_unit),
        ("seed", args.seed),
        ("threads", args.threads),
        ("n", dataset.n),
        ("failed_splits", len(result.failures)),
    ]
    fieldnames = ["estimator", "mean", "sd", "bias_vs_oracle", "mc_se", "avg_boot_se"]
    rows = [
        (r.estimator, r.mean, r.sd, r.bias_vs_oracle, r.mc_se, r.avg_boot_se)
        for r in result.summarize()
    ]
    _emit(_csv_text(meta, fieldnames, rows), args.out)
    return 0


# ---------------------------------------------------------------------------
# model-fit


def cmd_model_fit(args) -> int:
    loaded = read_dataset_csv(args.data)
    dataset, covariates = loaded.dataset, loaded.covariates
    labeled = np.isfinite(dataset.y)
    if not np.any(labeled):
        raise DataValidationError([Violation("y", "no labeled rows to fit on")])
    if args.columns is None:
        names = list(covariates)
    else:
        text = args.columns.strip()
        names = [] if text in ("", "none") else [c.strip() for c in text.split(",")]
        for nm in names:
            if nm not in covariates:
                raise SchemaError(f"{args.data}: column {nm!r} not found")
    idx = [covariates.index(nm) for nm in names]
    x = dataset.x[labeled][:, idx] if idx else np.empty((int(labeled.sum()), 0))
    model = fit_prediction_model(
        x, dataset.y[labeled], feature_map=LINEAR, ridge=args.ridge
    )
    _emit(model_file_text(names, model.beta), args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _ridge_arg(text: str):
    if text == RIDGE_AUTO:
        return RIDGE_AUTO
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"ridge must be 'auto' or a number, got {text!r}"
        ) from None
    if value < 0:
        raise argparse.ArgumentTypeError("ridge must be >= 0")
    return value


def _add_data_flags(p, *, with_model=True):
    p.add_argument("--data", required=True, help="input CSV file")
    if with_model:
        p.add_argument("--model", help="model file produced by model-fit")
        p.add_argument(
            "--ghat-col",
            help="name of the column holding precomputed model predictions (default: GHAT)",
        )


def _add_loss_flag(p):
    p.add_argument(
        "--loss",
        choices=LOSS_CHOICES,
        default="brier",
        help="loss whose target-population mean is estimated",
    )


def _add_nuisance_flags(p):
    p.add_argument("--p-map", choices=FEATURE_MAPS, default=LINEAR, help="feature map for the membership model")
    p.add_argument("--h-map", choices=FEATURE_MAPS, default=LINEAR, help="feature map for the conditional-loss model")
    p.add_argument(
        "--h-strategy",
        choices=(BINARY, DIRECT),
        default=BINARY,
        help="conditional loss via an outcome model (binary, squared loss) or direct loss regression",
    )
    p.add_argument("--folds", type=int, default=1, help="cross-fitting folds (1 = none)")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="probability truncation level")
    p.add_argument("--ridge-p", type=_ridge_arg, default=None, help="ridge for the membership model ('auto' or a number; default 0, auto for spline)")
    p.add_argument("--ridge-h", type=_ridge_arg, default=None, help="ridge for the conditional-loss model")


def _add_boot_flags(p, default_boot: int):
    p.add_argument("--boot", type=int, default=default_boot, help="bootstrap replicates (0 disables)")
    p.add_argument("--boot-unit", choices=RESAMPLE_UNITS, default=ROW, help="resampling unit")
    p.add_argument("--ci", choices=CI_METHODS, default=PERCENTILE, help="confidence interval type")
    p.add_argument("--boot-refit", choices=("on", "off"), default="on", help="refit nuisances on each resample")


def _add_tail_flags(p, *, seed_default: int | None = 0):
    p.add_argument("--seed", type=int, default=seed_default, help="random seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads/processes (0 = auto)")
    p.add_argument("--out", help="also write the output to this file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="shiftrisk",
        description="Loss-based model performance in a shifted target population.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("estimate", help="estimate target-population risk from a CSV file")
    _add_data_flags(pe)
    _add_loss_flag(pe)
    pe.add_argument(
        "--estimator",
        choices=ESTIMATORS + ("all",),
        default=DR,
        help="estimator to run ('all' runs every applicable one)",
    )
    _add_nuisance_flags(pe)
    pe.add_argument("--survey", action="store_true", help="survey-weighted analysis (requires a W column)")
    pe.add_argument(
        "--se",
        choices=("boot", "sandwich"),
        default="boot",
        help="uncertainty method (sandwich: unweighted dr only)",
    )
    _add_boot_flags(pe, default_boot=1000)
    _add_tail_flags(pe)
    pe.set_defaults(func=cmd_estimate)

    ps = sub.add_parser("simulate", help="run the Monte Carlo benchmark")
    ps.add_argument("--scenario", help="scenario file with key=value overrides")
    ps.add_argument("--reps", type=int, help="number of replicates")
    ps.add_argument("--n-total", type=int, help="rows per replicate")
    ps.add_argument("--n-truth", type=int, help="Monte Carlo draws for the per-replicate truth")
    ps.add_argument("--arms", help="comma-separated arm subset (e.g. naive,dr-corr)")
    ps.add_argument("--raw-out", help="write per-replicate estimates to this CSV")
    _add_tail_flags(ps, seed_default=None)
    ps.set_defaults(func=cmd_simulate)

    pv = sub.add_parser("split-eval", help="repeated synthetic source/target splits on labeled data")
    _add_data_flags(pv)
    _add_loss_flag(pv)
    pv.add_argument("--mode", choices=SPLIT_MODES, default=UNIFORM, help="membership assignment")
    pv.add_argument("--m", type=float, default=0.05, help="shift magnitude for the shifted mode")
    pv.add_argument("--splits", type=int, default=1000, help="number of splits")
    _add_nuisance_flags(pv)
    _add_boot_flags(pv, default_boot=0)
    _add_tail_flags(pv)
    pv.set_defaults(func=cmd_split_eval)

    pm = sub.add_parser("model-fit", help="fit and serialize a main-effects logistic model")
    _add_data_flags(pm, with_model=False)
    pm.add_argument("--columns", help="comma-separated covariate subset ('' or 'none' for intercept only)")
    pm.add_argument("--ridge", type=_ridge_arg, default=0.0, help="ridge penalty ('auto' or a number)")
    _add_tail_flags(pm)
    pm.set_defaults(func=cmd_model_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0

    try:
        return args.func(args)
    except InvalidArgumentError as exc:
        return _fail(exc, 1)
    except (SchemaError, DataValidationError, OracleUnavailableError) as exc:
        return _fail(exc, 2)
    except (
        FitError,
        NuisanceMissingError,
        PositivityError,
        BootstrapError,
        ReplicationError,
        np.linalg.LinAlgError,
        FloatingPointError,
    ) as exc:
        return _fail(exc, 3)
    except ShiftRiskError as exc:
        return _fail(exc, 1)
    except OSError as exc:
        return _fail(exc, 1)


def _fail(exc, code: int) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
