"""Monte Carlo harness.

Two studies ship with the package:

* a covariate-shift benchmark with a known data-generating process
  (AR-correlated gaussian covariates, logistic selection and outcome in
  the first three covariates and their squares), where every estimator
  arm is scored against a numerically computed per-replicate truth;
* a split experiment on a fully labeled dataset, where rows are
  repeatedly divided into source and target (uniformly or with a mild
  covariate shift) and the estimators are compared against the oracle
  that sees target outcomes.

All randomness flows through per-replicate streams, so results do not
depend on execution order.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .core import Dataset, SQUARED, expit, loss_eval
from .errors import InvalidArgumentError, ReplicationError, ShiftRiskError
from .estimators import (
    CL,
    DR,
    ESTIMATOR_FN,
    IW,
    NAIVE,
    ORACLE,
    estimate,
    losses_from_predictions,
)
from .inference import BootstrapPlan, bootstrap, eif_values, sandwich_se
from .nuisance import (
    BINARY,
    LINEAR,
    QUADRATIC,
    RIDGE_AUTO,
    SPLINE,
    NuisanceConfig,
    estimate_nuisances,
    fit_prediction_model,
)

MAX_REPLICATE_FAILURES = 0.01


@dataclass(frozen=True)
class ScenarioSpec:
    """Benchmark configuration.

    The covariate covariance is AR-structured, ``rho**|i-j|``. The
    selection and outcome probabilities share one functional form:
    ``expit(intercept + linear_coef·Σx_j + quad_coef·Σx_j²)`` over the
    first ``n_active`` covariates.
    """

    n_total: int = 1000
    dim: int = 10
    rho: float = 0.5
    intercept: float = -0.3
    linear_coef: float = 0.2
    quad_coef: float = 0.3
    n_active: int = 3
    train_fraction: float = 2.0 / 3.0
    loss: str = SQUARED
    replications: int = 1000
    seed: int = 0
    n_truth: int = 100_000

    def __post_init__(self):
        if not 1 <= self.n_active <= self.dim:
            raise InvalidArgumentError("n_active must be in [1, dim]")
        if not 0 < self.train_fraction < 1:
            raise InvalidArgumentError("train_fraction must be in (0, 1)")
        if self.replications < 1 or self.n_total < 4 or self.n_truth < 1:
            raise InvalidArgumentError("replications, n_total, n_truth must be positive")

    @property
    def covariance(self) -> np.ndarray:
        return ar1_covariance(self.dim, self.rho)


def ar1_covariance(dim: int, rho: float = 0.5) -> np.ndarray:
    idx = np.arange(dim)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def sample_mvn(n: int, covariance: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """i.i.d. mean-zero gaussian rows via the Cholesky factor."""
    cov = np.asarray(covariance, dtype=float)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise InvalidArgumentError(
            "covariance matrix is not symmetric positive definite"
        ) from None
    z = gen.standard_normal((n, cov.shape[0]))
    return z @ chol.T


def true_prob(spec: ScenarioSpec, x: np.ndarray) -> np.ndarray:
    """Shared selection/outcome probability of the benchmark DGP."""
    active = x[:, : spec.n_active]
    z = spec.intercept + spec.linear_coef * active.sum(axis=1) + spec.quad_coef * (active**2).sum(axis=1)
    return expit(z)


def dgp_draw(spec: ScenarioSpec, gen: np.random.Generator) -> Dataset:
    """One benchmark sample: covariates, then membership, then outcome.

    Outcomes are kept on every row; estimation must only consume them
    on source rows (the oracle and truth computations are the
    exceptions).
    """
    x = sample_mvn(spec.n_total, spec.covariance, gen)
    prob = true_prob(spec, x)
    d = (gen.random(spec.n_total) < prob).astype(float)
    y = (gen.random(spec.n_total) < prob).astype(float)
    return Dataset(x=x, d=d, y=y)


def compute_truth(
    spec: ScenarioSpec,
    predict,
    gen: np.random.Generator,
    n_mc: int | None = None,
) -> float:
    """Target-population risk of the model ``predict`` by rejection
    sampling covariates conditional on non-membership.

    Uses the analytic conditional squared loss
    ``E[(Y−g)²|X] = q(1−2g) + g²`` with the known outcome probability
    q, averaged over ``n_mc`` accepted draws.
    """
    n_mc = spec.n_truth if n_mc is None else int(n_mc)
    batch = 1 << 16
    total = 0.0
    accepted = 0
    while accepted < n_mc:
        x = sample_mvn(batch, spec.covariance, gen)
        prob = true_prob(spec, x)
        keep = gen.random(batch) >= prob
        x_t = x[keep]
        if accepted + x_t.shape[0] > n_mc:
            x_t = x_t[: n_mc - accepted]
        q = true_prob(spec, x_t)
        g = np.asarray(predict(x_t), dtype=float)
        total += float(np.sum(q * (1.0 - 2.0 * g) + g**2))
        accepted += x_t.shape[0]
    return total / n_mc


# ---------------------------------------------------------------------------
# Benchmark arms

ARMS: dict[str, tuple[str, str | None, str | None]] = {
    "naive": (NAIVE, None, None),
    "w_corr": (IW, QUADRATIC, None),
    "w_miss": (IW, LINEAR, None),
    "cl_corr": (CL, None, QUADRATIC),
    "cl_miss": (CL, None, LINEAR),
    "dr_corr": (DR, QUADRATIC, QUADRATIC),
    "dr_miss_p": (DR, LINEAR, QUADRATIC),
    "dr_miss_h": (DR, QUADRATIC, LINEAR),
    "dr_miss_both": (DR, LINEAR, LINEAR),
    "dr_gam": (DR, SPLINE, SPLINE),
}

ARM_LABELS = {
    "naive": "Naive",
    "w_corr": "W Corr",
    "w_miss": "W Miss",
    "cl_corr": "CL Corr",
    "cl_miss": "CL Miss",
    "dr_corr": "DR Corr",
    "dr_miss_p": "DR Miss p",
    "dr_miss_h": "DR Miss h",
    "dr_miss_both": "DR Miss Both",
    "dr_gam": "DR GAM",
}


def _nuisance_values(dataset, g_pred, losses, p_maps, h_maps):
    """Fit each required feature map once and share across arms."""
    p_by_map, p_trunc = {}, {}
    for m in p_maps:
        cfg = NuisanceConfig(p_map=m, ridge_p=RIDGE_AUTO if m == SPLINE else 0.0)
        nuis = estimate_nuisances(
            dataset, config=cfg, need_p=True, need_h=False
        )
        p_by_map[m] = nuis.p_hat
        p_trunc[m] = nuis.truncation_count
    h_by_map = {}
    for m in h_maps:
        cfg = NuisanceConfig(
            h_map=m, h_strategy=BINARY, ridge_h=RIDGE_AUTO if m == SPLINE else 0.0
        )
        nuis = estimate_nuisances(
            dataset, config=cfg, g_pred=g_pred, loss_values=losses, need_p=False, need_h=True
        )
        h_by_map[m] = nuis.h_hat
    return p_by_map, h_by_map, p_trunc


def replicate_run(spec: ScenarioSpec, arm_names: tuple[str, ...], r: int, *, want_truth=True, want_sandwich=("dr_corr",)):
    """All requested arm estimates for replicate ``r``.

    Returns a dict with per-arm estimates, the per-replicate truth, the
    evaluation-set size, and sandwich SEs for the arms in
    ``want_sandwich``.
    """
    ds = dgp_draw(spec, rngmod.stream(spec.seed, r, rngmod.DATA))
    src_idx = np.flatnonzero(ds.source_mask)
    perm = rngmod.stream(spec.seed, r, rngmod.TRAIN_SPLIT).permutation(src_idx)
    n_train = int(round(spec.train_fraction * src_idx.size))
    train_idx = perm[:n_train]
    model = fit_prediction_model(ds.x[train_idx], ds.y[train_idx], feature_map=LINEAR)

    eval_idx = np.setdiff1d(np.arange(ds.n), train_idx)
    eval_ds = ds.take(eval_idx)
    g_eval = model.predict_matrix(eval_ds.x)
    losses = losses_from_predictions(eval_ds, g_eval, spec.loss)

    p_maps = {ARMS[a][1] for a in arm_names if ARMS[a][1] is not None}
    h_maps = {ARMS[a][2] for a in arm_names if ARMS[a][2] is not None}
    p_by_map, h_by_map, p_trunc = _nuisance_values(eval_ds, g_eval, losses, p_maps, h_maps)

    estimates = {}
    for a in arm_names:
        est, pm, hm = ARMS[a]
        estimates[a] = estimate(
            est, eval_ds, losses, p_by_map.get(pm), h_by_map.get(hm)
        )
    sandwich = {}
    for a in want_sandwich:
        if a in arm_names and ARMS[a][0] == DR:
            _, pm, hm = ARMS[a]
            iv = eif_values(eval_ds, losses, p_by_map[pm], h_by_map[hm], estimates[a])
            sandwich[a] = sandwich_se(iv)
    truth = np.nan
    if want_truth:
        truth = compute_truth(
            spec, model.predict_matrix, rngmod.stream(spec.seed, r, rngmod.TRUTH)
        )
    return {
        "estimates": estimates,
        "truth": truth,
        "n_eval": eval_ds.n,
        "sandwich": sandwich,
        "truncated": sum(p_trunc.values()),
    }


@dataclass(frozen=True)
class ArmSummary:
    arm: str
    label: str
    avg_estimate: float
    sqrt_n_bias: float
    sqrt_n_sd: float
    rel_bias_pct: float


@dataclass(frozen=True)
class ReplicationSummary:
    rows: tuple[ArmSummary, ...]
    truth: float
    n_eval_mean: float
    replications: int

    def row(self, arm: str) -> ArmSummary:
        for r in self.rows:
            if r.arm == arm:
                return r
        raise InvalidArgumentError(f"arm {arm!r} not in summary")


@dataclass(frozen=True)
class SimulationResult:
    """Raw per-replicate output of the benchmark run."""

    spec: ScenarioSpec
    arms: tuple[str, ...]
    estimates: dict[str, np.ndarray]
    truths: np.ndarray
    n_eval: np.ndarray
    sandwich_se: dict[str, np.ndarray] = field(default_factory=dict)
    failures: tuple[str, ...] = ()
    truncated: int = 0

    def summarize(self) -> ReplicationSummary:
        return summarize(self.estimates, self.truths, self.n_eval, self.spec.replications)


def summarize(estimates: dict[str, np.ndarray], truths, n_eval, replications: int) -> ReplicationSummary:
    """Per-arm averages and √n-scaled bias/SD against the mean truth."""
    truths = np.asarray(truths, dtype=float)
    ok_any = False
    truth = float(np.nanmean(truths)) if np.any(np.isfinite(truths)) else np.nan
    n_mean = float(np.nanmean(np.asarray(n_eval, dtype=float)))
    root_n = np.sqrt(n_mean)
    rows = []
    for arm, values in estimates.items():
        values = np.asarray(values, dtype=float)
        ok = np.isfinite(values)
        if np.count_nonzero(ok) < 2:
            raise InvalidArgumentError(f"arm {arm!r} needs at least 2 successful replicates")
        ok_any = True
        avg = float(np.mean(values[ok]))
        sd = float(np.std(values[ok], ddof=1))
        bias = avg - truth
        rows.append(
            ArmSummary(
                arm=arm,
                label=ARM_LABELS.get(arm, arm),
                avg_estimate=avg,
                sqrt_n_bias=root_n * bias,
                sqrt_n_sd=root_n * sd,
                rel_bias_pct=100.0 * bias / truth if truth else np.nan,
            )
        )
    if not ok_any:
        raise InvalidArgumentError("no arms to summarize")
    return ReplicationSummary(
        rows=tuple(rows), truth=truth, n_eval_mean=n_mean, replications=replications
    )


def run_table_s1(
    spec: ScenarioSpec,
    arms: tuple[str, ...] | None = None,
    *,
    want_truth: bool = True,
    want_sandwich: tuple[str, ...] = ("dr_corr",),
    threads: int = 1,
) -> SimulationResult:
    """Run the benchmark over all replicates and collect raw arrays.

    ``threads > 1`` fans replicates out to worker processes; results
    are identical to the serial run because each replicate consumes
    only its own random streams.
    """
    arms = tuple(ARMS) if arms is None else tuple(arms)
    for a in arms:
        if a not in ARMS:
            raise InvalidArgumentError(f"unknown arm {a!r}; expected one of {tuple(ARMS)}")
    R = spec.replications
    est = {a: np.full(R, np.nan) for a in arms}
    truths = np.full(R, np.nan)
    n_eval = np.full(R, np.nan)
    sandwich = {a: np.full(R, np.nan) for a in want_sandwich if a in arms}
    failures = []
    truncated = 0

    def consume(r, outcome):
        nonlocal truncated
        for a in arms:
            est[a][r] = outcome["estimates"][a]
        truths[r] = outcome["truth"]
        n_eval[r] = outcome["n_eval"]
        for a, v in outcome["sandwich"].items():
            if a in sandwich:
                sandwich[a][r] = v
        truncated += outcome["truncated"]

    if threads == 1:
        for r in range(R):
            try:
                consume(r, replicate_run(spec, arms, r, want_truth=want_truth, want_sandwich=want_sandwich))
            except (ShiftRiskError, np.linalg.LinAlgError, FloatingPointError) as exc:
                failures.append(f"replicate {r}: {exc}")
    else:
        workers = threads if threads > 0 else None
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {
                pool.submit(
                    replicate_run, spec, arms, r, want_truth=want_truth, want_sandwich=want_sandwich
                ): r
                for r in range(R)
            }
            for fut in concurrent.futures.as_completed(futs):
                r = futs[fut]
                try:
                    consume(r, fut.result())
                except (ShiftRiskError, np.linalg.LinAlgError, FloatingPointError) as exc:
                    failures.append(f"replicate {r}: {exc}")

    if len(failures) > MAX_REPLICATE_FAILURES * R:
        shown = "; ".join(failures[:5])
        raise ReplicationError(
            f"{len(failures)} of {R} replicates failed (> {MAX_REPLICATE_FAILURES:.0%}): {shown}"
        )
    return SimulationResult(
        spec=spec,
        arms=arms,
        estimates=est,
        truths=truths,
        n_eval=n_eval,
        sandwich_se=sandwich,
        failures=tuple(sorted(failures)),
        truncated=truncated,
    )


# ---------------------------------------------------------------------------
# Split experiment on a labeled dataset

UNIFORM = "uniform"
SHIFTED = "shifted"
SPLIT_MODES = (UNIFORM, SHIFTED)


def semi_synthetic_split(
    dataset: Dataset,
    mode: str,
    m: float = 0.05,
    seed: int = 0,
    replicate: int = 0,
) -> Dataset:
    """Assign a synthetic source/target split to a fully labeled dataset.

    ``uniform`` draws membership as a fair coin, independent of the
    covariates. ``shifted`` fits a main-effects logistic of the outcome
    on the covariates, then draws membership from a logistic model
    whose coefficients are +m where the outcome association is positive
    and −m otherwise (zero intercept), producing a mild covariate shift
    aligned with the outcome. Outcomes are retained on every row so the
    oracle stays computable.
    """
    if mode not in SPLIT_MODES:
        raise InvalidArgumentError(f"mode must be one of {SPLIT_MODES}")
    if np.any(np.isnan(dataset.y)):
        raise InvalidArgumentError("split assignment needs outcomes on every row")
    n = dataset.n
    if mode == UNIFORM:
        prob = np.full(n, 0.5)
    else:
        outcome_model = fit_prediction_model(dataset.x, dataset.y, feature_map=LINEAR)
        signs = np.where(outcome_model.beta[1:] > 0, m, -m)
        prob = expit(dataset.x @ signs)
    gen = rngmod.stream(seed, replicate, rngmod.SELECT)
    d = (gen.random(n) < prob).astype(float)
    return Dataset(
        x=dataset.x,
        d=d,
        y=dataset.y,
        w=dataset.w,
        cluster=dataset.cluster,
        stratum=dataset.stratum,
    )


@dataclass(frozen=True)
class SplitArmSummary:
    estimator: str
    mean: float
    sd: float
    bias_vs_oracle: float
    mc_se: float
    avg_boot_se: float


@dataclass(frozen=True)
class SplitEvalResult:
    mode: str
    n_splits: int
    estimators: tuple[str, ...]
    estimates: dict[str, np.ndarray]
    boot_se: dict[str, np.ndarray]
    failures: tuple[str, ...] = ()

    def summarize(self) -> tuple[SplitArmSummary, ...]:
        if ORACLE not in self.estimates:
            raise InvalidArgumentError(
                "split summaries are measured against the oracle; include it among the estimators"
            )
        oracle = self.estimates[ORACLE]
        rows = []
        for name in self.estimators:
            vals = self.estimates[name]
            ok = np.isfinite(vals) & np.isfinite(oracle)
            diff = vals[ok] - oracle[ok]
            boot = self.boot_se.get(name)
            rows.append(
                SplitArmSummary(
                    estimator=name,
                    mean=float(np.mean(vals[ok])),
                    sd=float(np.std(vals[ok], ddof=1)),
                    bias_vs_oracle=float(np.mean(diff)),
                    mc_se=float(np.std(diff, ddof=1) / np.sqrt(diff.size)),
                    avg_boot_se=(
                        float(np.nanmean(boot)) if boot is not None and boot.size else np.nan
                    ),
                )
            )
        return tuple(rows)


def run_split_eval(
    dataset: Dataset,
    g_pred: np.ndarray,
    *,
    mode: str,
    m: float = 0.05,
    n_splits: int = 1000,
    seed: int = 0,
    loss: str = SQUARED,
    config: NuisanceConfig | None = None,
    estimators: tuple[str, ...] = (NAIVE, CL, IW, DR, ORACLE),
    boot_replicates: int = 0,
    boot_unit: str = "row",
    threads: int = 1,
) -> SplitEvalResult:
    """Repeat the synthetic split and score each estimator on every split.

    The model predictions ``g_pred`` are fixed across splits (the model
    is external); only the membership assignment and the nuisance fits
    vary. With ``boot_replicates > 0`` each split also runs a bootstrap
    per estimator and the summary reports the average bootstrap SE.
    """
    for name in estimators:
        if name not in ESTIMATOR_FN:
            raise InvalidArgumentError(f"unknown estimator {name!r}")
    config = config or NuisanceConfig()
    if np.any(np.isnan(dataset.y)):
        raise InvalidArgumentError("split evaluation needs outcomes on every row")
    g_pred = np.asarray(g_pred, dtype=float)
    losses = loss_eval(loss, dataset.y, g_pred)
    need_p = any(name in (IW, DR) for name in estimators)
    need_h = any(name in (CL, DR) for name in estimators)
    est = {name: np.full(n_splits, np.nan) for name in estimators}
    boot_se = {name: np.full(n_splits, np.nan) for name in estimators} if boot_replicates else {}
    failures = []

    for r in range(n_splits):
        try:
            ds_r = semi_synthetic_split(dataset, mode, m, seed, r)
            nuis = None
            if need_p or need_h:
                nuis = estimate_nuisances(
                    ds_r,
                    config=config,
                    g_pred=g_pred,
                    loss_values=losses,
                    need_p=need_p,
                    need_h=need_h,
                    seed=seed,
                    replicate=r,
                )
            p_hat = nuis.p_hat if nuis else None
            h_hat = nuis.h_hat if nuis else None
            for name in estimators:
                est[name][r] = estimate(name, ds_r, losses, p_hat, h_hat)
                if boot_replicates:
                    boot_se[name][r] = _split_boot_se(
                        name, ds_r, g_pred, losses, config, seed, r,
                        boot_replicates, boot_unit, threads,
                    )
        except (ShiftRiskError, np.linalg.LinAlgError, FloatingPointError) as exc:
            failures.append(f"split {r}: {exc}")

    if len(failures) > MAX_REPLICATE_FAILURES * n_splits:
        shown = "; ".join(failures[:5])
        raise ReplicationError(
            f"{len(failures)} of {n_splits} splits failed (> {MAX_REPLICATE_FAILURES:.0%}): {shown}"
        )
    return SplitEvalResult(
        mode=mode,
        n_splits=n_splits,
        estimators=tuple(estimators),
        estimates=est,
        boot_se=boot_se,
        failures=tuple(failures),
    )


def _split_boot_se(name, ds, g_pred, losses, config, seed, r, replicates, unit, threads=1):
    need_p, need_h = name in (IW, DR), name in (CL, DR)

    def fn(resampled, idx):
        loss_b = losses[idx]
        p_b = h_b = None
        if need_p or need_h:
            nuis = estimate_nuisances(
                resampled,
                config=config,
                g_pred=np.asarray(g_pred)[idx],
                loss_values=loss_b,
                need_p=need_p,
                need_h=need_h,
                seed=seed,
            )
            p_b, h_b = nuis.p_hat, nuis.h_hat
        return estimate(name, resampled, loss_b, p_b, h_b)

    plan = BootstrapPlan(replicates=replicates, unit=unit, seed=(seed << 16) ^ r)
    return bootstrap(ds, fn, plan, threads=threads).se
