"""Target-population risk estimators and the estimation pipeline.

Five estimators over a pooled source/target sample, all implemented in
survey-weighted form; the unweighted versions are the ``w == 1``
special case of the same code path, exactly.

* ``naive``: plain average of observed losses over source rows.
* ``cl``: weighted target average of the conditional-loss model h.
* ``iw``: inverse-odds-weighted source losses over the target weight.
* ``dr``: doubly robust combination of the two; reduces exactly to
  ``iw`` when h is identically 0 and to ``cl`` when p is identically 1.
* ``oracle``: weighted target average of observed losses (needs target
  outcomes; a diagnostic, not usable in practice).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    Dataset,
    SQUARED,
    Violation,
    loss_eval,
    require_valid,
)
from .errors import (
    DataValidationError,
    InvalidArgumentError,
    NuisanceMissingError,
    OracleUnavailableError,
    PositivityError,
)
from .inference import (
    Z_95,
    BootstrapPlan,
    BootstrapResult,
    bootstrap,
    eif_values,
    sandwich_se,
)
from .nuisance import BINARY, NuisanceConfig, NuisanceEstimates, estimate_nuisances

NAIVE = "naive"
CL = "cl"
IW = "iw"
DR = "dr"
ORACLE = "oracle"
ESTIMATORS = (NAIVE, CL, IW, DR, ORACLE)


def _source_losses(dataset: Dataset, losses: np.ndarray) -> np.ndarray:
    out = losses[dataset.source_mask]
    if out.size == 0:
        raise DataValidationError([Violation("d", "no source rows (d == 1) in dataset")])
    if not np.all(np.isfinite(out)):
        raise DataValidationError(
            [Violation("loss", "losses must be present and finite on source rows")]
        )
    return out


def _target_weight_sum(dataset: Dataset) -> float:
    tmask = dataset.target_mask
    if not np.any(tmask):
        raise DataValidationError([Violation("d", "no target rows (d == 0) in dataset")])
    return float(np.sum(dataset.w[tmask]))


def _target_h_sum(dataset: Dataset, h_hat) -> float:
    if h_hat is None:
        raise NuisanceMissingError("this estimator needs h values")
    h = np.asarray(h_hat, dtype=float)
    tmask = dataset.target_mask
    if not np.all(np.isfinite(h[tmask])):
        raise NuisanceMissingError("h values must be present and finite on target rows")
    return float(np.sum(dataset.w[tmask] * h[tmask]))


def _source_odds(dataset: Dataset, p_hat) -> np.ndarray:
    if p_hat is None:
        raise NuisanceMissingError("this estimator needs p values")
    p = np.asarray(p_hat, dtype=float)[dataset.source_mask]
    if not np.all(np.isfinite(p)):
        raise NuisanceMissingError("p values must be present and finite on source rows")
    if np.any(p == 0):
        raise PositivityError("p is zero on a source row")
    return (1.0 - p) / p


def estimate_naive(dataset: Dataset, losses, p_hat=None, h_hat=None) -> float:
    """Average loss over source rows; ignores weights and nuisances."""
    src = _source_losses(dataset, np.asarray(losses, dtype=float))
    return float(np.mean(src))


def estimate_cl(dataset: Dataset, losses, p_hat=None, h_hat=None) -> float:
    """Weighted target average of the conditional-loss model."""
    return _target_h_sum(dataset, h_hat) / _target_weight_sum(dataset)


def estimate_iw(dataset: Dataset, losses, p_hat=None, h_hat=None) -> float:
    """Inverse-odds-weighted source losses over the target weight sum.

    Source rows carry no survey weight here: the source sample is
    unweighted by design (weights enter through the weighted fit of p
    and the normalizer).
    """
    src = _source_losses(dataset, np.asarray(losses, dtype=float))
    odds = _source_odds(dataset, p_hat)
    return float(np.sum(odds * src)) / _target_weight_sum(dataset)


def estimate_dr(dataset: Dataset, losses, p_hat=None, h_hat=None) -> float:
    """Doubly robust estimator.

    The target term and the source correction are computed with the
    same expressions as ``cl`` and ``iw``, which makes the reductions
    (h ≡ 0 → iw, p ≡ 1 → cl) exact in floating point, not just in
    algebra.
    """
    src = _source_losses(dataset, np.asarray(losses, dtype=float))
    odds = _source_odds(dataset, p_hat)
    if h_hat is None:
        raise NuisanceMissingError("this estimator needs h values")
    h = np.asarray(h_hat, dtype=float)
    h_src = h[dataset.source_mask]
    if not np.all(np.isfinite(h_src)):
        raise NuisanceMissingError("h values must be present and finite on source rows")
    target_term = _target_h_sum(dataset, h_hat)
    source_term = float(np.sum(odds * (src - h_src)))
    return (target_term + source_term) / _target_weight_sum(dataset)


def estimate_oracle(dataset: Dataset, losses, p_hat=None, h_hat=None) -> float:
    """Weighted target average of observed losses."""
    tmask = dataset.target_mask
    lt = np.asarray(losses, dtype=float)[tmask]
    if lt.size == 0:
        raise DataValidationError([Violation("d", "no target rows (d == 0) in dataset")])
    if not np.all(np.isfinite(lt)):
        raise OracleUnavailableError(
            "oracle estimation needs observed losses (outcomes) on every target row"
        )
    return float(np.sum(dataset.w[tmask] * lt)) / _target_weight_sum(dataset)


ESTIMATOR_FN = {
    NAIVE: estimate_naive,
    CL: estimate_cl,
    IW: estimate_iw,
    DR: estimate_dr,
    ORACLE: estimate_oracle,
}


def estimate(name: str, dataset: Dataset, losses, p_hat=None, h_hat=None) -> float:
    """Dispatch to one estimator by name."""
    try:
        fn = ESTIMATOR_FN[name]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown estimator {name!r}; expected one of {ESTIMATORS}"
        ) from None
    return fn(dataset, losses, p_hat, h_hat)


def needs_nuisance(name: str) -> tuple[bool, bool]:
    """(needs p, needs h) for an estimator name."""
    return name in (IW, DR), name in (CL, DR)


def losses_from_predictions(dataset: Dataset, g_pred, loss: str = SQUARED) -> np.ndarray:
    """Per-row losses where the outcome is observed, NaN elsewhere."""
    g = np.asarray(g_pred, dtype=float)
    if g.shape != (dataset.n,):
        raise InvalidArgumentError(f"predictions must have shape ({dataset.n},), got {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InvalidArgumentError("predictions must be finite")
    out = np.full(dataset.n, np.nan)
    has_y = ~np.isnan(dataset.y)
    out[has_y] = loss_eval(loss, dataset.y[has_y], g[has_y])
    return out


SANDWICH = "sandwich"
BOOTSTRAP = "bootstrap"


@dataclass(frozen=True)
class EstimateReport:
    """One estimator's result with inference and fit diagnostics."""

    method: str
    estimate: float
    n: int
    n0: int
    n1: int
    std_error: float | None = None
    ci_lower: float | None = None
    ci_upper: float | None = None
    se_method: str | None = None
    ci_method: str | None = None
    truncation_count: int = 0
    p_converged: bool | None = None
    h_converged: bool | None = None
    folds: int = 1
    boot_failures: int = 0
    nuisance: NuisanceEstimates | None = field(default=None, repr=False)
    boot: BootstrapResult | None = field(default=None, repr=False)


def estimate_risk(
    dataset: Dataset,
    g_pred: np.ndarray | None = None,
    *,
    loss: str = SQUARED,
    estimator: str = DR,
    config: NuisanceConfig | None = None,
    seed: int = 0,
    se_method: str | None = None,
    boot_replicates: int = 1000,
    boot_unit: str = "row",
    ci_method: str = "percentile",
    boot_refit: bool = True,
    losses: np.ndarray | None = None,
    threads: int = 1,
) -> EstimateReport:
    """Full pipeline: validate, fit nuisances, estimate, attach inference.

    ``g_pred`` are the evaluated model's predictions for every row
    (the model itself is external and never refit). Precomputed
    ``losses`` may be passed instead for non-model workflows.

    ``se_method`` is None (point estimate only), ``"sandwich"``
    (unweighted ``dr`` only), or ``"bootstrap"`` (all estimators; the
    nuisances are refit on each resample unless ``boot_refit`` is off).
    """
    if estimator not in ESTIMATORS:
        raise InvalidArgumentError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
    config = config or NuisanceConfig()
    require_valid(
        dataset,
        require_target_y=(estimator == ORACLE),
        survey=config.survey,
    )
    if losses is None:
        if g_pred is None:
            raise InvalidArgumentError("either g_pred or losses must be provided")
        losses = losses_from_predictions(dataset, g_pred, loss)
    else:
        losses = np.asarray(losses, dtype=float)

    need_p, need_h = needs_nuisance(estimator)
    if need_h and config.h_strategy == BINARY and loss != SQUARED:
        raise InvalidArgumentError("the binary h strategy applies to squared loss only")
    nuis = None
    p_hat = h_hat = None
    if need_p or need_h:
        nuis = estimate_nuisances(
            dataset,
            config=config,
            g_pred=g_pred,
            loss_values=losses,
            need_p=need_p,
            need_h=need_h,
            seed=seed,
        )
        p_hat, h_hat = nuis.p_hat, nuis.h_hat
    psi = estimate(estimator, dataset, losses, p_hat, h_hat)

    report = EstimateReport(
        method=estimator,
        estimate=psi,
        n=dataset.n,
        n0=dataset.n_target,
        n1=dataset.n_source,
        truncation_count=nuis.truncation_count if nuis else 0,
        p_converged=nuis.p_converged if nuis else None,
        h_converged=nuis.h_converged if nuis else None,
        folds=config.folds,
        nuisance=nuis,
    )
    if se_method is None:
        return report

    if se_method == SANDWICH:
        if estimator != DR:
            raise InvalidArgumentError("sandwich SE is available for the dr estimator only")
        iv = eif_values(dataset, losses, p_hat, h_hat, psi)
        se = sandwich_se(iv)
        return _with_inference(
            report, se, psi - Z_95 * se, psi + Z_95 * se, SANDWICH, "normal"
        )
    if se_method == BOOTSTRAP:
        plan = BootstrapPlan(
            replicates=boot_replicates, unit=boot_unit, seed=seed, ci_method=ci_method
        )
        fn = _refit_estimate_fn(
            estimator, loss, config, seed, g_pred, losses, boot_refit, p_hat, h_hat
        )
        result = bootstrap(dataset, fn, plan, psi_hat=psi, threads=threads)
        out = _with_inference(
            report, result.se, result.ci_lower, result.ci_upper, BOOTSTRAP, plan.ci_method
        )
        return replace(out, boot_failures=result.n_failed, boot=result)
    raise InvalidArgumentError(f"unknown se_method {se_method!r}")


def _with_inference(report, se, lo, hi, se_method, ci_method):
    return replace(
        report,
        std_error=float(se),
        ci_lower=float(lo),
        ci_upper=float(hi),
        se_method=se_method,
        ci_method=ci_method,
    )


def _refit_estimate_fn(estimator, loss, config, seed, g_pred, losses, refit, p_hat, h_hat):
    """Builder for bootstrap replicates: carries predictions/losses by
    row index and refits nuisances on the resample (unless disabled)."""
    need_p, need_h = needs_nuisance(estimator)

    def fn(resampled: Dataset, idx: np.ndarray) -> float:
        loss_b = losses[idx]
        g_b = None if g_pred is None else np.asarray(g_pred)[idx]
        if need_p or need_h:
            if refit:
                nuis = estimate_nuisances(
                    resampled,
                    config=config,
                    g_pred=g_b,
                    loss_values=loss_b,
                    need_p=need_p,
                    need_h=need_h,
                    seed=seed,
                )
                p_b, h_b = nuis.p_hat, nuis.h_hat
            else:
                p_b = None if p_hat is None else np.asarray(p_hat)[idx]
                h_b = None if h_hat is None else np.asarray(h_hat)[idx]
        else:
            p_b = h_b = None
        return estimate(estimator, resampled, loss_b, p_b, h_b)

    return fn
