"""Uncertainty quantification.

Influence-function (sandwich) standard errors for the doubly robust
estimator in the unweighted case, and a nonparametric bootstrap for
every estimator: plain row resampling, or a design-consistent scheme
that resamples target clusters within strata while source rows are
resampled independently row-wise.
"""

from __future__ import annotations

import concurrent.futures
import warnings
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .core import Dataset
from .errors import (
    BootstrapError,
    InvalidArgumentError,
    NuisanceMissingError,
    PositivityError,
    ShiftRiskError,
)

ROW = "row"
CLUSTER = "cluster"
RESAMPLE_UNITS = (ROW, CLUSTER)

PERCENTILE = "percentile"
NORMAL = "normal"
CI_METHODS = (PERCENTILE, NORMAL)

Z_95 = 1.96
MAX_FAILURE_FRACTION = 0.05


@dataclass(frozen=True)
class InfluenceValues:
    """Per-row influence contributions centered on the DR estimate."""

    chi: np.ndarray
    psi_hat: float


def eif_values(dataset: Dataset, losses, p_hat, h_hat, psi_hat: float) -> InfluenceValues:
    """Plug-in influence values for the doubly robust estimator.

    With ``tau = n0/n``, a target row contributes
    ``(h - psi_hat)/tau`` and a source row
    ``((1-p)/p)·(L - h)/tau``. Their sample mean is zero by the
    normalization of the estimator. Unweighted analyses only.
    """
    if not np.all(dataset.w == 1):
        raise InvalidArgumentError(
            "influence values are defined for unweighted analyses (all weights 1)"
        )
    n = dataset.n
    smask, tmask = dataset.source_mask, dataset.target_mask
    tau = dataset.n_target / n
    if tau == 0:
        raise InvalidArgumentError("no target rows")
    losses = np.asarray(losses, dtype=float)
    p = np.asarray(p_hat, dtype=float)
    h = np.asarray(h_hat, dtype=float)
    if not np.all(np.isfinite(h)):
        raise NuisanceMissingError("h values must be present and finite on all rows")
    if not np.all(np.isfinite(p[smask])):
        raise NuisanceMissingError("p values must be present and finite on source rows")
    if np.any(p[smask] == 0):
        raise PositivityError("p is zero on a source row")
    if not np.all(np.isfinite(losses[smask])):
        raise InvalidArgumentError("losses must be finite on source rows")
    chi = np.zeros(n)
    chi[tmask] = (h[tmask] - psi_hat) / tau
    odds = (1.0 - p[smask]) / p[smask]
    chi[smask] = odds * (losses[smask] - h[smask]) / tau
    return InfluenceValues(chi=chi, psi_hat=float(psi_hat))


def sandwich_se(iv: InfluenceValues) -> float:
    """``sqrt(mean(chi²)/n)``; the mean-zero identity makes the
    uncentered and centered variances agree."""
    chi = iv.chi
    if chi.size < 2:
        raise InvalidArgumentError("sandwich SE needs at least 2 rows")
    return float(np.sqrt(np.mean(chi**2) / chi.size))


# ---------------------------------------------------------------------------
# Bootstrap


@dataclass(frozen=True)
class BootstrapPlan:
    """How to resample: replicate count, unit, seed, and CI type."""

    replicates: int
    unit: str = ROW
    seed: int = 0
    ci_method: str = PERCENTILE

    def __post_init__(self):
        if self.replicates < 2:
            raise InvalidArgumentError(f"replicates must be >= 2, got {self.replicates}")
        if self.unit not in RESAMPLE_UNITS:
            raise InvalidArgumentError(f"unit must be one of {RESAMPLE_UNITS}")
        if self.ci_method not in CI_METHODS:
            raise InvalidArgumentError(f"ci_method must be one of {CI_METHODS}")


@dataclass(frozen=True)
class BootstrapResult:
    se: float
    ci_lower: float
    ci_upper: float
    estimates: np.ndarray
    n_failed: int
    failures: tuple[str, ...]


def _cluster_structure(dataset: Dataset):
    """Sorted (stratum, [cluster row-index arrays]) pairs over target rows."""
    if dataset.cluster is None:
        raise InvalidArgumentError("cluster resampling requires cluster labels")
    tmask = dataset.target_mask
    strata = (
        dataset.stratum[tmask]
        if dataset.stratum is not None
        else np.zeros(int(tmask.sum()), dtype=int)
    )
    target_rows = np.flatnonzero(tmask)
    out = []
    for s in np.unique(strata):
        in_s = target_rows[strata == s]
        labels = dataset.cluster[in_s]
        clusters = [in_s[labels == c] for c in np.unique(labels)]
        if len(clusters) == 1:
            warnings.warn(
                f"stratum {s!r} has a single cluster; it appears in every replicate "
                "and contributes no resampling variance",
                stacklevel=3,
            )
        out.append((s, clusters))
    return out


def _resample_cluster(dataset: Dataset, structure, gen) -> tuple[Dataset, np.ndarray]:
    src_rows = np.flatnonzero(dataset.source_mask)
    n1 = src_rows.size
    idx_parts = [src_rows[gen.integers(0, n1, n1)]] if n1 else []
    cluster_parts = [dataset.cluster[idx_parts[0]]] if n1 else []
    for _, clusters in structure:
        m = len(clusters)
        for k, c in enumerate(gen.integers(0, m, m)):
            rows = clusters[c]
            idx_parts.append(rows)
            fresh = np.asarray([f"{lbl}#{k}" for lbl in dataset.cluster[rows]], dtype=object)
            cluster_parts.append(fresh)
    idx = np.concatenate(idx_parts) if idx_parts else np.empty(0, dtype=int)
    resampled = Dataset(
        x=dataset.x[idx],
        d=dataset.d[idx],
        y=dataset.y[idx],
        w=dataset.w[idx],
        cluster=np.concatenate(cluster_parts) if cluster_parts else None,
        stratum=None if dataset.stratum is None else dataset.stratum[idx],
    )
    return resampled, idx


def bootstrap(
    dataset: Dataset,
    estimate_fn,
    plan: BootstrapPlan,
    *,
    psi_hat: float | None = None,
    threads: int = 1,
) -> BootstrapResult:
    """Resample, re-estimate, and summarize.

    ``estimate_fn(resampled_dataset, idx) -> float`` re-runs the whole
    estimation pipeline on one resample; ``idx`` maps resampled rows
    back to original rows so callers can carry along row-aligned arrays
    (model predictions, losses). Replicate b draws from the stream
    ``(seed, b, BOOT)``, so the estimate sequence is reproducible and
    independent of scheduling; with ``threads > 1`` (0 = auto) the
    replicates run on a thread pool and the results are identical to
    the serial run. Failed replicates are recorded and skipped; more
    than 5% failing aborts with a diagnostics summary.

    Row mode resamples all n rows with replacement. Cluster mode
    resamples source rows row-wise, then, independently within each
    stratum, m_s target clusters with replacement from that stratum's
    m_s clusters (duplicated clusters get fresh identities).
    """
    structure = _cluster_structure(dataset) if plan.unit == CLUSTER else None
    if plan.ci_method == NORMAL and psi_hat is None:
        raise InvalidArgumentError("normal CI needs the point estimate psi_hat")
    n = dataset.n
    results: list[float | None] = [None] * plan.replicates
    errors: dict[int, str] = {}

    def attempt(b: int) -> None:
        gen = rngmod.stream(plan.seed, b, rngmod.BOOT)
        if plan.unit == ROW:
            idx = gen.integers(0, n, n)
            resampled = dataset.take(idx)
        else:
            resampled, idx = _resample_cluster(dataset, structure, gen)
        try:
            results[b] = float(estimate_fn(resampled, idx))
        except (ShiftRiskError, np.linalg.LinAlgError, FloatingPointError) as exc:
            errors[b] = f"replicate {b}: {exc}"

    if threads == 1:
        for b in range(plan.replicates):
            attempt(b)
    else:
        workers = threads if threads > 0 else None
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(attempt, range(plan.replicates)))

    estimates = [v for v in results if v is not None]
    failures = [errors[b] for b in sorted(errors)]
    n_failed = len(failures)
    if n_failed > MAX_FAILURE_FRACTION * plan.replicates or len(estimates) < 2:
        shown = "; ".join(failures[:5])
        raise BootstrapError(
            f"{n_failed} of {plan.replicates} bootstrap replicates failed "
            f"(> {MAX_FAILURE_FRACTION:.0%} or too few successes): {shown}"
        )
    ests = np.asarray(estimates)
    se = float(np.std(ests, ddof=1))
    if plan.ci_method == PERCENTILE:
        lo, hi = np.quantile(ests, [0.025, 0.975], method="inverted_cdf")
    else:
        lo, hi = psi_hat - Z_95 * se, psi_hat + Z_95 * se
    ests.flags.writeable = False
    return BootstrapResult(
        se=se,
        ci_lower=float(lo),
        ci_upper=float(hi),
        estimates=ests,
        n_failed=n_failed,
        failures=tuple(failures),
    )
