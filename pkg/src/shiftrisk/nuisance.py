"""Nuisance estimation.

Two nuisance functions drive the risk estimators: the source-membership
probability ``p(x) = Pr[D=1 | X=x]`` and the conditional expected loss
``h(x) = E[L(Y, g(X)) | X=x, D=1]``. Both are fit by (optionally
survey-weighted) logistic or least-squares regression over one of three
feature maps, with optional cross-fitting so that nuisance predictions
on a row never come from a fit that saw that row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .core import SQUARED, Dataset, expit
from .errors import (
    FoldError,
    InvalidArgumentError,
    SeparationError,
    SingularDesignError,
)

LINEAR = "linear"
QUADRATIC = "quadratic"
SPLINE = "spline"
FEATURE_MAPS = (LINEAR, QUADRATIC, SPLINE)

BINARY = "binary"  # model Pr[Y=1|X,D=1] and convert (squared loss only)
DIRECT = "direct"  # regress observed losses on the feature map
H_STRATEGIES = (BINARY, DIRECT)

SCORE_TOL = 1e-8
MAX_ITER = 100
MAX_HALVINGS = 30
COEF_CAP = 1e2
WEIGHT_FLOOR = 1e-10
DEFAULT_EPSILON = 1e-4
RIDGE_GRID = (1e-4, 1e-2, 1.0)
RIDGE_AUTO = "auto"
SPLINE_DEGREE = 3
SPLINE_INTERIOR_KNOTS = 5

# Internal seed for the ridge-grid validation folds: selection must be a
# deterministic function of the training-set size alone.
_RIDGE_CV_SEED = 0x5EED
_RIDGE_CV_FOLDS = 3


# ---------------------------------------------------------------------------
# Feature maps


@dataclass(frozen=True)
class DesignInfo:
    """Frozen recipe for building a design matrix on new rows.

    For the spline map, ``knots`` holds one clamped knot vector per
    covariate; its endpoints are the training range used for clamping.
    """

    kind: str
    n_covariates: int
    degree: int = SPLINE_DEGREE
    knots: tuple[tuple[float, ...], ...] | None = None

    @property
    def n_columns(self) -> int:
        d = self.n_covariates
        if self.kind == LINEAR:
            return d + 1
        if self.kind == QUADRATIC:
            return 2 * d + 1
        per = len(self.knots[0]) - self.degree - 1 if d else 0
        return 1 + d * per

    def column_names(self, covariates: list[str] | None = None) -> list[str]:
        names = covariates or [f"x{j + 1}" for j in range(self.n_covariates)]
        if len(names) != self.n_covariates:
            raise InvalidArgumentError(
                f"expected {self.n_covariates} covariate names, got {len(names)}"
            )
        out = ["intercept"]
        if self.kind == LINEAR:
            out += names
        elif self.kind == QUADRATIC:
            out += names + [f"{nm}^2" for nm in names]
        else:
            per = (self.n_columns - 1) // max(self.n_covariates, 1)
            for nm in names:
                out += [f"{nm}:s{i + 1}" for i in range(per)]
        return out


def design_info(
    kind: str,
    x: np.ndarray,
    *,
    interior_knots: int = SPLINE_INTERIOR_KNOTS,
    degree: int = SPLINE_DEGREE,
) -> DesignInfo:
    """Derive the design recipe for ``kind`` from the fitting rows ``x``.

    Only the spline map actually consults the data: each covariate gets
    ``interior_knots`` knots at equally spaced quantiles of its fitting
    values, clamped cubic-style with ``degree + 1`` copies of each
    boundary.
    """
    if kind not in FEATURE_MAPS:
        raise InvalidArgumentError(f"unknown feature map {kind!r}; expected one of {FEATURE_MAPS}")
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise InvalidArgumentError(f"x must be 2-D, got ndim={x.ndim}")
    d = x.shape[1]
    if kind != SPLINE:
        return DesignInfo(kind=kind, n_covariates=d)
    if x.shape[0] == 0:
        raise InvalidArgumentError("spline knots need at least one fitting row")
    if interior_knots < 1 or degree < 1:
        raise InvalidArgumentError("spline needs interior_knots >= 1 and degree >= 1")
    levels = np.arange(1, interior_knots + 1) / (interior_knots + 1)
    all_knots = []
    for j in range(d):
        col = x[:, j]
        lo, hi = float(col.min()), float(col.max())
        if hi <= lo:
            hi = lo + 1.0
        interior = np.quantile(col, levels)
        vec = np.concatenate([[lo] * (degree + 1), interior, [hi] * (degree + 1)])
        all_knots.append(tuple(float(v) for v in vec))
    return DesignInfo(kind=SPLINE, n_covariates=d, degree=degree, knots=tuple(all_knots))


def bspline_basis(values: np.ndarray, knots, degree: int) -> np.ndarray:
    """Evaluate every B-spline basis function of ``degree`` at ``values``.

    Cox-de Boor recursion with the 0/0 = 0 convention for repeated
    knots; the last non-empty interval is right-closed so the upper
    boundary itself is covered. Callers clamp inputs into the knot
    range, under which the rows sum to 1 (partition of unity).
    """
    v = np.asarray(values, dtype=float)
    t = np.asarray(knots, dtype=float)
    b = np.zeros((v.size, len(t) - 1))
    for j in range(len(t) - 1):
        if t[j] < t[j + 1]:
            b[:, j] = (v >= t[j]) & (v < t[j + 1])
    nonempty = np.flatnonzero(t[:-1] < t[1:])
    if nonempty.size:
        j = nonempty[-1]
        b[:, j] = (v >= t[j]) & (v <= t[j + 1])
    for k in range(1, degree + 1):
        nxt = np.zeros((v.size, len(t) - k - 1))
        for j in range(len(t) - k - 1):
            acc = None
            den1 = t[j + k] - t[j]
            if den1 > 0:
                acc = (v - t[j]) / den1 * b[:, j]
            den2 = t[j + k + 1] - t[j + 1]
            if den2 > 0:
                term = (t[j + k + 1] - v) / den2 * b[:, j + 1]
                acc = term if acc is None else acc + term
            if acc is not None:
                nxt[:, j] = acc
        b = nxt
    return b


def build_design(info: DesignInfo, x: np.ndarray) -> np.ndarray:
    """Design matrix for rows ``x`` under ``info``.

    Column 0 is the intercept; then covariates in order (linear and
    quadratic maps), then one block per covariate (squares, or the
    spline basis with inputs clamped to the training range).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != info.n_covariates:
        raise InvalidArgumentError(
            f"x must have shape (n, {info.n_covariates}), got {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("covariates must be finite")
    n = x.shape[0]
    ones = np.ones((n, 1))
    if info.kind == LINEAR:
        return np.hstack([ones, x])
    if info.kind == QUADRATIC:
        return np.hstack([ones, x, x**2])
    blocks = [ones]
    for j in range(info.n_covariates):
        t = np.asarray(info.knots[j])
        clamped = np.clip(x[:, j], t[0], t[-1])
        blocks.append(bspline_basis(clamped, t, info.degree))
    return np.hstack(blocks)


# ---------------------------------------------------------------------------
# Weighted logistic regression by IRLS


@dataclass(frozen=True)
class LogisticFit:
    """Result of one IRLS run.

    ``loglik_path`` holds the penalized log-likelihood at the start and
    after each accepted step; it is non-decreasing. ``converged`` is
    reported honestly: True only when ``max_abs_score`` met the
    tolerance within the iteration budget.
    """

    beta: np.ndarray
    converged: bool
    n_iter: int
    max_abs_score: float
    loglik_path: tuple[float, ...]


def fit_logistic_irls(design, labels, obs_weights=None, ridge: float = 0.0) -> LogisticFit:
    """Maximize the weighted log-likelihood minus ``(ridge/2)·‖β₊‖²``
    (intercept unpenalized) by Newton steps with step-halving.

    Stops when the score's ∞-norm falls below 1e-8 or after 100
    iterations. With ``ridge == 0``, constant labels or a coefficient
    norm above 100 raise :class:`SeparationError`, and singular normal
    equations raise :class:`SingularDesignError`.
    """
    x = np.asarray(design, dtype=float)
    y = np.asarray(labels, dtype=float)
    n, m = x.shape
    w = np.ones(n) if obs_weights is None else np.asarray(obs_weights, dtype=float)
    if y.shape != (n,) or w.shape != (n,):
        raise InvalidArgumentError("labels and obs_weights must match the design rows")
    if not np.all((y == 0) | (y == 1)):
        raise InvalidArgumentError("labels must be binary (0/1)")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise InvalidArgumentError("obs_weights must be positive and finite")
    if ridge < 0:
        raise InvalidArgumentError(f"ridge must be >= 0, got {ridge}")
    if ridge == 0:
        if n < m:
            raise SingularDesignError(
                f"unpenalized fit needs at least as many rows ({n}) as columns ({m}); use ridge > 0"
            )
        if np.all(y == y[0]):
            raise SeparationError(
                "labels are constant; the unpenalized likelihood has no maximizer (use ridge > 0)"
            )

    pen = np.full(m, float(ridge))
    pen[0] = 0.0

    def objective(beta, z):
        return float(np.sum(w * (y * z - np.logaddexp(0.0, z))) - 0.5 * np.sum(pen * beta**2))

    beta = np.zeros(m)
    z = x @ beta
    ll = objective(beta, z)
    path = [ll]
    converged = False
    steps = 0
    max_abs_score = np.inf
    while True:
        p = expit(z)
        score = x.T @ (w * (y - p)) - pen * beta
        max_abs_score = float(np.max(np.abs(score)))
        if max_abs_score <= SCORE_TOL:
            converged = True
            break
        if steps >= MAX_ITER:
            break
        curvature = w * np.maximum(p * (1.0 - p), WEIGHT_FLOOR)
        hess = (x.T * curvature) @ x
        hess[np.diag_indices_from(hess)] += pen
        try:
            delta = np.linalg.solve(hess, score)
        except np.linalg.LinAlgError:
            raise SingularDesignError(
                "weighted normal equations are numerically singular; use ridge > 0"
            ) from None
        step = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            cand = beta + step * delta
            z_cand = x @ cand
            ll_cand = objective(cand, z_cand)
            if ll_cand >= ll:
                accepted = True
                break
            step /= 2.0
        if not accepted:
            break
        beta, z, ll = cand, z_cand, ll_cand
        steps += 1
        path.append(ll)
        if ridge == 0 and np.max(np.abs(beta)) > COEF_CAP:
            raise SeparationError(
                "coefficients diverged (norm cap exceeded); data are separated (use ridge > 0)"
            )
    return LogisticFit(
        beta=beta,
        converged=converged,
        n_iter=steps,
        max_abs_score=max_abs_score,
        loglik_path=tuple(path),
    )


def predict_prob(fit: LogisticFit, design) -> np.ndarray:
    """Fitted probabilities ``expit(design @ beta)`` for new rows."""
    design = np.asarray(design, dtype=float)
    if design.shape[-1] != fit.beta.shape[0]:
        raise InvalidArgumentError(
            f"design width {design.shape[-1]} does not match fit width {fit.beta.shape[0]}"
        )
    return expit(design @ fit.beta)


def fit_least_squares(design, targets, obs_weights=None, ridge: float = 0.0) -> np.ndarray:
    """Weighted ridge least squares (intercept unpenalized); returns β."""
    x = np.asarray(design, dtype=float)
    t = np.asarray(targets, dtype=float)
    n, m = x.shape
    w = np.ones(n) if obs_weights is None else np.asarray(obs_weights, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InvalidArgumentError("regression targets must be finite")
    if ridge < 0:
        raise InvalidArgumentError(f"ridge must be >= 0, got {ridge}")
    if ridge == 0 and n < m:
        raise SingularDesignError(
            f"unpenalized fit needs at least as many rows ({n}) as columns ({m}); use ridge > 0"
        )
    pen = np.full(m, float(ridge))
    pen[0] = 0.0
    gram = (x.T * w) @ x
    gram[np.diag_indices_from(gram)] += pen
    try:
        return np.linalg.solve(gram, x.T @ (w * t))
    except np.linalg.LinAlgError:
        raise SingularDesignError(
            "weighted normal equations are numerically singular; use ridge > 0"
        ) from None


# ---------------------------------------------------------------------------
# Ridge selection for the spline map


def _cv_fold_of(n: int) -> np.ndarray:
    perm = rngmod.stream(_RIDGE_CV_SEED, n, rngmod.RIDGE).permutation(n)
    fold = np.empty(n, dtype=int)
    fold[perm] = np.arange(n) % _RIDGE_CV_FOLDS
    return fold


def select_ridge(design, targets, obs_weights, *, logistic: bool) -> float:
    """Pick the ridge penalty from ``RIDGE_GRID`` by 3-fold validation
    deviance (logistic) or weighted squared error (least squares).

    The fold split is a fixed deterministic function of the number of
    rows, so selection does not consume caller randomness. Ties go to
    the smaller penalty.
    """
    x = np.asarray(design, dtype=float)
    t = np.asarray(targets, dtype=float)
    n = x.shape[0]
    w = np.ones(n) if obs_weights is None else np.asarray(obs_weights, dtype=float)
    if n < _RIDGE_CV_FOLDS:
        return RIDGE_GRID[0]
    fold = _cv_fold_of(n)
    scores = np.zeros(len(RIDGE_GRID))
    for f in range(_RIDGE_CV_FOLDS):
        va = fold == f
        tr = ~va
        for i, lam in enumerate(RIDGE_GRID):
            if logistic:
                fit = fit_logistic_irls(x[tr], t[tr], w[tr], ridge=lam)
                z = x[va] @ fit.beta
                scores[i] += -2.0 * float(np.sum(w[va] * (t[va] * z - np.logaddexp(0.0, z))))
            else:
                beta = fit_least_squares(x[tr], t[tr], w[tr], ridge=lam)
                resid = t[va] - x[va] @ beta
                scores[i] += float(np.sum(w[va] * resid**2))
    return RIDGE_GRID[int(np.argmin(scores))]


def _resolve_ridge(ridge, design, targets, obs_weights, *, logistic: bool) -> float:
    if ridge == RIDGE_AUTO:
        return select_ridge(design, targets, obs_weights, logistic=logistic)
    return float(ridge)


# ---------------------------------------------------------------------------
# Prediction models (the external model g under evaluation)


@dataclass(frozen=True)
class FittedLogisticModel:
    """A logistic prediction model over a feature map.

    ``column_subset`` names the covariate columns the model consumes,
    in order; None means "all columns of the dataset, as given".
    """

    info: DesignInfo
    beta: np.ndarray
    column_subset: tuple[str, ...] | None = None
    converged: bool = True

    def predict_matrix(self, x: np.ndarray) -> np.ndarray:
        return expit(build_design(self.info, x) @ self.beta)


def fit_prediction_model(
    x,
    y,
    *,
    obs_weights=None,
    feature_map: str = LINEAR,
    ridge: float = 0.0,
    column_subset: tuple[str, ...] | None = None,
) -> FittedLogisticModel:
    """Fit a logistic prediction model for a binary outcome on ``x``."""
    x = np.asarray(x, dtype=float)
    info = design_info(feature_map, x)
    fit = fit_logistic_irls(build_design(info, x), y, obs_weights, ridge=ridge)
    return FittedLogisticModel(
        info=info, beta=fit.beta, column_subset=column_subset, converged=fit.converged
    )


def h_from_outcome_prob(q, g):
    """Conditional expected squared loss of a binary outcome:
    ``E[(Y−g)² | q] = q·(1−g)² + (1−q)·g² = q·(1−2g) + g²``."""
    q = np.asarray(q, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any((q < 0) | (q > 1)):
        raise InvalidArgumentError("q must lie in [0, 1]")
    out = q * (1.0 - 2.0 * g) + g**2
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Nuisance orchestration with optional cross-fitting


@dataclass(frozen=True)
class NuisanceConfig:
    """Everything needed to fit both nuisances on a dataset."""

    p_map: str = LINEAR
    h_map: str = LINEAR
    h_strategy: str = BINARY
    folds: int = 1
    epsilon: float = DEFAULT_EPSILON
    ridge_p: float | str = 0.0
    ridge_h: float | str = 0.0
    survey: bool = False
    interior_knots: int = SPLINE_INTERIOR_KNOTS
    degree: int = SPLINE_DEGREE

    def __post_init__(self):
        for kind in (self.p_map, self.h_map):
            if kind not in FEATURE_MAPS:
                raise InvalidArgumentError(f"unknown feature map {kind!r}")
        if self.h_strategy not in H_STRATEGIES:
            raise InvalidArgumentError(f"unknown h strategy {self.h_strategy!r}")
        if self.folds < 1:
            raise InvalidArgumentError(f"folds must be >= 1, got {self.folds}")
        if not 0 <= self.epsilon < 0.5:
            raise InvalidArgumentError(f"epsilon must be in [0, 0.5), got {self.epsilon}")


@dataclass(frozen=True)
class NuisanceEstimates:
    """Per-row nuisance predictions plus fit diagnostics."""

    p_hat: np.ndarray | None
    h_hat: np.ndarray | None
    fold_of: np.ndarray
    truncation_count: int
    p_converged: bool | None = None
    h_converged: bool | None = None
    ridge_p: tuple[float, ...] | None = None
    ridge_h: tuple[float, ...] | None = None


def assign_folds(dataset: Dataset, k: int, seed: int, replicate: int = 0) -> np.ndarray:
    """Stratified fold labels: each population's rows are shuffled and
    dealt round-robin, so every fold sees both populations whenever
    ``k <= min(n0, n1)``."""
    n0, n1 = dataset.n_target, dataset.n_source
    if k > min(n0, n1):
        raise FoldError(f"folds={k} exceeds min(n_target={n0}, n_source={n1})")
    gen = rngmod.stream(seed, replicate, rngmod.FOLDS)
    fold_of = np.zeros(dataset.n, dtype=int)
    for mask in (dataset.source_mask, dataset.target_mask):
        idx = np.flatnonzero(mask)
        gen.shuffle(idx)
        fold_of[idx] = np.arange(idx.size) % k
    return fold_of


def truncate_probs(p: np.ndarray, epsilon: float) -> tuple[np.ndarray, int]:
    """Clip probabilities into [ε, 1−ε]; returns (clipped, #changed)."""
    clipped = np.clip(p, epsilon, 1.0 - epsilon)
    return clipped, int(np.count_nonzero(clipped != p))


def estimate_nuisances(
    dataset: Dataset,
    *,
    config: NuisanceConfig,
    g_pred: np.ndarray | None = None,
    loss_values: np.ndarray | None = None,
    need_p: bool = True,
    need_h: bool = True,
    seed: int = 0,
    replicate: int = 0,
    fold_of: np.ndarray | None = None,
) -> NuisanceEstimates:
    """Fit p and/or h with optional cross-fitting and return per-row values.

    With ``folds == 1`` both nuisances are fit on all rows and predicted
    in-sample. With K folds, each row's prediction comes from a fit on
    the other K−1 folds (h on their source rows only; spline knots from
    the fitting rows only). ``fold_of`` overrides the seeded assignment
    and exists for exactness tests.

    The binary h strategy needs ``g_pred`` (model predictions, all
    rows); the direct strategy needs ``loss_values`` (observed losses,
    source rows).
    """
    n = dataset.n
    if fold_of is not None:
        fold_of = np.asarray(fold_of, dtype=int)
        if fold_of.shape != (n,):
            raise InvalidArgumentError(f"fold_of must have shape ({n},)")
        k = int(fold_of.max()) + 1
    else:
        k = config.folds
        fold_of = (
            np.zeros(n, dtype=int) if k == 1 else assign_folds(dataset, k, seed, replicate)
        )
    if k > 1:
        for f in range(k):
            in_fold = fold_of == f
            if not np.any(in_fold & dataset.source_mask) or not np.any(in_fold & dataset.target_mask):
                raise FoldError(f"fold {f} lacks a source or target row")

    if need_h:
        if config.h_strategy == BINARY:
            if g_pred is None:
                raise InvalidArgumentError("binary h strategy requires model predictions")
            g_pred = np.asarray(g_pred, dtype=float)
            src_y = dataset.y[dataset.source_mask]
            if not np.all((src_y == 0) | (src_y == 1)):
                raise InvalidArgumentError(
                    "binary h strategy requires a binary outcome on source rows"
                )
        elif loss_values is None:
            raise InvalidArgumentError("direct h strategy requires observed loss values")

    obs_w = dataset.w if config.survey else np.ones(n)
    p_hat = np.full(n, np.nan) if need_p else None
    h_hat = np.full(n, np.nan) if need_h else None
    p_conv, h_conv = True, True
    ridge_p_used: list[float] = []
    ridge_h_used: list[float] = []

    for f in range(k):
        predict_rows = np.flatnonzero(fold_of == f)
        train = np.ones(n, dtype=bool) if k == 1 else fold_of != f
        x_pred = dataset.x[predict_rows]

        if need_p:
            x_tr = dataset.x[train]
            info = design_info(
                config.p_map, x_tr, interior_knots=config.interior_knots, degree=config.degree
            )
            design_tr = build_design(info, x_tr)
            lam = _resolve_ridge(
                config.ridge_p, design_tr, dataset.d[train], obs_w[train], logistic=True
            )
            fit = fit_logistic_irls(design_tr, dataset.d[train], obs_w[train], ridge=lam)
            p_conv &= fit.converged
            ridge_p_used.append(lam)
            p_hat[predict_rows] = predict_prob(fit, build_design(info, x_pred))

        if need_h:
            tr_src = train & dataset.source_mask
            x_tr = dataset.x[tr_src]
            info = design_info(
                config.h_map, x_tr, interior_knots=config.interior_knots, degree=config.degree
            )
            design_tr = build_design(info, x_tr)
            design_pred = build_design(info, x_pred)
            if config.h_strategy == BINARY:
                lam = _resolve_ridge(
                    config.ridge_h, design_tr, dataset.y[tr_src], obs_w[tr_src], logistic=True
                )
                fit = fit_logistic_irls(design_tr, dataset.y[tr_src], obs_w[tr_src], ridge=lam)
                h_conv &= fit.converged
                q = predict_prob(fit, design_pred)
                h_hat[predict_rows] = h_from_outcome_prob(q, g_pred[predict_rows])
            else:
                losses_tr = np.asarray(loss_values, dtype=float)[tr_src]
                lam = _resolve_ridge(
                    config.ridge_h, design_tr, losses_tr, obs_w[tr_src], logistic=False
                )
                beta = fit_least_squares(design_tr, losses_tr, obs_w[tr_src], ridge=lam)
                h_hat[predict_rows] = np.maximum(design_pred @ beta, 0.0)
            ridge_h_used.append(lam)

    truncation_count = 0
    if need_p:
        p_hat, truncation_count = truncate_probs(p_hat, config.epsilon)
    return NuisanceEstimates(
        p_hat=p_hat,
        h_hat=h_hat,
        fold_of=fold_of,
        truncation_count=truncation_count,
        p_converged=p_conv if need_p else None,
        h_converged=h_conv if need_h else None,
        ridge_p=tuple(ridge_p_used) if need_p else None,
        ridge_h=tuple(ridge_h_used) if need_h else None,
    )


def fit_p(
    dataset: Dataset,
    feature_map: str = LINEAR,
    *,
    survey: bool = False,
    ridge: float | str = 0.0,
    epsilon: float = DEFAULT_EPSILON,
    folds: int = 1,
    seed: int = 0,
) -> NuisanceEstimates:
    """Source-membership probabilities for every row (see
    :func:`estimate_nuisances`)."""
    config = NuisanceConfig(
        p_map=feature_map, folds=folds, epsilon=epsilon, ridge_p=ridge, survey=survey
    )
    return estimate_nuisances(dataset, config=config, need_p=True, need_h=False, seed=seed)


def fit_h(
    dataset: Dataset,
    g_pred: np.ndarray,
    loss: str,
    feature_map: str = LINEAR,
    strategy: str = BINARY,
    *,
    loss_values: np.ndarray | None = None,
    survey: bool = False,
    ridge: float | str = 0.0,
    folds: int = 1,
    seed: int = 0,
) -> NuisanceEstimates:
    """Conditional expected loss for every row, fit on source rows (see
    :func:`estimate_nuisances`)."""
    if strategy == BINARY and loss != SQUARED:
        raise InvalidArgumentError("binary h strategy applies to squared loss only")
    config = NuisanceConfig(
        h_map=feature_map, h_strategy=strategy, folds=folds, survey=survey, ridge_h=ridge
    )
    return estimate_nuisances(
        dataset,
        config=config,
        g_pred=g_pred,
        loss_values=loss_values,
        need_p=False,
        need_h=True,
        seed=seed,
    )
