"""Least-squares projection on polynomial state features.

Conditional expectations inside one fixed-B outer cloud are estimated by
regressing targets on powers of the current W value (optionally several
feature columns).  Fits go through an SVD (orthogonal factorization, never
normal equations); a near-singular design falls back to a small ridge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

#: condition number beyond which the ridge fallback kicks in
RIDGE_CONDITION_LIMIT = 1e12

#: ridge parameter scale, multiplied by trace(X^T X) / n_columns
RIDGE_SCALE = 1e-8

MAX_DEGREE = 10


@dataclass(frozen=True)
class BasisSpec:
    degree: int = 3
    family: str = "polynomial"
    feature_map: str = "w"  # "w" = current W value; "w_y" adds a running Y column

    def __post_init__(self):
        if self.family != "polynomial":
            raise InvalidArgument(f"unsupported basis family {self.family!r}")
        if not (0 <= self.degree <= MAX_DEGREE):
            raise InvalidArgument(f"degree must be in [0, {MAX_DEGREE}], got {self.degree}")


@dataclass(frozen=True)
class RegressionFit:
    coefficients: np.ndarray
    basis: BasisSpec
    condition_diagnostic: float
    ridge_used: bool
    n_features: int


def _feature_matrix(features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InvalidArgument("features must be a vector or a (samples, q) matrix")
    return x


def design_matrix(features, basis: BasisSpec) -> np.ndarray:
    """Columns: all-ones intercept, then x_j^p for each feature j, p = 1..degree."""
    x = _feature_matrix(features)
    if x.shape[0] == 0:
        raise InvalidArgument("at least one sample is required")
    cols = [np.ones(x.shape[0])]
    for j in range(x.shape[1]):
        xp = x[:, j].copy()
        for _ in range(basis.degree):
            cols.append(xp.copy())
            xp *= x[:, j]
    return np.column_stack(cols)


def _svd_solve(X: np.ndarray, targets: np.ndarray):
    """Least squares through SVD with ridge fallback; targets may be 2-D."""
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    smin = s[-1]
    cond = np.inf if smin == 0.0 else s[0] / smin
    ridge_used = bool(cond > RIDGE_CONDITION_LIMIT)
    if ridge_used:
        lam = RIDGE_SCALE * float(np.sum(s ** 2)) / X.shape[1]
        filt = s / (s ** 2 + lam)
    else:
        filt = 1.0 / s
    coef = (Vt.T * filt) @ (U.T @ targets)
    return coef, float(cond), ridge_used


def fit(features, targets, basis: BasisSpec) -> RegressionFit:
    """Least-squares minimizer of ||X beta - targets||."""
    X = design_matrix(features, basis)
    y = np.asarray(targets, dtype=np.float64)
    if y.shape[0] != X.shape[0]:
        raise InvalidArgument("features and targets must have equal sample counts")
    if X.shape[0] < X.shape[1]:
        raise InvalidArgument(
            f"need at least {X.shape[1]} samples for {X.shape[1]} basis functions, "
            f"got {X.shape[0]}")
    coef, cond, ridge_used = _svd_solve(X, y)
    return RegressionFit(
        coefficients=coef, basis=basis, condition_diagnostic=cond,
        ridge_used=ridge_used, n_features=_feature_matrix(features).shape[1])


def predict(fitted: RegressionFit, features) -> np.ndarray:
    x = _feature_matrix(features)
    if x.shape[1] != fitted.n_features:
        raise InvalidArgument(
            f"fit used {fitted.n_features} feature column(s), got {x.shape[1]}")
    return design_matrix(x, fitted.basis) @ fitted.coefficients


def estimate_z(next_Y, dW_k, dt: float, features, basis: BasisSpec) -> np.ndarray:
    """Per-sample Z estimate at a node via E[Y_{k+1} dW_k | features] / dt.

    Component j is the regression prediction of next_Y * dW_k[:, j] / dt.
    """
    if not dt > 0:
        raise InvalidArgument("dt must be positive")
    y = np.asarray(next_Y, dtype=np.float64)
    dw = np.asarray(dW_k, dtype=np.float64)
    if dw.ndim == 1:
        dw = dw[:, None]
    targets = y[:, None] * dw / dt
    X = design_matrix(features, basis)
    if X.shape[0] < X.shape[1]:
        raise InvalidArgument("fewer samples than basis functions")
    coef, _, _ = _svd_solve(X, targets)
    return X @ coef


# ---------------------------------------------------------------------------
# batched projection used by the backward sweep (one fit per outer sample)
# ---------------------------------------------------------------------------

def batched_projection(X: np.ndarray, targets: np.ndarray):
    """Project targets onto design columns, independently per leading index.

    X has shape (m, n, p) and targets (m, n, r); returns (predictions,
    condition numbers, ridge mask).  Each slice reproduces exactly what
    fit + predict on the same cloud would give.
    """
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    smin = s[:, -1]
    with np.errstate(divide="ignore"):
        cond = np.where(smin > 0.0, s[:, 0] / np.where(smin > 0, smin, 1.0), np.inf)
    ridge = cond > RIDGE_CONDITION_LIMIT
    filt = np.empty_like(s)
    ok = ~ridge
    filt[ok] = 1.0 / s[ok]
    if np.any(ridge):
        lam = RIDGE_SCALE * np.sum(s[ridge] ** 2, axis=1, keepdims=True) / X.shape[2]
        filt[ridge] = s[ridge] / (s[ridge] ** 2 + lam)
    UtY = U.transpose(0, 2, 1) @ targets
    coef = (Vt.transpose(0, 2, 1) * filt[:, None, :]) @ UtY
    return X @ coef, cond, ridge
