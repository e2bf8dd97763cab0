"""Multivariate partial-least-squares regression (PLS2) with LOO-CV.

Predictors and responses are z-scored internally, so predictions are
invariant under affine rescaling of any raw column. Components are
extracted by the classical NIPALS iteration with deflation; the weight
vector sign is fixed so its largest-magnitude entry is positive, which
makes scores and loadings reproducible.

R-squared follows the out-of-fold convention: the total sum of squares
is taken around the training-fold mean of the held-out columns, so
non-predictive features can yield negative values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

_NIPALS_TOL = 1e-12
_NIPALS_MAX_ITER = 2000
_TIE_TOL = 1e-9


def _as_matrix(A, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional")
    if not np.isfinite(A).all():
        raise DataError(f"{name} contains missing or non-finite values")
    return A


def _standardize(A: np.ndarray, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = A.mean(axis=0)
    std = A.std(axis=0, ddof=1) if A.shape[0] > 1 else np.ones(A.shape[1])
    zero = np.flatnonzero(std == 0)
    if zero.size:
        raise DataError(f"zero-variance column(s) in {name}: {zero.tolist()}")
    return (A - mean) / std, mean, std


def _fix_sign(w: np.ndarray) -> float:
    return 1.0 if w[np.argmax(np.abs(w))] >= 0 else -1.0


class PLS2Regression:
    """PLS2 regression estimator with fit/predict and get_params."""

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def get_params(self, deep: bool = True) -> dict:
        return {"n_components": self.n_components}

    def set_params(self, **params) -> "PLS2Regression":
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"invalid parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, X, Y) -> "PLS2Regression":
        X = _as_matrix(X, "X")
        Y = _as_matrix(Y, "Y")
        if X.shape[0] != Y.shape[0]:
            raise ValueError("X and Y must have the same number of rows")
        n, p = X.shape
        k = self.n_components
        if k < 0:
            raise ValueError("n_components must be >= 0")
        if k > min(n - 1, p):
            raise ValueError(f"n_components={k} exceeds min(rows-1, predictors)={min(n - 1, p)}")

        Xz, self.x_mean_, self.x_std_ = _standardize(X, "X")
        Yz, self.y_mean_, self.y_std_ = _standardize(Y, "Y")

        Xr, Yr = Xz.copy(), Yz.copy()
        W, P, Q, T = [], [], [], []
        for _ in range(k):
            if np.linalg.norm(Yr) < 1e-12 or np.linalg.norm(Xr) < 1e-12:
                break  # residual exhausted; later components would be null
            u = Yr[:, np.argmax((Yr * Yr).sum(axis=0))]
            w = np.zeros(p)
            for _ in range(_NIPALS_MAX_ITER):
                w_new = Xr.T @ u
                norm = np.linalg.norm(w_new)
                if norm == 0:
                    break
                w_new /= norm
                t = Xr @ w_new
                q = Yr.T @ t / (t @ t)
                u = Yr @ q / (q @ q) if q @ q > 0 else t
                if np.linalg.norm(w_new - w) < _NIPALS_TOL:
                    w = w_new
                    break
                w = w_new
            sign = _fix_sign(w)
            w = sign * w
            t = Xr @ w
            tt = t @ t
            if tt == 0:
                break
            p_load = Xr.T @ t / tt
            q_load = Yr.T @ t / tt
            Xr = Xr - np.outer(t, p_load)
            Yr = Yr - np.outer(t, q_load)
            W.append(w)
            P.append(p_load)
            Q.append(q_load)
            T.append(t)

        self.n_components_ = len(W)
        m = Y.shape[1]
        if self.n_components_ == 0:
            self.x_weights_ = np.zeros((p, 0))
            self.x_loadings_ = np.zeros((p, 0))
            self.y_loadings_ = np.zeros((m, 0))
            self.scores_ = np.zeros((n, 0))
            self.coef_ = np.zeros((p, m))
        else:
            self.x_weights_ = np.column_stack(W)
            self.x_loadings_ = np.column_stack(P)
            self.y_loadings_ = np.column_stack(Q)
            self.scores_ = np.column_stack(T)
            # B = W (P'W)^-1 Q' in standardized space
            self.coef_ = (
                self.x_weights_
                @ np.linalg.solve(self.x_loadings_.T @ self.x_weights_, self.y_loadings_.T)
            )
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "coef_"):
            raise RuntimeError("PLS2Regression is not fitted; call fit() first")
        X = _as_matrix(X, "X")
        Xz = (X - self.x_mean_) / self.x_std_
        return (Xz @ self.coef_) * self.y_std_ + self.y_mean_


def fit(X, Y, n_components: int) -> PLS2Regression:
    return PLS2Regression(n_components).fit(X, Y)


@dataclass
class LooCvResult:
    """Held-out predictions and explained variance from leave-one-out CV."""

    predictions: np.ndarray  # (rows, response columns)
    overall_r2: float
    per_row_r2: np.ndarray  # one value per left-out row
    per_slice_r2: np.ndarray  # one value per response column


def loo_cv(X, Y, n_components: int) -> LooCvResult:
    """Leave-one-row-out cross-validation of the PLS fit.

    Each fold refits on the remaining rows and predicts the held-out
    row. SST is computed around the training-fold mean of the held-out
    columns, pooled for the overall and per-slice values.
    """
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    n = X.shape[0]
    if n < 3:
        raise DataError("leave-one-out CV needs at least 3 rows")
    preds = np.empty_like(Y)
    base = np.empty_like(Y)  # held-out values minus training-fold means
    for i in range(n):
        mask = np.ones(n, dtype=bool)
        mask[i] = False
        model = PLS2Regression(n_components).fit(X[mask], Y[mask])
        preds[i] = model.predict(X[i : i + 1])[0]
        base[i] = Y[i] - Y[mask].mean(axis=0)
    resid = Y - preds
    overall = 1.0 - (resid**2).sum() / (base**2).sum()
    per_row = 1.0 - (resid**2).sum(axis=1) / (base**2).sum(axis=1)
    per_slice = 1.0 - (resid**2).sum(axis=0) / (base**2).sum(axis=0)
    return LooCvResult(preds, float(overall), per_row, per_slice)


def select_components(X, Y, k_max: int) -> int:
    """Number of components maximizing LOO-CV overall R-squared.

    Near-ties (within 1e-9) are broken toward the smaller k.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    X = _as_matrix(X, "X")
    k_cap = min(k_max, X.shape[0] - 2, X.shape[1])
    best_k, best_r2 = 1, -np.inf
    for k in range(1, k_cap + 1):
        r2 = loo_cv(X, Y, k).overall_r2
        if r2 > best_r2 + _TIE_TOL:
            best_k, best_r2 = k, r2
    return best_k


def correlation_matrix(X) -> np.ndarray:
    """Pearson correlations between predictor columns."""
    X = _as_matrix(X, "X")
    if X.shape[0] < 2:
        raise DataError("correlation matrix needs at least 2 rows")
    if (X.std(axis=0) == 0).any():
        raise DataError("zero-variance column in X")
    return np.corrcoef(X, rowvar=False)
