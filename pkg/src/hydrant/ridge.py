"""Closed-form one-vs-rest ridge classifier with leave-one-out GCV."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _blob

__all__ = [
    "DEFAULT_LAMBDAS",
    "RidgeModel",
    "ridge_fit",
    "ridge_scores",
    "ridge_predict",
    "ridge_objective",
    "one_vs_rest_targets",
]

DEFAULT_LAMBDAS = tuple(np.logspace(-3, 3, 10))


@dataclass(eq=False)
class RidgeModel:
    """Linear scores ``((Z - mean) / scale) @ coef + intercept``."""

    coef: np.ndarray
    intercept: np.ndarray
    alpha: float
    mean: np.ndarray
    scale: np.ndarray
    gcv_errors: np.ndarray | None = None

    @property
    def n_features(self):
        return self.coef.shape[0]

    @property
    def n_classes(self):
        return self.coef.shape[1]

    @property
    def n_parameters(self):
        return self.coef.size + self.intercept.size

    def standardize(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got shape {Z.shape}")
        return (Z - self.mean) / self.scale

    def decision_function(self, Z):
        return self.standardize(Z) @ self.coef + self.intercept

    def predict(self, Z):
        return np.argmax(self.decision_function(Z), axis=1)

    def to_bytes(self):
        arrays = {
            "coef": self.coef,
            "intercept": self.intercept,
            "mean": self.mean,
            "scale": self.scale,
        }
        return _blob.pack("ridge", {"alpha": float(self.alpha)}, arrays)

    @classmethod
    def from_bytes(cls, blob):
        _, meta, a = _blob.unpack(blob, "ridge")
        return cls(a["coef"], a["intercept"], meta["alpha"], a["mean"], a["scale"])


def one_vs_rest_targets(y, n_classes):
    Y = -np.ones((len(y), n_classes))
    Y[np.arange(len(y)), y] = 1.0
    return Y


def ridge_objective(Z, Y, coef, lam, intercept=0.0):
    resid = Z @ coef + intercept - Y
    return float(np.sum(resid**2) + lam * np.sum(coef**2))


def ridge_fit(
    Z,
    y,
    lambdas=DEFAULT_LAMBDAS,
    n_classes=None,
    standardize=True,
    fit_intercept=True,
):
    """Fit ridge regression on +-1 one-vs-rest targets.

    Parameters
    ----------
    Z : ndarray of shape (n, q)
    y : ndarray of shape (n,)
        Integer labels in ``[0, n_classes)``.
    lambdas : sequence of float
        Candidate regularization strengths; the one with the smallest
        leave-one-out squared error is kept (first on ties).
    standardize : bool
        Scale columns to zero mean and unit variance before fitting. Columns
        with zero variance keep scale 1.
    fit_intercept : bool
        Fit an unpenalized intercept by centering.
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if Z.ndim != 2 or Z.shape[0] != y.shape[0]:
        raise ValueError("Z must be (n, q) with one label per row")
    n, q = Z.shape
    if n < 2:
        raise ValueError("ridge needs at least two instances")
    if not np.isfinite(Z).all():
        raise ValueError("Z contains non-finite values")
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=np.float64))
    if lambdas.size == 0 or (lambdas < 0).any():
        raise ValueError("lambdas must be a non-empty list of values >= 0")
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    if np.unique(y).size < 2:
        raise ValueError("ridge needs at least two distinct classes")

    # without an intercept the columns are scaled but not centered
    mean = Z.mean(axis=0) if fit_intercept else np.zeros(q)
    if standardize:
        std = Z.std(axis=0)
        scale = np.where(std > 0, std, 1.0)
    else:
        scale = np.ones(q)
    Zs = (Z - mean) / scale

    Y = one_vs_rest_targets(y, n_classes)
    y_mean = Y.mean(axis=0) if fit_intercept else np.zeros(n_classes)
    Yc = Y - y_mean

    U, s, Vt = np.linalg.svd(Zs, full_matrices=False)
    tol = s.max(initial=0.0) * max(n, q) * np.finfo(np.float64).eps
    s = np.where(s > tol, s, 0.0)
    UtY = U.T @ Yc
    s2 = s**2

    errors = np.empty(lambdas.size)
    for i, lam in enumerate(lambdas):
        shrink = np.divide(s2, s2 + lam, out=np.zeros_like(s2), where=s2 > 0)
        fitted = U @ (shrink[:, None] * UtY) + y_mean
        hat = (U**2) @ shrink + (1.0 / n if fit_intercept else 0.0)
        denom = 1.0 - hat
        with np.errstate(divide="ignore", invalid="ignore"):
            loo = (Y - fitted) / denom[:, None]
        errors[i] = np.mean(loo**2) if np.all(denom > 1e-12) else np.inf
    best = int(np.argmin(errors)) if np.isfinite(errors).any() else 0
    lam = lambdas[best]

    inv = np.divide(s, s2 + lam, out=np.zeros_like(s), where=s > 0)
    coef = Vt.T @ (inv[:, None] * UtY)
    return RidgeModel(coef, y_mean.copy(), float(lam), mean, scale, errors)


def ridge_scores(model, Z):
    return model.decision_function(Z)


def ridge_predict(model, Z):
    return model.predict(Z)
