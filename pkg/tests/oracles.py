"""Independent reference implementations used by the tests."""

import numpy as np


def ridge_gradient_descent(Z, Y, lam, fit_intercept=True, tol=1e-13, max_iter=500_000):
    """Minimize ||Z b + c - Y||^2 + lam ||b||^2 by plain gradient descent.

    Deliberately shares nothing with the closed-form solver: no SVD, no
    centering trick, the intercept is just another (unpenalized) parameter.
    """
    n, q = Z.shape
    X = np.hstack([Z, np.ones((n, 1))]) if fit_intercept else Z
    penalty = np.full(X.shape[1], lam)
    if fit_intercept:
        penalty[-1] = 0.0
    # Lipschitz constant of the gradient (power iteration would do as well)
    L = 2 * (np.linalg.norm(X, 2) ** 2 + lam)
    W = np.zeros((X.shape[1], Y.shape[1]))
    for _ in range(max_iter):
        grad = 2 * X.T @ (X @ W - Y) + 2 * penalty[:, None] * W
        step = grad / L
        W -= step
        if np.abs(step).max() < tol:
            break
    return (W[:-1], W[-1]) if fit_intercept else (W, np.zeros(Y.shape[1]))


def standardize(Z):
    mean = Z.mean(axis=0)
    std = Z.std(axis=0)
    return (Z - mean) / np.where(std > 0, std, 1.0)
