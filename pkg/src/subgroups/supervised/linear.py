"""Linear classifiers for the comparison harness: LDA, a hinge-loss SVM and a logistic wrapper."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..data import DesignMatrix
from ..errors import SingleClass, SingularCovariance, TooFewRows
from .logistic import fit_logistic

MAX_CONDITION = 1e12


class LDA:
    """Two-class linear discriminant with pooled covariance.

    ``decision_function`` is the log posterior odds under the Gaussian
    shared-covariance model, so class 1 is predicted when it is positive.
    """

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        X0, X1 = X[y == 0], X[y == 1]
        n0, n1 = len(X0), len(X1)
        if n0 < 2 or n1 < 2:
            raise TooFewRows(f"LDA needs >= 2 rows per class, got {n0} and {n1}")
        self.mean0_, self.mean1_ = X0.mean(axis=0), X1.mean(axis=0)
        D0, D1 = X0 - self.mean0_, X1 - self.mean1_
        S = (D0.T @ D0 + D1.T @ D1) / (n0 + n1 - 2)
        if S.size and np.linalg.cond(S) > MAX_CONDITION:
            raise SingularCovariance("pooled covariance is not invertible")
        self.coef_ = np.linalg.solve(S, self.mean1_ - self.mean0_) if S.size else np.zeros(0)
        self.intercept_ = float(-self.coef_ @ (self.mean0_ + self.mean1_) / 2 + np.log(n1 / n0))
        return self

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0).astype(np.int64)


class LinearSVM:
    """L2-regularised hinge loss minimised by mini-batch subgradient descent.

    Objective: ``lam/2 |w|^2 + mean(max(0, 1 - t (w.x + b)))`` with
    ``t = +-1`` and ``lam = 1 / (C n)``, which is the usual
    ``1/2 |w|^2 + C sum(hinge)`` rescaled. Batches follow one seeded
    permutation reused every epoch. An epoch whose end objective is higher
    than the previous one is rolled back and the step size halved, so the
    recorded objective never increases.
    """

    def __init__(self, C=1.0, epochs=50, seed=0, batch_size=32, step=1.0):
        self.C = C
        self.epochs = epochs
        self.seed = seed
        self.batch_size = batch_size
        self.step = step

    def objective(self, X, t, w, b) -> float:
        margin = t * (X @ w + b)
        return float(self.lam_ / 2 * (w @ w) + np.maximum(0.0, 1.0 - margin).mean())

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        n, d = X.shape
        if n == 0:
            raise TooFewRows("cannot fit on zero rows")
        if y.min() == y.max():
            raise SingleClass("SVM needs both classes")
        t = 2.0 * y - 1.0
        self.lam_ = 1.0 / (self.C * n)
        order = np.random.default_rng(self.seed).permutation(n)
        batches = [order[i:i + self.batch_size] for i in range(0, n, self.batch_size)]
        w, b = np.zeros(d), 0.0
        best = self.objective(X, t, w, b)
        self.objective_history_ = [best]
        eta = self.step
        step_count = 0
        for _ in range(self.epochs):
            w_new, b_new, count = w.copy(), b, step_count
            for idx in batches:
                count += 1
                lr = eta / (1.0 + self.lam_ * eta * count)
                Xb, tb = X[idx], t[idx]
                active = tb * (Xb @ w_new + b_new) < 1.0
                gw = self.lam_ * w_new - (tb[active, None] * Xb[active]).sum(axis=0) / idx.size
                gb = -tb[active].sum() / idx.size
                w_new = w_new - lr * gw
                b_new = b_new - lr * gb
            obj = self.objective(X, t, w_new, b_new)
            if obj <= best:
                w, b, best, step_count = w_new, b_new, obj, count
            else:
                eta /= 2.0
            self.objective_history_.append(best)
        self.coef_, self.intercept_ = w, b
        return self

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0).astype(np.int64)


class LogisticClassifier:
    """Prediction wrapper around :func:`fit_logistic` (no intercept column in ``X``)."""

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        names = tuple(f"x{j}" for j in range(X.shape[1]))
        self.fit_ = fit_logistic(DesignMatrix(names, X, np.asarray(y, dtype=np.int64), names))
        return self

    def predict_proba(self, X) -> np.ndarray:
        return self.fit_.predict_proba(X)

    def decision_function(self, X) -> np.ndarray:
        return self.predict_proba(X)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)


class Majority:
    """Constant predictor of the training positive rate; a base-rate reference."""

    def fit(self, X, y):
        self.rate_ = float(np.mean(y))
        return self

    def decision_function(self, X) -> np.ndarray:
        return np.full(np.asarray(X).shape[0], self.rate_)

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0.5).astype(np.int64)
