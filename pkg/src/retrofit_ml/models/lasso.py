"""L1-penalised least squares by cyclic coordinate descent."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from .tree import check_xy


def soft_threshold(z: float, gamma: float) -> float:
    """``sign(z) * max(|z| - gamma, 0)``."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


@dataclass
class LassoModel:
    """Fitted lasso.

    ``coefficients``/``intercept`` are in the original feature units. The
    solver works on features centred by ``means`` and divided by ``scales``
    (sample standard deviation); ``standardized_coefficients`` are the
    solution in that space, where ``lam`` applies.
    """

    coefficients: np.ndarray
    intercept: float
    lam: float
    means: np.ndarray
    scales: np.ndarray
    standardized_coefficients: np.ndarray
    n_sweeps: int = 0
    converged: bool = True
    objective_trace: list[float] = field(default_factory=list)
    feature_names: list[str] | None = None

    kind = "lasso"

    @property
    def n_features(self) -> int:
        return int(self.coefficients.size)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coefficients + self.intercept

    def standardize(self, X: np.ndarray) -> np.ndarray:
        Z = (np.asarray(X, dtype=float) - self.means) / self.scales
        Z[:, self.scales == 0] = 0.0
        return Z

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": self.lam,
            "coefficients": [float(c) for c in self.coefficients],
            "intercept": float(self.intercept),
            "means": [float(v) for v in self.means],
            "scales": [float(v) for v in self.scales],
            "standardized_coefficients": [float(c) for c in self.standardized_coefficients],
            "n_sweeps": self.n_sweeps,
            "converged": self.converged,
            "feature_names": self.feature_names,
        }

    @classmethod
    def from_dict(cls, d: dict) -> LassoModel:
        return cls(
            coefficients=np.array(d["coefficients"], dtype=float),
            intercept=float(d["intercept"]),
            lam=float(d["lambda"]),
            means=np.array(d["means"], dtype=float),
            scales=np.array(d["scales"], dtype=float),
            standardized_coefficients=np.array(d["standardized_coefficients"], dtype=float),
            n_sweeps=int(d.get("n_sweeps", 0)),
            converged=bool(d.get("converged", True)),
            feature_names=d.get("feature_names"),
        )


def lasso_objective(Z: np.ndarray, y: np.ndarray, beta: np.ndarray, b: float, lam: float) -> float:
    r = y - Z @ beta - b
    return float(r @ r) / (2 * y.size) + lam * float(np.abs(beta).sum())


def fit_lasso(
    X,
    y,
    lam: float,
    tol: float = 1e-6,
    max_iter: int = 1000,
    feature_names: list[str] | None = None,
) -> LassoModel:
    """Minimise ``(1/2n)||y - Z beta - b||^2 + lam * ||beta||_1`` on standardised ``Z``.

    Sweeps coordinates in index order and stops once the largest coefficient
    change within a sweep drops below ``tol``, or after ``max_iter`` sweeps.
    The objective after every sweep is kept in ``objective_trace`` (entry 0
    is the all-zero start).
    """
    X, y = check_xy(X, y)
    if not lam >= 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    n, d = X.shape

    means = X.mean(axis=0)
    constant = np.ptp(X, axis=0) == 0
    if n > 1:
        sd = X.std(axis=0, ddof=1)
    else:
        sd = np.zeros(d)
    scales = np.where(constant, 0.0, sd)
    Z = (X - means) / np.where(constant, 1.0, scales)
    Z[:, constant] = 0.0

    b = float(y.mean())
    yc = y - b
    gram = Z.T @ Z / n
    corr = Z.T @ yc / n
    diag = np.diag(gram).copy()
    active = np.flatnonzero(diag > 0)

    beta = np.zeros(d)
    trace = [lasso_objective(Z, y, beta, b, lam)]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        grad = corr - gram @ beta  # -(d/d beta) of the smooth part
        max_delta = 0.0
        for j in active:
            old = beta[j]
            new = soft_threshold(grad[j] + diag[j] * old, lam) / diag[j]
            if new != old:
                delta = new - old
                grad -= gram[:, j] * delta
                beta[j] = new
                max_delta = max(max_delta, abs(delta))
        trace.append(lasso_objective(Z, y, beta, b, lam))
        if max_delta < tol:
            converged = True
            break

    coef = np.zeros(d)
    coef[~constant] = beta[~constant] / scales[~constant]
    intercept = b - float(coef @ means)
    return LassoModel(
        coefficients=coef,
        intercept=intercept,
        lam=float(lam),
        means=means,
        scales=scales,
        standardized_coefficients=beta,
        n_sweeps=sweeps,
        converged=converged,
        objective_trace=trace,
        feature_names=feature_names,
    )


def lasso_gradient(model: LassoModel, X, y) -> np.ndarray:
    """Gradient of the smooth part of the objective in standardised space."""
    X, y = check_xy(X, y)
    if X.shape[1] != model.n_features:
        raise DataError(f"model has {model.n_features} features, X has {X.shape[1]}")
    Z = model.standardize(X)
    r = y - Z @ model.standardized_coefficients - float(y.mean())
    return -(Z.T @ r) / y.size
