"""Smooth strongly convex objectives: quadratic and l2-regularized logistic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

# rows per block when evaluating many points at once
_BLOCK = 8192


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap."""


class Objective:
    """f: R^d -> R with gradient oracle and (L, mu) metadata.

    ``value`` and ``gradient`` accept a single point of shape (d,) or a batch
    of points stacked as rows, shape (m, d).
    """

    dim: int
    smoothness: float
    strong_convexity: float

    @property
    def condition_number(self) -> float:
        return self.smoothness / self.strong_convexity

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def _point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim or x.ndim > 2:
            raise ValueError(f"expected points of dimension {self.dim}, got shape {x.shape}")
        return x


class QuadraticObjective(Objective):
    """f(x) = 1/2 sum_i lambda_i (x_i - c_i)^2 with minimizer c."""

    def __init__(self, spectrum, center=None):
        spectrum = np.asarray(spectrum, dtype=float)
        if spectrum.ndim != 1 or spectrum.size == 0 or not np.all(spectrum > 0):
            raise ValueError("spectrum must be a nonempty vector of positive reals")
        self.spectrum = spectrum
        self.center = np.zeros_like(spectrum) if center is None else np.asarray(center, dtype=float)
        if self.center.shape != spectrum.shape:
            raise ValueError("center and spectrum dimensions differ")
        self.dim = spectrum.size
        self.smoothness = float(spectrum.max())
        self.strong_convexity = float(spectrum.min())

    def value(self, x):
        x = self._point(x)
        return 0.5 * np.sum(self.spectrum * (x - self.center) ** 2, axis=-1)

    def gradient(self, x):
        x = self._point(x)
        return self.spectrum * (x - self.center)


def power_iteration(matvec, dim: int, tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric PSD operator given as a matvec."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise ValueError("operator annihilated the iterate; matrix is zero")
        v = w / nw
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
    raise ConvergenceError(f"power iteration did not reach relative tolerance {tol} in {max_iter} steps")


class LogisticObjective(Objective):
    """f(w) = 1/n sum log(1 + exp(-b_i x_i^T w)) + mu/2 ||w||^2.

    ``smoothness`` defaults to lambda_max(X^T X)/(4n) + mu via power iteration.
    A zero ``mu`` is accepted for raw gradient work but the result is not
    strongly convex.
    """

    def __init__(self, features, labels, mu: float, smoothness: float | None = None, seed: int = 0):
        X = np.asarray(features, dtype=float)
        b = np.asarray(labels, dtype=float)
        if X.ndim != 2 or b.shape != (X.shape[0],):
            raise ValueError(f"features {X.shape} and labels {b.shape} are inconsistent")
        if not np.all(np.isin(b, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if mu < 0:
            raise ValueError("mu must be nonnegative")
        self.features = X
        self.labels = b
        self.mu = float(mu)
        self.n, self.dim = X.shape
        self.strong_convexity = self.mu
        self.smoothness = float(smoothness) if smoothness is not None else estimate_smoothness(self, seed=seed)

    @classmethod
    def from_dataset(cls, dataset, mu: float, **kwargs) -> "LogisticObjective":
        return cls(dataset.dense_features(), dataset.labels, mu, **kwargs)

    def _margins(self, w):
        return (w @ self.features.T) * self.labels

    def value(self, w):
        w = self._point(w)
        if w.ndim == 1:
            return float(np.mean(np.logaddexp(0.0, -self._margins(w))) + 0.5 * self.mu * (w @ w))
        out = np.empty(w.shape[0])
        for s in range(0, w.shape[0], _BLOCK):
            blk = w[s : s + _BLOCK]
            out[s : s + _BLOCK] = np.mean(np.logaddexp(0.0, -self._margins(blk)), axis=1)
            out[s : s + _BLOCK] += 0.5 * self.mu * np.sum(blk * blk, axis=1)
        return out

    def gradient(self, w):
        w = self._point(w)
        if not np.all(np.isfinite(w)):
            raise ValueError("gradient requested at a non-finite point")
        if w.ndim == 1:
            return logistic_gradient(self, w)
        out = np.empty_like(w)
        for s in range(0, w.shape[0], _BLOCK):
            blk = w[s : s + _BLOCK]
            coef = -self.labels * expit(-self._margins(blk))
            out[s : s + _BLOCK] = coef @ self.features / self.n + self.mu * blk
        return out


def logistic_gradient(obj: LogisticObjective, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (obj.dim,):
        raise ValueError(f"expected a vector of dimension {obj.dim}, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("gradient requested at a non-finite point")
    coef = -obj.labels * expit(-obj.labels * (obj.features @ w))
    return obj.features.T @ coef / obj.n + obj.mu * w


def estimate_smoothness(obj: LogisticObjective, tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0) -> float:
    X = obj.features
    if not np.any(X):
        raise ValueError("feature matrix is zero")
    lam = power_iteration(lambda v: X.T @ (X @ v), X.shape[1], tol=tol, max_iter=max_iter, seed=seed)
    return lam / (4.0 * X.shape[0]) + obj.mu


@dataclass(frozen=True)
class OptimumCertificate:
    x_star: np.ndarray
    f_star: float
    grad_norm: float
    tolerance: float
    iterations: int

    @property
    def x_star_sq_norm(self) -> float:
        return float(self.x_star @ self.x_star)

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star.tolist(),
            "f_star": self.f_star,
            "grad_norm": self.grad_norm,
            "tolerance": self.tolerance,
            "iterations": self.iterations,
        }


def solve_optimum(obj: Objective, tolerance: float = 1e-10, max_iter: int = 1_000_000, x0=None) -> OptimumCertificate:
    """Minimize by gradient descent with step 1/L until ||grad|| <= tolerance."""
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    x = np.zeros(obj.dim) if x0 is None else np.array(x0, dtype=float)
    step = 1.0 / obj.smoothness
    for it in range(max_iter + 1):
        g = obj.gradient(x)
        gn = float(np.linalg.norm(g))
        if gn <= tolerance:
            return OptimumCertificate(x, float(obj.value(x)), gn, tolerance, it)
        x = x - step * g
    raise ConvergenceError(f"gradient norm {gn:.3e} above {tolerance} after {max_iter} steps; check L and mu")
