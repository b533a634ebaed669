"""Loss models with their analytic constants and reference optimum.

A sample is a pair ``(x, y)``; the quadratic model ignores ``y``. Batched
methods on the model classes take ``X`` of shape ``(B, d)`` and ``y`` of
shape ``(B,)``; the module-level functions are single-sample conveniences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp, softmax

from .data import Dataset
from .errors import DimensionMismatch, EmptyDataset, InvalidParam, SolveFailure

__all__ = [
    "Ball",
    "LossModel",
    "QuadraticLoss",
    "MultinomialLogistic",
    "make_loss",
    "loss_value",
    "loss_gradient",
    "expected_loss",
    "expected_gradient",
    "compute_reference_optimum",
    "write_model_manifest",
]

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class Ball:
    """Euclidean ball of radius ``radius`` centred at the origin."""

    radius: float
    dim: int

    def __post_init__(self) -> None:
        if self.radius <= 0 or self.dim < 1:
            raise InvalidParam(f"ball needs radius > 0 and dim >= 1, got {self.radius}, {self.dim}")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def project(self, v: np.ndarray) -> np.ndarray:
        """Project each row of ``v`` (or ``v`` itself) onto the ball."""
        v = np.asarray(v, dtype=float)
        norms = np.linalg.norm(v, axis=-1, keepdims=True)
        outside = norms > self.radius
        scale = np.divide(self.radius, norms, out=np.ones_like(norms), where=outside)
        return v * scale

    def contains(self, w, tol: float = FEASIBILITY_TOL) -> bool:
        return bool(np.all(np.linalg.norm(np.asarray(w), axis=-1) <= self.radius + tol))


@dataclass(eq=False)
class LossModel:
    """Base class. Subclasses implement ``values`` and ``gradients``."""

    constraint: Ball
    L: float
    K: float
    sigma2: float
    wstar: np.ndarray | None = field(default=None, repr=False)
    Fstar: float | None = None

    kind = "abstract"

    @property
    def dim(self) -> int:
        return self.constraint.dim

    def values(self, w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradients(self, w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def mean_gradient(self, w, X, y) -> np.ndarray:
        return self.gradients(w, X, y).mean(axis=0)

    def _check_w(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise DimensionMismatch(f"w has shape {w.shape}, model dimension is {self.dim}")
        return w

    def constants(self) -> dict:
        return {
            "loss": self.kind,
            "L": self.L,
            "K": self.K,
            "sigma2": self.sigma2,
            "D": self.constraint.diameter,
            "R": self.constraint.radius,
            "dim": self.dim,
        }


@dataclass(eq=False)
class QuadraticLoss(LossModel):
    """``f(w, x) = 0.5 * ||w - x||^2`` on a ball.

    Constants are exact for the sampling population ``dataset``: ``K = 1``,
    ``L = R + max ||x||`` and ``sigma2`` is the population trace variance.
    """

    kind = "quadratic"

    @classmethod
    def from_dataset(cls, dataset: Dataset, radius: float = 10.0) -> "QuadraticLoss":
        X = dataset.inputs
        L = radius + float(np.max(np.linalg.norm(X, axis=1)))
        sigma2 = float(np.mean(np.sum((X - X.mean(axis=0)) ** 2, axis=1)))
        return cls(Ball(radius, dataset.d), L=L, K=1.0, sigma2=sigma2)

    def _check_X(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"samples have dimension {X.shape[1]}, expected {self.dim}")
        return X

    def values(self, w, X, y=None):
        w, X = self._check_w(w), self._check_X(X)
        return 0.5 * np.sum((w - X) ** 2, axis=1)

    def gradients(self, w, X, y=None):
        w, X = self._check_w(w), self._check_X(X)
        return w - X

    def optimum(self, dataset: Dataset) -> np.ndarray:
        return self.constraint.project(dataset.inputs.mean(axis=0))


@dataclass(eq=False)
class MultinomialLogistic(LossModel):
    """Softmax negative log-likelihood with a per-class intercept.

    ``w`` is the flattened ``(M, d + 1)`` block matrix; inputs are
    augmented with a trailing 1. With ``X_aug`` bounding the augmented
    input norm, ``L = 2 X_aug``, ``K = X_aug^2`` and ``sigma2 = 2 X_aug^2``.
    """

    M: int = 2
    d: int = 1

    kind = "multinomial_logistic"

    @classmethod
    def from_dataset(cls, dataset: Dataset, radius: float = 10.0) -> "MultinomialLogistic":
        x_aug = float(np.sqrt(np.max(np.sum(dataset.inputs**2, axis=1)) + 1.0))
        dim = dataset.M * (dataset.d + 1)
        return cls(
            Ball(radius, dim),
            L=2.0 * x_aug,
            K=x_aug**2,
            sigma2=2.0 * x_aug**2,
            M=dataset.M,
            d=dataset.d,
        )

    def _split(self, w, X, y):
        W = self._check_w(w).reshape(self.M, self.d + 1)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"samples have dimension {X.shape[1]}, expected {self.d}")
        y = np.atleast_1d(np.asarray(y, dtype=np.int64))
        if y.shape != (X.shape[0],):
            raise DimensionMismatch(f"{X.shape[0]} inputs but {y.shape[0]} labels")
        if y.size and (y.min() < 0 or y.max() >= self.M):
            raise DimensionMismatch(f"labels must lie in [0, {self.M})")
        return W, X, y

    def _scores(self, W, X):
        return X @ W[:, :-1].T + W[:, -1]

    def values(self, w, X, y):
        W, X, y = self._split(w, X, y)
        S = self._scores(W, X)
        return logsumexp(S, axis=1) - S[np.arange(len(y)), y]

    def gradients(self, w, X, y):
        W, X, y = self._split(w, X, y)
        R = softmax(self._scores(W, X), axis=1)
        R[np.arange(len(y)), y] -= 1.0
        Xa = np.hstack([X, np.ones((X.shape[0], 1))])
        return (R[:, :, None] * Xa[:, None, :]).reshape(X.shape[0], -1)

    def mean_gradient(self, w, X, y):
        W, X, y = self._split(w, X, y)
        R = softmax(self._scores(W, X), axis=1)
        R[np.arange(len(y)), y] -= 1.0
        G = np.empty((self.M, self.d + 1))
        G[:, :-1] = R.T @ X
        G[:, -1] = R.sum(axis=0)
        return G.ravel() / X.shape[0]

    def predict(self, w, X) -> np.ndarray:
        W = self._check_w(w).reshape(self.M, self.d + 1)
        return np.argmax(self._scores(W, np.atleast_2d(X)), axis=1)


def make_loss(kind: str, dataset: Dataset, radius: float = 10.0) -> LossModel:
    if kind == "quadratic":
        return QuadraticLoss.from_dataset(dataset, radius)
    if kind in ("multinomial_logistic", "logistic"):
        return MultinomialLogistic.from_dataset(dataset, radius)
    raise InvalidParam(f"unknown loss kind {kind!r}")


def loss_value(model: LossModel, w, x, y=None) -> float:
    return float(model.values(w, np.atleast_2d(x), None if y is None else [y])[0])


def loss_gradient(model: LossModel, w, x, y=None) -> np.ndarray:
    return model.gradients(w, np.atleast_2d(x), None if y is None else [y])[0]


def expected_loss(model: LossModel, w, dataset: Dataset) -> float:
    if dataset.N == 0:
        raise EmptyDataset("expected_loss needs a nonempty dataset")
    return float(np.mean(model.values(w, dataset.inputs, dataset.labels)))


def expected_gradient(model: LossModel, w, dataset: Dataset) -> np.ndarray:
    if dataset.N == 0:
        raise EmptyDataset("expected_gradient needs a nonempty dataset")
    return model.mean_gradient(w, dataset.inputs, dataset.labels)


def compute_reference_optimum(
    model: LossModel,
    dataset: Dataset,
    tol: float = 1e-8,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, float]:
    """Minimise the dataset-average loss over the ball; caches on ``model``.

    The quadratic case is closed form. Otherwise accelerated projected
    gradient with adaptive restart runs until the gradient mapping has norm
    at most ``tol``.
    """
    if dataset.N == 0:
        raise EmptyDataset("compute_reference_optimum needs a nonempty dataset")
    if isinstance(model, QuadraticLoss):
        w = model.optimum(dataset)
    else:
        w = _projected_gradient(model, dataset, tol, max_iter)
    model.wstar = w
    model.Fstar = expected_loss(model, w, dataset)
    return w, model.Fstar


def _smoothness(model: LossModel, dataset: Dataset) -> float:
    """Gradient Lipschitz constant of the dataset-average loss."""
    if isinstance(model, MultinomialLogistic):
        # softmax Hessian block is at most I/2, so F is (lambda_max(E[x x^T]) / 2)-smooth
        Xa = np.hstack([dataset.inputs, np.ones((dataset.N, 1))])
        return 0.5 * float(np.linalg.eigvalsh(Xa.T @ Xa / dataset.N)[-1])
    return model.K


def _projected_gradient(model: LossModel, dataset: Dataset, tol: float, max_iter: int) -> np.ndarray:
    ball = model.constraint
    step = 1.0 / _smoothness(model, dataset)
    x = np.zeros(model.dim)
    v = x.copy()
    theta = 1.0
    mapping = np.inf
    for it in range(max_iter):
        g = expected_gradient(model, v, dataset)
        x_new = ball.project(v - step * g)
        if np.dot(v - x_new, x_new - x) > 0:
            # gradient-based adaptive restart
            theta = 1.0
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta**2))
        v_next = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
        if it % 10 == 9 or it == max_iter - 1:
            gx = expected_gradient(model, x_new, dataset)
            mapping = np.linalg.norm(x_new - ball.project(x_new - step * gx)) / step
            if mapping <= tol:
                return x_new
        x, v, theta = x_new, v_next, theta_new
    raise SolveFailure(
        f"reference optimum not reached: gradient mapping {mapping:.3e} > {tol:.1e} after {max_iter} iterations"
    )


def write_model_manifest(model: LossModel, path: str | Path) -> None:
    """Write constants and ``w*`` as ``key=value`` lines."""
    lines = [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in model.constants().items()]
    if model.wstar is not None:
        lines.append(f"Fstar={model.Fstar!r}")
        lines.append("wstar=" + ",".join(repr(float(c)) for c in model.wstar))
    Path(path).write_text("\n".join(lines) + "\n")
