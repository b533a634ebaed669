"""Distributed dual averaging with approximate mini-batch gradient averaging.

Node variables are stored row-wise: ``state.w[i]``, ``state.z[i]`` and
``state.what[i]`` belong to node ``i``. The proximal function is
``h(w) = ||w||^2 / 2`` on a Euclidean ball, so the primal update is a
scaled projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .averaging import AveragingProtocol, run_averaging
from .data import SampleStream
from .errors import EmptyBatch, InvalidParam, SamplesNotRetained
from .losses import Ball, LossModel, expected_gradient

__all__ = [
    "Schedule",
    "NetworkState",
    "ReferenceState",
    "RoundTrace",
    "local_minibatch_gradient",
    "proximal_projection",
    "run_round",
    "update_reference",
    "error_vectors",
]


@dataclass(frozen=True)
class Schedule:
    """``beta(t) = K + sqrt(t / (b + mu))``."""

    K: float
    b_plus_mu: int

    def __post_init__(self) -> None:
        if self.K < 0 or self.b_plus_mu < 1:
            raise InvalidParam("schedule needs K >= 0 and b + mu >= 1")

    def a(self, t: int) -> float:
        return math.sqrt(t / self.b_plus_mu)

    def beta(self, t: int) -> float:
        return self.K + self.a(t)


@dataclass
class NetworkState:
    """Primal, dual and running-average iterates of every node at round ``t``."""

    w: np.ndarray
    z: np.ndarray
    what: np.ndarray
    t: int = 1

    @classmethod
    def initial(cls, n: int, dim: int) -> "NetworkState":
        return cls(np.zeros((n, dim)), np.zeros((n, dim)), np.zeros((n, dim)), 1)

    @property
    def n(self) -> int:
        return self.w.shape[0]


@dataclass
class ReferenceState:
    """Exactly averaged dual ``zbar``, its projection ``wbar`` and their running mean."""

    zbar: np.ndarray
    wbar: np.ndarray
    whatbar: np.ndarray
    t: int = 1

    @classmethod
    def initial(cls, dim: int) -> "ReferenceState":
        return cls(np.zeros(dim), np.zeros(dim), np.zeros(dim), 1)


@dataclass
class RoundTrace:
    """Diagnostics of one round ``t`` (the transition ``t -> t + 1``).

    ``regret`` holds each node's summed excess loss over all samples it
    processed this round and is ``None`` when the model has no cached
    optimum. ``grad_samples`` keeps the gradient mini-batch of every node
    when retention is requested.
    """

    t: int
    delta: float
    gbar: np.ndarray
    losses: np.ndarray
    regret: np.ndarray | None
    samples: int
    k: int
    mu: int
    w: np.ndarray | None = field(default=None, repr=False)
    z: np.ndarray | None = field(default=None, repr=False)
    grad_samples: list | None = field(default=None, repr=False)


def local_minibatch_gradient(model: LossModel, w, X, y=None) -> np.ndarray:
    """Mean of the per-sample gradients at the fixed point ``w``."""
    if X is None or len(X) == 0:
        raise EmptyBatch("local mini-batch is empty")
    return model.mean_gradient(w, X, y)


def proximal_projection(z, beta: float, constraint: Ball) -> np.ndarray:
    """``argmin_{||w|| <= R} <w, z> + beta ||w||^2 / 2`` for each row of ``z``."""
    if beta <= 0:
        raise InvalidParam(f"beta must be positive, got {beta}")
    return constraint.project(-np.asarray(z, dtype=float) / beta)


def run_round(
    state: NetworkState,
    proto: AveragingProtocol,
    model: LossModel,
    schedule: Schedule,
    stream: SampleStream,
    b: int,
    mu: int = 0,
    gamma: int = 1,
    retain: bool = False,
) -> tuple[NetworkState, RoundTrace]:
    """Advance every node from round ``t`` to ``t + 1``.

    Each node draws ``(b + mu) / n`` samples; the first ``b / n`` feed its
    gradient and all of them are charged to the regret at the round's fixed
    predictor ``w_i(t)``. ``mu`` is the number of samples arriving while the
    network communicates (zero in optimisation mode).
    """
    n, t = state.n, state.t
    if b % n or (b + mu) % n:
        raise InvalidParam(f"b={b} and b+mu={b + mu} must be multiples of n={n}")
    per_grad, per_total = b // n, (b + mu) // n

    G = np.empty_like(state.z)
    losses = np.empty(n)
    regret = None if model.wstar is None else np.empty(n)
    kept = [] if retain else None
    for i in range(n):
        X, y = stream.draw(t, i, per_total)
        G[i] = local_minibatch_gradient(model, state.w[i], X[:per_grad], y[:per_grad])
        f = model.values(state.w[i], X, y)
        losses[i] = f.sum()
        if regret is not None:
            regret[i] = losses[i] - model.values(model.wstar, X, y).sum()
        if retain:
            kept.append((X[:per_grad], y[:per_grad]))

    report = run_averaging(proto, state.z + G, gamma)
    z_new = report.outputs
    beta_next = schedule.beta(t + 1)
    w_new = proximal_projection(z_new, beta_next, model.constraint)
    what_new = state.what + (w_new - state.what) / (t + 1)

    trace = RoundTrace(
        t=t,
        delta=report.accuracy_achieved,
        gbar=G.mean(axis=0),
        losses=losses,
        regret=regret,
        samples=n * per_total,
        k=report.k,
        mu=mu,
        w=state.w if retain else None,
        z=state.z if retain else None,
        grad_samples=kept,
    )
    return NetworkState(w_new, z_new, what_new, t + 1), trace


def update_reference(
    ref: ReferenceState, gbar, schedule: Schedule, constraint: Ball
) -> ReferenceState:
    """Advance the exactly averaged reference sequence by one round."""
    t = ref.t
    zbar = ref.zbar + np.asarray(gbar, dtype=float)
    wbar = proximal_projection(zbar, schedule.beta(t + 1), constraint)
    whatbar = ref.whatbar + (wbar - ref.whatbar) / (t + 1)
    return ReferenceState(zbar, wbar, whatbar, t + 1)


def error_vectors(trace: RoundTrace, model: LossModel, wbar, population) -> tuple[np.ndarray, np.ndarray]:
    """Gradient errors ``q = ghat - grad F(wbar)`` and ``r = gbar - ghat``.

    ``ghat`` re-evaluates the round's gradient mini-batch at ``wbar``;
    ``population`` is the dataset defining ``F``.
    """
    if trace.grad_samples is None:
        raise SamplesNotRetained("run_round was called without retain=True")
    X = np.concatenate([s[0] for s in trace.grad_samples])
    y = np.concatenate([s[1] for s in trace.grad_samples])
    ghat = model.mean_gradient(wbar, X, y)
    q = ghat - expected_gradient(model, wbar, population)
    r = trace.gbar - ghat
    return q, r
