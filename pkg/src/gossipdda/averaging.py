"""Distributed averaging protocols and gossip iteration-count calculators.

All logarithms are natural logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParam, ProtocolError

__all__ = [
    "AveragingProtocol",
    "AveragingReport",
    "exact",
    "gossip",
    "isolated",
    "run_averaging",
    "gossip_iterations_for_accuracy",
    "kstar_theorem2",
    "kstar_bound",
    "fixed_point_map",
    "verify_fixed_point",
    "tree_depth",
]


def tree_depth(n: int) -> int:
    """Depth of a balanced binary spanning tree on ``n`` nodes."""
    return int(math.ceil(math.log2(n))) if n > 1 else 0


@dataclass(frozen=True)
class AveragingProtocol:
    """Exact (AllReduce-style) averaging, synchronous gossip, or ``none``.

    ``weights`` is required for gossip and ignored otherwise. ``none`` leaves
    every node with its own input (isolated nodes).
    """

    kind: str
    k: int = 0
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "gossip", "none"):
            raise InvalidParam(f"protocol kind must be 'exact', 'gossip' or 'none', got {self.kind!r}")
        if self.kind == "gossip":
            if self.weights is None:
                raise InvalidParam("gossip protocol needs a weight matrix")
            if int(self.k) < 1:
                raise InvalidParam(f"gossip needs k >= 1, got {self.k}")

    def latency(self, gamma: int, n: int) -> int:
        """Samples arriving network-wide while the protocol runs."""
        if self.kind == "exact":
            return gamma * tree_depth(n)
        if self.kind == "none":
            return 0
        return gamma * int(self.k)


def exact() -> AveragingProtocol:
    return AveragingProtocol("exact")


def isolated() -> AveragingProtocol:
    return AveragingProtocol("none")


def gossip(weights: np.ndarray, k: int) -> AveragingProtocol:
    return AveragingProtocol("gossip", int(k), np.asarray(weights, dtype=float))


@dataclass(frozen=True)
class AveragingReport:
    outputs: np.ndarray
    true_average: np.ndarray
    accuracy_achieved: float
    latency: int
    k: int
    kind: str

    def csv_row(self, delta_target: float = float("nan")) -> str:
        """``k,delta_target,delta_achieved,mu``."""
        return f"{self.k},{delta_target!r},{self.accuracy_achieved!r},{self.latency}"


def run_averaging(proto: AveragingProtocol, inputs, gamma: int = 1) -> AveragingReport:
    """Run ``proto`` on one vector per node (rows of ``inputs``).

    Gossip applies ``Y <- P @ Y`` exactly ``k`` times. Exact averaging hands
    every node the network mean.
    """
    Y = np.asarray(inputs, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.shape[1] < 1:
        raise DimensionMismatch(f"inputs must be (n, d) with d >= 1, got shape {Y.shape}")
    n = Y.shape[0]
    ybar = Y.mean(axis=0)
    if proto.kind == "exact":
        out = np.broadcast_to(ybar, Y.shape).copy()
    elif proto.kind == "none":
        out = Y.copy()
    else:
        P = proto.weights
        if P.shape != (n, n):
            raise DimensionMismatch(f"weights are {P.shape}, inputs have {n} nodes")
        out = Y
        for _ in range(proto.k):
            out = P @ out
        if not np.all(np.isfinite(out)):
            raise ProtocolError("gossip produced non-finite values")
    acc = float(np.max(np.linalg.norm(out - ybar, axis=1)))
    return AveragingReport(
        outputs=out,
        true_average=ybar,
        accuracy_achieved=acc,
        latency=proto.latency(gamma, n),
        k=int(proto.k),
        kind=proto.kind,
    )


def gossip_iterations_for_accuracy(delta: float, n: int, max_spread: float, gap: float) -> int:
    """Gossip iterations guaranteeing accuracy ``delta``.

    ``ceil(log(2 sqrt(n) max_spread / delta) / gap)``, at least 1. ``gap`` is
    one minus the contraction rate of the weight matrix.
    """
    if delta <= 0 or max_spread <= 0 or n < 1:
        raise InvalidParam("delta, max_spread and n must be positive")
    if not (0 < gap <= 1):
        raise InvalidParam(f"gap must be in (0, 1], got {gap}")
    k = math.ceil(math.log(2.0 * math.sqrt(n) * max_spread / delta) / gap)
    return max(1, k)


def kstar_bound(L: float, b: int, n: int, gamma: int, gap: float) -> float:
    """Pre-ceiling value of :func:`kstar_theorem2`."""
    if min(L, b, n, gamma) <= 0:
        raise InvalidParam("L, b, n and gamma must be positive")
    if not (0 < gap <= 1):
        raise InvalidParam(f"gap must be in (0, 1], got {gap}")
    if gamma >= b:
        raise InvalidParam(f"need gamma < b, got gamma={gamma}, b={b}")
    inner = (math.log(4.0 * L * b * math.sqrt(n)) + math.log(1.0 / gap)) / gap
    inner += 1.0 / (2.0 * L * b) + 1.0
    return inner / (1.0 - gamma / b)


def kstar_theorem2(L: float, b: int, n: int, gamma: int, gap: float) -> int:
    """Gossip iterations per round that keep every dual within ``1/(b + gamma k)`` of the mean."""
    return max(1, math.ceil(kstar_bound(L, b, n, gamma, gap)))


def fixed_point_map(x: float, L: float, b: int, n: int, gamma: int, gap: float) -> float:
    """``log(2 sqrt(n) (1 + 2Lb + 2L gamma x)) / gap``."""
    return math.log(2.0 * math.sqrt(n) * (1.0 + 2.0 * L * b + 2.0 * L * gamma * x)) / gap


def verify_fixed_point(kstar: float, L: float, b: int, n: int, gamma: int, gap: float) -> bool:
    return kstar >= fixed_point_map(kstar, L, b, n, gamma, gap)
