"""Regret and optimality-gap accounting, modelled runtime and ratio curves."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .averaging import tree_depth
from .data import Dataset
from .errors import InvalidParam, LengthMismatch, MissingReferenceOptimum
from .losses import LossModel, expected_loss

__all__ = [
    "CSV_COLUMNS",
    "RegretLedger",
    "RuntimeModel",
    "record_regret",
    "optimality_gap",
    "runtime_units",
    "regret_ratio_curve",
    "RatioCurve",
    "loglog_slope",
]

CSV_COLUMNS = (
    "run_id",
    "n",
    "b",
    "mu",
    "k",
    "round",
    "samples_seen",
    "regret_total",
    "regret_per_sample",
    "delta_t",
    "gap_est",
    "runtime_units",
)


@dataclass
class RegretLedger:
    """Cumulative excess loss per node, samples processed and rounds."""

    per_node: np.ndarray
    samples: int = 0
    rounds: int = 0

    @classmethod
    def empty(cls, n: int) -> "RegretLedger":
        return cls(np.zeros(n))

    @property
    def total(self) -> float:
        return float(self.per_node.sum())

    @property
    def per_sample(self) -> float:
        return self.total / self.samples if self.samples else float("nan")

    def add_round(self, increments, samples: int) -> None:
        self.per_node = self.per_node + np.asarray(increments, dtype=float)
        self.samples += int(samples)
        self.rounds += 1


def _require_optimum(model: LossModel) -> None:
    if model.wstar is None or model.Fstar is None:
        raise MissingReferenceOptimum("call compute_reference_optimum on the model first")


def record_regret(ledger: RegretLedger, model: LossModel, predictor, sample, node: int = 0) -> RegretLedger:
    """Charge ``f(predictor, x) - f(w*, x)`` for one sample ``(x, y)`` to ``node``."""
    _require_optimum(model)
    x, y = sample if isinstance(sample, tuple) else (sample, None)
    X = np.atleast_2d(x)
    Y = None if y is None else np.atleast_1d(y)
    inc = float(model.values(predictor, X, Y)[0] - model.values(model.wstar, X, Y)[0])
    per_node = ledger.per_node.copy()
    per_node[node] += inc
    return RegretLedger(per_node, ledger.samples + 1, ledger.rounds)


def optimality_gap(model: LossModel, what_per_node, eval_set: Dataset) -> float:
    """``max_i F(what_i) - F(w*)`` with ``F`` the mean loss over ``eval_set``."""
    _require_optimum(model)
    W = np.atleast_2d(what_per_node)
    Fstar = expected_loss(model, model.wstar, eval_set)
    return max(expected_loss(model, w, eval_set) for w in W) - Fstar


@dataclass(frozen=True)
class RuntimeModel:
    """Modelled time with one unit per processed sample.

    Gossip costs ``tau * k * deg`` per round. Exact averaging costs
    ``tau`` per level of a balanced spanning tree; isolated nodes
    (``protocol="none"``) never communicate.
    """

    tau: float
    deg: int
    k: int
    b: int
    n: int
    protocol: str = "gossip"

    def __post_init__(self) -> None:
        if self.tau < 0 or self.b < 1 or self.n < 1:
            raise InvalidParam("runtime model needs tau >= 0, b >= 1, n >= 1")
        if self.protocol == "gossip" and self.k < 1:
            raise InvalidParam("gossip runtime needs k >= 1")

    @property
    def comm_per_round(self) -> float:
        if self.protocol == "exact":
            return self.tau * tree_depth(self.n)
        if self.protocol == "none":
            return 0.0
        return self.tau * self.k * self.deg

    @property
    def time_per_round(self) -> float:
        return self.b / self.n + self.comm_per_round


def runtime_units(model: RuntimeModel, rounds: int) -> float:
    return rounds * model.time_per_round


@dataclass(frozen=True)
class RatioCurve:
    ratio: np.ndarray
    tail_mean: float


def regret_ratio_curve(regret_a, regret_b, tail: float = 0.25) -> RatioCurve:
    """Elementwise ratio ``regret_a / regret_b`` with its mean over the last ``tail`` fraction.

    Pass per-sample regret series to compare runs processing different
    numbers of samples per round.
    """
    a = np.asarray(regret_a, dtype=float)
    b = np.asarray(regret_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise LengthMismatch(f"series shapes differ or are empty: {a.shape} vs {b.shape}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(a == b, 1.0, a / b)
    start = min(a.size - 1, int(math.floor((1.0 - tail) * a.size)))
    return RatioCurve(ratio, float(np.mean(ratio[start:])))


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise InvalidParam("log-log fit needs positive values")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
