"""Communication graphs, Metropolis gossip weights and their spectra.

Graphs are undirected, simple and connected. Weight matrices are plain
read-only ``numpy`` arrays; :func:`check_weights` validates one against a
graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np
from scipy.sparse import csgraph, csr_matrix
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import ConnectivityFailure, ConvergenceFailure, InvalidParam

__all__ = [
    "Graph",
    "SpectralInfo",
    "make_graph",
    "metropolis_weights",
    "spectral_info",
    "lazify",
    "check_weights",
    "write_edgelist",
    "read_edgelist",
    "write_weights_csv",
    "GRAPH_KINDS",
    "MAX_CONNECT_RETRIES",
    "DENSE_EIG_MAX_N",
]

GRAPH_KINDS = ("complete", "ring", "grid2d", "erdos_renyi", "random_regular")
MAX_CONNECT_RETRIES = 100
DENSE_EIG_MAX_N = 256
STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class Graph:
    """Undirected simple connected graph on nodes ``0..n-1``.

    ``edges`` holds pairs ``(i, j)`` with ``i < j``. Construction rejects
    self-loops, out-of-range nodes and disconnected graphs.
    """

    n: int
    edges: frozenset[tuple[int, int]]
    _degrees: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidParam(f"graph needs n >= 1, got {self.n}")
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise InvalidParam(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvalidParam(f"edge ({i}, {j}) out of range for n={self.n}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))
        deg = np.zeros(self.n, dtype=int)
        for i, j in norm:
            deg[i] += 1
            deg[j] += 1
        deg.setflags(write=False)
        object.__setattr__(self, "_degrees", deg)
        if not _is_connected(self.n, norm):
            raise ConnectivityFailure(f"graph on {self.n} nodes is not connected")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    @property
    def max_degree(self) -> int:
        return int(self._degrees.max()) if self.n > 1 else 0

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1.0
        return A


def _is_connected(n: int, edges) -> bool:
    if n == 1:
        return True
    if not edges:
        return False
    rows, cols = zip(*edges)
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, _ = csgraph.connected_components(adj, directed=False)
    return ncomp == 1


def _grid_shape(n: int) -> tuple[int, int]:
    rows = int(math.isqrt(n))
    while n % rows:
        rows -= 1
    return rows, n // rows


def _edges_for(kind: str, n: int, rng: np.random.Generator, p: float, d: int):
    if kind == "complete":
        return {(i, j) for i in range(n) for j in range(i + 1, n)}
    if kind == "ring":
        return {(min(i, (i + 1) % n), max(i, (i + 1) % n)) for i in range(n)}
    if kind == "grid2d":
        rows, cols = _grid_shape(n)
        edges = set()
        for r in range(rows):
            for c in range(cols):
                u = r * cols + c
                if c + 1 < cols:
                    edges.add((u, u + 1))
                if r + 1 < rows:
                    edges.add((u, u + cols))
        return edges
    if kind == "erdos_renyi":
        iu, ju = np.triu_indices(n, k=1)
        keep = rng.random(iu.size) < p
        return set(zip(iu[keep].tolist(), ju[keep].tolist()))
    if kind == "random_regular":
        g = nx.random_regular_graph(d, n, seed=int(rng.integers(2**31 - 1)))
        return {(min(u, v), max(u, v)) for u, v in g.edges()}
    raise InvalidParam(f"unknown graph kind {kind!r}; expected one of {GRAPH_KINDS}")


def make_graph(kind: str, n: int, seed: int = 0, *, p: float = 0.5, d: int = 3) -> Graph:
    """Build a connected graph of the given family.

    Parameters
    ----------
    kind : str
        One of ``complete``, ``ring``, ``grid2d``, ``erdos_renyi`` (edge
        probability ``p``) or ``random_regular`` (degree ``d``).
    n : int
        Number of nodes.
    seed : int
        Seed for the random families. Resampling for connectivity is
        deterministic in ``seed``.

    Raises
    ------
    InvalidParam
        Bad ``n``, ``p`` or ``d``.
    ConnectivityFailure
        No connected sample within ``MAX_CONNECT_RETRIES`` attempts.
    """
    if kind not in GRAPH_KINDS:
        raise InvalidParam(f"unknown graph kind {kind!r}; expected one of {GRAPH_KINDS}")
    if n < 1:
        raise InvalidParam(f"n must be >= 1, got {n}")
    if kind == "erdos_renyi" and not (0.0 < p <= 1.0):
        raise InvalidParam(f"erdos_renyi needs p in (0, 1], got {p}")
    if kind == "random_regular":
        if not (0 <= d < n) or (d * n) % 2:
            raise InvalidParam(f"random_regular needs d < n and d*n even, got d={d}, n={n}")
    if n == 1:
        return Graph(1, frozenset())

    random_kind = kind in ("erdos_renyi", "random_regular")
    attempts = MAX_CONNECT_RETRIES if random_kind else 1
    for attempt in range(attempts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        edges = _edges_for(kind, n, rng, p, d)
        if _is_connected(n, edges):
            return Graph(n, frozenset(edges))
    raise ConnectivityFailure(
        f"{kind} graph with n={n} not connected after {attempts} attempts (seed={seed})"
    )


def metropolis_weights(g: Graph) -> np.ndarray:
    """Metropolis-Hastings weights: ``1/(1+max(deg_i, deg_j))`` per edge."""
    deg = g.degrees
    P = np.zeros((g.n, g.n))
    for i, j in g.edges:
        P[i, j] = P[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    P[np.diag_indices(g.n)] = 1.0 - P.sum(axis=1)
    P.setflags(write=False)
    return P


def check_weights(P: np.ndarray, g: Graph | None = None, tol: float = STOCHASTIC_TOL) -> None:
    """Raise ``InvalidParam`` unless ``P`` is a valid gossip matrix (for ``g``)."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidParam(f"weight matrix must be square, got shape {P.shape}")
    if np.any(P < -tol) or np.any(P > 1 + tol):
        raise InvalidParam("weight entries must lie in [0, 1]")
    if np.max(np.abs(P.sum(axis=1) - 1)) > tol or np.max(np.abs(P.sum(axis=0) - 1)) > tol:
        raise InvalidParam("weight matrix is not doubly stochastic")
    if g is not None:
        if P.shape[0] != g.n:
            raise InvalidParam(f"weight matrix is {P.shape[0]}x{P.shape[0]}, graph has {g.n} nodes")
        allowed = g.adjacency() + np.eye(g.n)
        if np.any((P > 0) != (allowed > 0)):
            raise InvalidParam("weight sparsity does not match the graph")


@dataclass(frozen=True)
class SpectralInfo:
    """Spectrum summary of a symmetric doubly-stochastic matrix.

    ``rho`` is the largest eigenvalue magnitude other than the Perron value
    and is the rate that actually governs gossip contraction.
    """

    lambda2: float
    lambda_min: float

    @property
    def rho(self) -> float:
        return max(self.lambda2, abs(self.lambda_min))

    @property
    def gap(self) -> float:
        return 1.0 - self.lambda2

    @property
    def rho_gap(self) -> float:
        return 1.0 - self.rho


def spectral_info(P: np.ndarray) -> SpectralInfo:
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if n == 1:
        return SpectralInfo(lambda2=0.0, lambda_min=0.0)
    if n <= DENSE_EIG_MAX_N:
        ev = np.linalg.eigvalsh((P + P.T) / 2)
        # drop one copy of the Perron eigenvalue
        lam = ev[:-1]
        return SpectralInfo(lambda2=float(lam[-1]), lambda_min=float(ev[0]))
    return _sparse_spectral_info(P)


def _sparse_spectral_info(P: np.ndarray) -> SpectralInfo:
    n = P.shape[0]
    ones = np.ones(n) / math.sqrt(n)
    Ps = csr_matrix(P)

    def matvec(v):
        v = np.ravel(v)
        v = v - ones * (ones @ v)
        out = Ps @ v
        return out - ones * (ones @ out)

    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    try:
        top = eigsh(op, k=1, which="LA", tol=1e-12, maxiter=20 * n, return_eigenvectors=False)
        bottom = eigsh(op, k=1, which="SA", tol=1e-12, maxiter=20 * n, return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        raise ConvergenceFailure(f"eigensolver did not converge for n={n}") from exc
    return SpectralInfo(lambda2=float(top[0]), lambda_min=float(bottom[0]))


def lazify(P: np.ndarray) -> np.ndarray:
    """Return ``(I + P) / 2``; its spectrum lies in ``[0, 1]``."""
    P = np.asarray(P, dtype=float)
    L = (np.eye(P.shape[0]) + P) / 2.0
    L.setflags(write=False)
    return L


def write_edgelist(g: Graph, path: str | Path) -> None:
    lines = [f"{g.n} {g.m}"] + [f"{i} {j}" for i, j in g.sorted_edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edgelist(path: str | Path) -> Graph:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows:
        raise InvalidParam(f"empty edge list file {path}")
    n, m = int(rows[0][0]), int(rows[0][1])
    if len(rows) - 1 != m:
        raise InvalidParam(f"edge list header declares {m} edges, found {len(rows) - 1}")
    return Graph(n, frozenset((int(a), int(b)) for a, b in rows[1:]))


def write_weights_csv(P: np.ndarray, path: str | Path) -> None:
    np.savetxt(path, np.asarray(P), delimiter=",", fmt="%.17g")
