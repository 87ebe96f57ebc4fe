"""
Communication graphs and gossip mixing.

A :class:`Graph` is an undirected, connected, loop-free graph on agents
``0..n-1``. :func:`metropolis_weights` turns it into a symmetric doubly
stochastic :class:`WeightMatrix`, and :func:`mix` applies ``t`` rounds of
gossip to a stack of per-agent matrices.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, DisconnectedAfterRetries, InvalidSize, ParseError

ER_MAX_ATTEMPTS = 100


def _is_connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        for j in adj[queue.popleft()]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == n


@dataclass(frozen=True)
class Graph:
    """Undirected connected graph; edges are stored as sorted pairs ``(i, j)``, ``i < j``."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.n < 1:
            raise InvalidSize(f"graph needs at least one vertex, got n={self.n}")
        normalized = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(normalized))
        if not _is_connected(self.n, self.edges):
            raise ValueError("graph is not connected")

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def to_edge_list(self) -> str:
        """Serialize as text, one ``"i j"`` pair per line in sorted order."""
        return "".join(f"{i} {j}\n" for i, j in self.sorted_edges())

    @classmethod
    def from_edge_list(cls, text: str, n: int | None = None) -> "Graph":
        """
        Parse the edge-list format written by :meth:`to_edge_list`.

        ``n`` defaults to one more than the largest vertex index, which
        cannot represent isolated trailing vertices, but those would make
        the graph disconnected anyway.
        """
        edges = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"expected 'i j', got {line!r}", line=lineno)
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ParseError(f"non-integer vertex in {line!r}", line=lineno) from None
        if n is None:
            n = 1 + max((max(e) for e in edges), default=0)
        return cls(n, frozenset(edges))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_edge_list(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, n: int | None = None) -> "Graph":
        return cls.from_edge_list(Path(path).read_text(encoding="utf-8"), n=n)


def build_ring(n: int) -> Graph:
    if n < 3:
        raise InvalidSize(f"a ring needs n >= 3, got {n}")
    return Graph(n, frozenset((i, (i + 1) % n) for i in range(n)))


def build_complete(n: int) -> Graph:
    if n < 1:
        raise InvalidSize(f"n must be positive, got {n}")
    return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def build_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """
    Sample G(n, p) with a seeded generator, retrying until connected.

    Attempt ``a`` uses seed ``seed + a``; after ``ER_MAX_ATTEMPTS``
    disconnected samples :class:`DisconnectedAfterRetries` is raised.
    Pairs are visited in lexicographic order, one uniform draw each.
    """
    if n < 2:
        raise InvalidSize(f"Erdos-Renyi graph needs n >= 2, got {n}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"edge probability must lie in (0, 1], got {p}")
    iu, ju = np.triu_indices(n, k=1)
    for attempt in range(ER_MAX_ATTEMPTS):
        rng = np.random.default_rng((seed + attempt) % 2**64)
        keep = rng.random(iu.size) < p
        edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
        if _is_connected(n, edges):
            return Graph(n, frozenset(edges))
    raise DisconnectedAfterRetries(
        f"no connected Erdos-Renyi sample with n={n}, p={p} after {ER_MAX_ATTEMPTS} attempts"
    )


@dataclass(frozen=True)
class WeightMatrix:
    """Symmetric doubly stochastic mixing matrix with its cached second singular value."""

    entries: np.ndarray = field(repr=False)
    sigma2: float

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def power(self, t: int) -> np.ndarray:
        """Dense W^t; used as an oracle and for the consensus loss."""
        return np.linalg.matrix_power(self.entries, t)


def second_singular_value(W: WeightMatrix | np.ndarray) -> float:
    entries = W.entries if isinstance(W, WeightMatrix) else np.asarray(W, dtype=float)
    if entries.shape[0] == 1:
        return 0.0
    s = np.linalg.svd(entries, compute_uv=False)
    return float(s[1])


def metropolis_weights(g: Graph) -> WeightMatrix:
    """
    Metropolis constant weights: ``1 / (1 + max(deg_i, deg_j))`` on each edge,
    diagonal filled so rows sum to one.
    """
    deg = g.degrees()
    W = np.zeros((g.n, g.n))
    for i, j in g.sorted_edges():
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return WeightMatrix(W, second_singular_value(W))


def check_weight_matrix(W: WeightMatrix, g: Graph | None = None, tol: float = 1e-12) -> list[str]:
    """Return a list of violated mixing-matrix conditions (empty when valid)."""
    M = W.entries
    problems = []
    if not np.array_equal(M, M.T):
        problems.append("not symmetric")
    if np.max(np.abs(M.sum(axis=1) - 1.0)) > tol:
        problems.append("rows do not sum to 1")
    if np.any(M < 0):
        problems.append("negative entry")
    diag = np.diag(M)
    if W.n > 1 and np.any((diag <= 0) | (diag >= 1)):
        problems.append("diagonal entry outside (0, 1)")
    if g is not None:
        off = M > 0
        np.fill_diagonal(off, False)
        adj = np.zeros_like(off)
        for i, j in g.edges:
            adj[i, j] = adj[j, i] = True
        if not np.array_equal(off, adj):
            problems.append("sparsity pattern differs from graph edges")
    if abs(W.sigma2 - second_singular_value(M)) > 1e-10:
        problems.append("cached sigma2 is stale")
    if not 0.0 <= W.sigma2 < 1.0:
        problems.append(f"sigma2={W.sigma2} outside [0, 1)")
    return problems


def mix(W: WeightMatrix, t: int, vectors: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """
    Apply ``t`` gossip rounds ``v <- W v`` to a stack of per-agent matrices.

    ``vectors`` has shape ``(n, d, r)`` (or is a length-``n`` list of
    ``(d, r)`` matrices); the result has the same shape. Each round is a
    separate multiplication, mirroring one exchange with neighbours.
    """
    if t < 1:
        raise ValueError(f"t must be a positive integer, got {t}")
    try:
        v = np.asarray(vectors, dtype=float)
    except ValueError as exc:
        raise DimensionMismatch(f"agent matrices do not share a shape: {exc}") from None
    if v.ndim != 3 or v.shape[0] != W.n:
        raise DimensionMismatch(f"expected a stack of {W.n} matrices, got shape {v.shape}")
    n = v.shape[0]
    flat = v.reshape(n, -1)
    for _ in range(t):
        flat = W.entries @ flat
    return flat.reshape(v.shape)
