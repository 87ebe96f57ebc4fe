"""
Decentralized eigenvector problem.

Agent ``i`` holds a data block ``A_i`` (``m_i x d``) and the local cost
``f_i(x) = -1/2 ||A_i x||_F^2``. The global cost is the agent average
``f(x) = (1/n) sum_i f_i(x)``, minimized over St(d, r) by any orthonormal
basis of the top-r right singular subspace of the stacked matrix ``A``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidSpec, ParseError, TooFewRows
from .stiefel import feasibility_error


def _check_shapes(shard: np.ndarray, x: np.ndarray) -> None:
    if shard.ndim != 2 or x.ndim != 2 or shard.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"data shape {shard.shape} incompatible with point shape {x.shape}")


def local_cost(shard: np.ndarray, x: np.ndarray) -> float:
    """-1/2 tr(x^T A^T A x) for one agent's data ``shard``."""
    _check_shapes(shard, x)
    ax = shard @ x
    return -0.5 * float(np.sum(ax * ax))


def local_euclidean_gradient(shard: np.ndarray, x: np.ndarray) -> np.ndarray:
    _check_shapes(shard, x)
    return -(shard.T @ (shard @ x))


@dataclass(frozen=True)
class GlobalProblem:
    """Row-partitioned data plus, when known, the optimum and optimal value."""

    shards: tuple[np.ndarray, ...] = field(repr=False)
    d: int
    r: int
    x_star: np.ndarray | None = field(default=None, repr=False)
    f_star: float | None = None

    def __post_init__(self):
        shards = tuple(np.asarray(a, dtype=float) for a in self.shards)
        if not shards:
            raise InvalidSpec("a problem needs at least one shard")
        if not 1 <= self.r <= self.d:
            raise InvalidSpec(f"need 1 <= r <= d, got r={self.r}, d={self.d}")
        for i, a in enumerate(shards):
            if a.ndim != 2 or a.shape[1] != self.d or a.shape[0] < 1:
                raise InvalidSpec(f"shard {i} has shape {a.shape}, expected (m_i, {self.d})")
            if not np.all(np.isfinite(a)):
                raise InvalidSpec(f"shard {i} has non-finite entries")
            a.setflags(write=False)
        object.__setattr__(self, "shards", shards)
        if self.x_star is not None:
            xs = np.array(self.x_star, dtype=float)
            if xs.shape != (self.d, self.r):
                raise InvalidSpec(f"x_star has shape {xs.shape}, expected {(self.d, self.r)}")
            if feasibility_error(xs) > 1e-10:
                raise InvalidSpec("x_star is not on the Stiefel manifold")
            xs.setflags(write=False)
            object.__setattr__(self, "x_star", xs)

    @property
    def n(self) -> int:
        return len(self.shards)

    def global_matrix(self) -> np.ndarray:
        return np.vstack(self.shards)

    def local_cost(self, i: int, x: np.ndarray) -> float:
        return local_cost(self.shards[i], x)

    def local_egrad(self, i: int, x: np.ndarray) -> np.ndarray:
        return local_euclidean_gradient(self.shards[i], x)

    def cost(self, x: np.ndarray) -> float:
        """Global objective f(x) = (1/n) sum_i f_i(x), summed in agent order."""
        total = 0.0
        for a in self.shards:
            total += local_cost(a, x)
        return total / self.n

    def egrad(self, x: np.ndarray) -> np.ndarray:
        total = np.zeros((self.d, self.r))
        for a in self.shards:
            total += local_euclidean_gradient(a, x)
        return total / self.n

    def optimality_residual(self) -> float:
        """Relative residual ||H x* - x* (x*^T H x*)|| / ||H|| for H = A^T A."""
        if self.x_star is None:
            raise ValueError("problem has no known optimum")
        A = self.global_matrix()
        H = A.T @ A
        hx = H @ self.x_star
        res = hx - self.x_star @ (self.x_star.T @ hx)
        return float(np.linalg.norm(res) / max(np.linalg.norm(H, 2), np.finfo(float).tiny))


def _optimum_from_matrix(A: np.ndarray, r: int, n: int) -> tuple[np.ndarray, float]:
    evals, evecs = np.linalg.eigh(A.T @ A)
    top = np.argsort(evals)[::-1][:r]
    x_star = evecs[:, top]
    f_star = -float(np.sum(evals[top])) / (2 * n)
    return x_star, f_star


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Parameters of the synthetic eigengap benchmark.

    ``sigma0`` is the leading singular value of the generated matrix. ``None``
    keeps the leading singular value of the Gaussian draw itself, so the
    prescribed spectrum is the draw's top value times eigengap**(i/2).
    """

    n: int
    m_per_agent: int
    d: int
    r: int
    eigengap: float = 0.8
    sigma0: float | None = 1.0
    seed: int = 0

    def problems(self) -> list[str]:
        found = []
        for name in ("n", "m_per_agent", "d", "r"):
            if getattr(self, name) < 1:
                found.append(f"{name} must be positive")
        if self.r > self.d:
            found.append(f"r={self.r} exceeds d={self.d}")
        if self.m_per_agent * self.n < self.d:
            found.append("m_per_agent * n must be at least d")
        if not 0.0 < self.eigengap < 1.0:
            found.append(f"eigengap must lie in (0, 1), got {self.eigengap}")
        if self.sigma0 is not None and not self.sigma0 > 0:
            found.append(f"sigma0 must be positive, got {self.sigma0}")
        return found


def prescribed_singular_values(sigma0: float, eigengap: float, d: int) -> np.ndarray:
    """sigma0 * eigengap**(i/2) for i = 0..d-1."""
    return sigma0 * eigengap ** (np.arange(d) / 2.0)


def generate_synthetic(spec: SyntheticSpec) -> GlobalProblem:
    """
    Gaussian data with a prescribed spectrum, split evenly across agents.

    A standard Gaussian ``(m n) x d`` matrix supplies orthonormal factors
    ``U, V`` through its thin SVD; the data is rebuilt as
    ``U diag(sigma0 * eigengap**(i/2)) V^T`` and cut into ``n`` row blocks.
    """
    issues = spec.problems()
    if issues:
        raise InvalidSpec("; ".join(issues))
    rng = np.random.default_rng(spec.seed)
    rows = spec.m_per_agent * spec.n
    gauss = rng.standard_normal((rows, spec.d))
    U, s, Vt = np.linalg.svd(gauss, full_matrices=False)
    sigma0 = float(s[0]) if spec.sigma0 is None else spec.sigma0
    sv = prescribed_singular_values(sigma0, spec.eigengap, spec.d)
    A = (U * sv) @ Vt
    shards = tuple(A[i * spec.m_per_agent:(i + 1) * spec.m_per_agent] for i in range(spec.n))
    x_star = Vt[: spec.r].T.copy()
    f_star = -float(np.sum(sv[: spec.r] ** 2)) / (2 * spec.n)
    return GlobalProblem(shards, spec.d, spec.r, x_star, f_star)


def read_csv_matrix(path: str | Path) -> np.ndarray:
    """Read a headerless comma-separated matrix of decimal literals."""
    rows: list[list[float]] = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            try:
                row = [float(f) for f in fields]
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"{path}: expected {width} columns, got {len(row)}", line=lineno)
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def partition_rows(A: np.ndarray, n: int, seed: int) -> tuple[np.ndarray, ...]:
    """Shuffle rows with a seeded permutation, then cut into ``n`` near-equal blocks."""
    if A.shape[0] < n:
        raise TooFewRows(f"{A.shape[0]} rows cannot be split across {n} agents")
    perm = np.random.default_rng(seed).permutation(A.shape[0])
    return tuple(np.array_split(A[perm], n, axis=0))


def load_matrix(path: str | Path, normalize_255: bool, n: int, seed: int, r: int = 5) -> GlobalProblem:
    """
    Build a problem from a CSV data matrix (one sample per row).

    Raw pixel data is scaled by 1/255 when ``normalize_255`` is set. The
    optimum comes from a dense eigendecomposition of ``A^T A``.
    """
    A = read_csv_matrix(path)
    if normalize_255:
        A = A / 255.0
    if not 1 <= r <= A.shape[1]:
        raise InvalidSpec(f"need 1 <= r <= d={A.shape[1]}, got r={r}")
    shards = partition_rows(A, n, seed)
    x_star, f_star = _optimum_from_matrix(A, r, n)
    return GlobalProblem(shards, A.shape[1], r, x_star, f_star)


def estimate_constants(p: GlobalProblem) -> tuple[float, float, float]:
    """
    Smoothness constants (L, L_f, L_g) of the local costs.

    L is the exact Lipschitz constant of the Euclidean gradient,
    max_i ||A_i^T A_i||_2; L_f = L sqrt(r) bounds ||grad f_i|| on the
    manifold since ||x||_F = sqrt(r); L_g = L + 2 L_f.
    """
    L = max(float(np.linalg.norm(a, 2) ** 2) for a in p.shards)
    L_f = L * np.sqrt(p.r)
    return L, float(L_f), float(L + 2 * L_f)
