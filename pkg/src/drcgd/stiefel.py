"""
Geometry of the Stiefel manifold St(d, r) = {x in R^{d x r} : x^T x = I_r}.

Points, tangent vectors and ambient matrices are all plain ``(d, r)`` float
arrays; the functions here never mutate their inputs. The manifold carries
the metric induced by the Frobenius inner product.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, SingularInput

#: Smallest singular value below which the polar factor is treated as undefined.
SINGULAR_TOL = 1e-12
#: Feasibility tolerance for ||x^T x - I||_F after a projection.
FEASIBILITY_TOL = 1e-10


def _as_matrix(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {y.shape}")
    return y


def feasibility_error(x: np.ndarray) -> float:
    """Return ||x^T x - I_r||_F."""
    x = _as_matrix(x)
    return float(np.linalg.norm(x.T @ x - np.eye(x.shape[1])))


def tangency_error(x: np.ndarray, xi: np.ndarray) -> float:
    """Return ||x^T xi + xi^T x||_F, which vanishes iff xi lies in T_x St."""
    s = x.T @ xi
    return float(np.linalg.norm(s + s.T))


def random_point(rng: np.random.Generator, d: int, r: int) -> np.ndarray:
    """Draw a point on St(d, r) by projecting a standard Gaussian matrix."""
    return project_to_manifold(rng.standard_normal((d, r)))


def project_to_manifold(y: np.ndarray) -> np.ndarray:
    """
    Nearest point of St(d, r) to ``y`` in Frobenius norm.

    The minimizer is the polar factor ``U V^T`` of the thin SVD
    ``y = U diag(s) V^T``. It is unique exactly when ``y`` has full column
    rank, i.e. inside the open unit tube around the manifold.

    Raises
    ------
    SingularInput
        If the smallest singular value of ``y`` is at most ``SINGULAR_TOL``.
    """
    y = _as_matrix(y)
    if y.shape[1] > y.shape[0]:
        raise DimensionMismatch(f"need r <= d, got shape {y.shape}")
    u, s, vt = np.linalg.svd(y, full_matrices=False)
    if s[-1] <= SINGULAR_TOL:
        raise SingularInput(float(s[-1]))
    x = u @ vt
    if __debug__:
        assert feasibility_error(x) <= FEASIBILITY_TOL
    return x


def project_to_tangent(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``y`` onto T_x St: ``y - x sym(x^T y)``."""
    x = _as_matrix(x)
    y = _as_matrix(y)
    if x.shape != y.shape:
        raise DimensionMismatch(f"point has shape {x.shape} but matrix has shape {y.shape}")
    xty = x.T @ y
    return y - 0.5 * x @ (xty + xty.T)


def riemannian_gradient(x: np.ndarray, egrad: np.ndarray) -> np.ndarray:
    """Riemannian gradient at ``x`` from the Euclidean gradient ``egrad``."""
    return project_to_tangent(x, egrad)


def euclidean_mean(points: Sequence[np.ndarray]) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 3 or len(pts) == 0:
        raise DimensionMismatch("expected a non-empty stack of (d, r) matrices")
    return pts.mean(axis=0)


def induced_arithmetic_mean(points: Sequence[np.ndarray]) -> np.ndarray:
    """
    Induced arithmetic mean: argmin_{y in St} sum_i ||y - x_i||^2.

    Equals the projection of the Euclidean average onto the manifold, so it
    is undefined (``SingularInput``) when that average loses rank.
    """
    return project_to_manifold(euclidean_mean(points))


def distance_to_manifold(y: np.ndarray) -> float:
    """
    Frobenius distance from ``y`` to St(d, r).

    Computed from singular values as sqrt(sum_j (s_j - 1)^2), so it is also
    defined for rank-deficient ``y``.
    """
    s = np.linalg.svd(_as_matrix(y), compute_uv=False)
    return float(np.sqrt(np.sum((s - 1.0) ** 2)))


def polar_retraction(x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """
    Polar retraction R_x(xi) = P_St(x + xi).

    For tangent ``xi`` we have (x + xi)^T (x + xi) = I + xi^T xi, so every
    singular value of x + xi is at least 1 and the projection always exists.
    """
    x = _as_matrix(x)
    xi = _as_matrix(xi)
    if x.shape != xi.shape:
        raise DimensionMismatch(f"point has shape {x.shape} but step has shape {xi.shape}")
    return project_to_manifold(x + xi)


def procrustes_distance(x: np.ndarray, x_star: np.ndarray) -> float:
    """
    Rotation-invariant distance min_{Q orthogonal} ||x Q - x_star||_F.

    The optimal Q is U V^T from the SVD of x^T x_star. The norm is evaluated
    on the aligned residual rather than through sqrt(2r - 2 sum s_j), which
    loses about half the digits near zero.
    """
    x = _as_matrix(x)
    x_star = _as_matrix(x_star)
    if x.shape != x_star.shape:
        raise DimensionMismatch(f"shapes differ: {x.shape} vs {x_star.shape}")
    u, _, vt = np.linalg.svd(x.T @ x_star)
    return float(np.linalg.norm(x @ (u @ vt) - x_star))


def diameter_bound(r: int) -> float:
    """Upper bound 2 sqrt(r) on max ||x - y|| over St(d, r)."""
    if r < 1:
        raise ValueError("r must be positive")
    return 2.0 * np.sqrt(r)
