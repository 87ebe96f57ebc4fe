"""
Experiment metrics and empirical probes of the convergence theory.

All reductions over agents run in agent-index order so results do not
depend on how the per-agent work was scheduled.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .network import WeightMatrix, mix
from .problems import GlobalProblem
from .stiefel import (
    distance_to_manifold,
    euclidean_mean,
    induced_arithmetic_mean,
    procrustes_distance,
    project_to_manifold,
    riemannian_gradient,
)

log = logging.getLogger(__name__)

#: Sentinel for metrics that need a known optimum.
ABSENT = float("nan")
#: Lower clamp for f(x_bar) - f_star, which can dip below zero from rounding.
GAP_FLOOR = -1e-12


def agent_points(states) -> np.ndarray:
    """Stack agent iterates into an ``(n, d, r)`` array; accepts states or raw matrices."""
    return np.stack([np.asarray(getattr(s, "x", s), dtype=float) for s in states])


@dataclass(frozen=True)
class MetricSnapshot:
    x_bar: np.ndarray
    consensus_error: float
    mean_sq_consensus: float
    grad_norm_at_mean: float
    objective_gap: float
    ds: float


def _sq_deviation(points: np.ndarray, center: np.ndarray) -> float:
    total = 0.0
    for x in points:
        diff = x - center
        total += float(np.sum(diff * diff))
    return total


def snapshot(states, problem: GlobalProblem, x_star: np.ndarray | None = None,
             f_star: float | None = None) -> MetricSnapshot:
    """
    Evaluate the four tracked metrics at the induced arithmetic mean.

    ``x_star``/``f_star`` default to the problem's; when unknown the
    corresponding fields hold :data:`ABSENT` (NaN).
    """
    points = agent_points(states)
    if x_star is None:
        x_star = problem.x_star
    if f_star is None:
        f_star = problem.f_star
    x_bar = induced_arithmetic_mean(points)
    sq = _sq_deviation(points, x_bar)
    grad = riemannian_gradient(x_bar, problem.egrad(x_bar))
    gap = ABSENT if f_star is None else max(problem.cost(x_bar) - f_star, GAP_FLOOR)
    ds = ABSENT if x_star is None else procrustes_distance(x_bar, x_star)
    return MetricSnapshot(
        x_bar=x_bar,
        consensus_error=math.sqrt(sq),
        mean_sq_consensus=sq / len(points),
        grad_norm_at_mean=float(np.linalg.norm(grad)),
        objective_gap=gap,
        ds=ds,
    )


def stationarity_check(states, problem: GlobalProblem, epsilon: float) -> bool:
    """True when mean squared consensus error and ||grad f(x_bar)||^2 are both <= epsilon."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    snap = snapshot(states, problem)
    return snap.mean_sq_consensus <= epsilon and snap.grad_norm_at_mean ** 2 <= epsilon


def consensus_loss(states, W: WeightMatrix, t: int) -> float:
    """1/4 sum_ij (W^t)_ij ||x_i - x_j||^2, evaluated with the dense matrix power."""
    points = agent_points(states)
    Wt = W.power(t)
    n = len(points)
    total = 0.0
    for i in range(n):
        for j in range(n):
            diff = points[i] - points[j]
            total += Wt[i, j] * float(np.sum(diff * diff))
    return 0.25 * total


def neighborhood_radius(states) -> float:
    """||x_hat - x_bar||: distance between the Euclidean and induced means."""
    return distance_to_manifold(euclidean_mean(agent_points(states)))


def in_neighborhood(states, gamma: float) -> bool:
    return neighborhood_radius(states) <= gamma / 2


def consensus_rate(sigma2: float, t: int, gamma: float) -> float:
    """Contraction factor sigma2**t / (1 - gamma) of the gradient-free consensus scheme."""
    return sigma2 ** t / (1.0 - gamma)


def contraction_trace(init, W: WeightMatrix, t: int, rounds: int) -> tuple[list[float], list[float]]:
    """
    Run ``x_i <- P_St(sum_j (W^t)_ij x_j)`` and record its contraction.

    Returns ``(ratios, radii)``: ``ratios[k]`` is the consensus error after
    round ``k`` divided by the error before it (0 when the latter is below
    1e-14), and ``radii[k]`` is :func:`neighborhood_radius` before round ``k``.
    """
    points = agent_points(init)
    ratios, radii = [], []
    err = math.sqrt(_sq_deviation(points, induced_arithmetic_mean(points)))
    for _ in range(rounds):
        radii.append(neighborhood_radius(points))
        mixed = mix(W, t, points)
        points = np.stack([project_to_manifold(m) for m in mixed])
        new_err = math.sqrt(_sq_deviation(points, induced_arithmetic_mean(points)))
        ratios.append(0.0 if err < 1e-14 else new_err / err)
        err = new_err
    return ratios, radii


def consensus_contraction_probe(init, W: WeightMatrix, t: int, rounds: int, gamma: float) -> list[float]:
    """Per-round consensus-error ratios of the gradient-free scheme (see :func:`contraction_trace`)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    ratios, radii = contraction_trace(init, W, t, rounds)
    outside = [k for k, rad in enumerate(radii) if rad > gamma / 2]
    if outside:
        log.warning("iterates left the gamma=%g neighborhood at rounds %s", gamma, outside)
    return ratios


def _log_threshold(sigma2: float, q: float) -> int:
    # smallest t >= 1 with sigma2**t <= q
    if sigma2 <= 0.0 or q >= 1.0:
        return 1
    return max(1, math.ceil(math.log(q) / math.log(sigma2)))


def t_thresholds(sigma2: float, n: int, gamma: float, beta_cap: float, zeta: float) -> dict[str, int]:
    """
    Gossip-round counts required by the local convergence guarantees.

    ``zeta`` bounds the manifold diameter (see ``stiefel.diameter_bound``).
    These are sufficient conditions only; experiments routinely run with
    fewer rounds.
    """
    neighborhood = _log_threshold(sigma2, gamma * (1 - gamma) / (4 * math.sqrt(n) * zeta))
    contraction = _log_threshold(sigma2, 1 - gamma)
    cap_term = _log_threshold(sigma2, 1 / (8 * math.sqrt(n) * beta_cap)) if beta_cap > 0 else 1
    return {
        "stay_in_neighborhood": neighborhood,
        "consensus_contraction": max(contraction, neighborhood),
        "bounded_directions": max(
            _log_threshold(sigma2, (1 - gamma) / (2 * math.sqrt(n) * zeta)), cap_term, neighborhood
        ),
        "consensus_vs_step": contraction,
    }


def consensus_step_ratios(records: Sequence) -> np.ndarray:
    """mean_sq_consensus / alpha**2 for every record after the first."""
    return np.array([rec.mean_sq_consensus / rec.alpha ** 2 for rec in records[1:]])
