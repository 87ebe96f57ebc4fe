"""
Decentralized solvers on St(d, r).

Three synchronous schemes share one round structure: every agent reads the
same pre-round snapshot of all ``(x_j, eta_j)``, the network performs ``t``
gossip rounds, then each agent updates independently.

* ``drcgd``: projection-based conjugate gradient. The iterate moves by
  ``x_i <- P_St(sum_j (W^t)_ij x_j + alpha eta_i)`` and the direction by
  ``eta_i <- -g_i + beta_i P_T(sum_j (W^t)_ij eta_j)`` with a capped
  Fletcher-Reeves ``beta_i``. No retraction or vector transport is used.
* ``dprgd``: the same iterate update with ``eta_i = -g_i`` (projected gradient).
* ``drdgd``: retraction-based gradient descent,
  ``x_i <- R_{x_i}(P_T(sum_j (W^t)_ij x_j - x_i) - alpha g_i)`` with the polar retraction.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import diagnostics
from .errors import DrcgdError, SingularInput, ValidationError
from .network import WeightMatrix, mix
from .problems import GlobalProblem
from .seeding import derived_rng
from .stiefel import polar_retraction, project_to_manifold, project_to_tangent, random_point, riemannian_gradient

log = logging.getLogger(__name__)

VARIANTS = ("drcgd", "dprgd", "drdgd")
SCHEDULES = ("fixed_sqrt_K", "diminishing")
#: Denominators of the Fletcher-Reeves ratio at or below this restart the direction.
BETA_RESTART_TOL = 1e-300


@dataclass(frozen=True)
class AgentState:
    """One agent's iterate, search direction (tangent at ``x``) and last ||grad f_i(x)||^2."""

    x: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)
    prev_grad_norm_sq: float


@dataclass(frozen=True)
class SolverConfig:
    variant: str = "drcgd"
    t: int = 1
    schedule: str = "fixed_sqrt_K"
    alpha_hat: float = 0.01
    max_epochs: int = 200
    tol_ds: float = 1e-5
    beta_cap: float = 10.0
    gamma: float = 0.5

    def problems(self) -> list[str]:
        found = []
        if self.variant not in VARIANTS:
            found.append(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.schedule not in SCHEDULES:
            found.append(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if not (isinstance(self.t, int) and self.t >= 1):
            found.append(f"t must be a positive integer, got {self.t!r}")
        if not self.alpha_hat > 0:
            found.append(f"alpha_hat must be positive, got {self.alpha_hat}")
        if not (isinstance(self.max_epochs, int) and self.max_epochs >= 0):
            found.append(f"max_epochs must be a non-negative integer, got {self.max_epochs!r}")
        if not self.tol_ds >= 0:
            found.append(f"tol_ds must be non-negative, got {self.tol_ds}")
        if not self.beta_cap >= 0:
            found.append(f"beta_cap must be non-negative, got {self.beta_cap}")
        if not 0 < self.gamma < 1:
            found.append(f"gamma must lie in (0, 1), got {self.gamma}")
        return found

    def __post_init__(self):
        found = self.problems()
        if found:
            raise ValidationError(found)


@dataclass(frozen=True)
class IterationRecord:
    k: int
    alpha: float
    consensus_error: float
    mean_sq_consensus: float
    grad_norm: float
    objective_gap: float
    ds: float
    wall_seconds: float


class RunAborted(DrcgdError, RuntimeError):
    """A round failed; ``records`` holds everything emitted before the failure."""

    def __init__(self, message: str, records: list[IterationRecord]):
        super().__init__(message)
        self.records = records


def step_size(schedule: str, alpha_hat: float, k: int, K: int) -> float:
    """alpha_hat / sqrt(K) (``fixed_sqrt_K``) or alpha_hat / sqrt(k + 1) (``diminishing``)."""
    if schedule == "fixed_sqrt_K":
        return alpha_hat / math.sqrt(max(K, 1))
    if schedule == "diminishing":
        return alpha_hat / math.sqrt(k + 1)
    raise ValueError(f"unknown schedule {schedule!r}")


def compute_beta_fr(grad_new: np.ndarray, prev_grad_norm_sq: float, cap: float) -> float:
    """
    Capped Fletcher-Reeves coefficient ||grad_new||^2 / prev_grad_norm_sq.

    Returns 0 (a steepest-descent restart) when the previous gradient has
    vanished.
    """
    if prev_grad_norm_sq <= BETA_RESTART_TOL:
        return 0.0
    return min(float(np.sum(grad_new * grad_new)) / prev_grad_norm_sq, cap)


def armijo_check(f_before: float, f_after: float, inner: float, alpha_k: float, c1: float) -> bool:
    """Sufficient-decrease test f_after <= f_before + c1 alpha <grad, eta> (1e-12 slack)."""
    if not 0 < c1 < 1:
        raise ValueError("c1 must lie in (0, 1)")
    return f_after <= f_before + c1 * alpha_k * inner + 1e-12


def _grad(problem: GlobalProblem, i: int, x: np.ndarray) -> np.ndarray:
    return riemannian_gradient(x, problem.local_egrad(i, x))


def initial_states(problem: GlobalProblem, init: Sequence[np.ndarray]) -> list[AgentState]:
    """Attach eta_0 = -grad f_i(x_0) to each starting point."""
    if len(init) != problem.n:
        raise ValueError(f"need {problem.n} initial points, got {len(init)}")
    states = []
    for i, x in enumerate(init):
        x = np.array(x, dtype=float)
        g = _grad(problem, i, x)
        states.append(AgentState(x, -g, float(np.sum(g * g))))
    return states


def shared_init(n: int, d: int, r: int, seed: int) -> list[np.ndarray]:
    """Every agent starts at the same seeded random point (zero initial consensus error)."""
    x0 = random_point(derived_rng(seed, "init"), d, r)
    return [x0.copy() for _ in range(n)]


def independent_init(n: int, d: int, r: int, seed: int) -> list[np.ndarray]:
    """Each agent draws its own point from a per-agent stream."""
    return [random_point(derived_rng(seed, "init", i), d, r) for i in range(n)]


def _map_agents(fn: Callable[[int], AgentState], n: int, executor: Executor | None) -> list[AgentState]:
    if executor is None:
        return [fn(i) for i in range(n)]
    return list(executor.map(fn, range(n)))


def _guard(fn: Callable[[int], AgentState], k: int | None) -> Callable[[int], AgentState]:
    def wrapped(i: int) -> AgentState:
        try:
            return fn(i)
        except SingularInput as exc:
            where = f"agent {i}" + (f", round {k}" if k is not None else "")
            raise SingularInput(exc.sigma_min, where) from exc
    return wrapped


def _stack(states: Sequence[AgentState]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([s.x for s in states]), np.stack([s.eta for s in states])


def drcgd_round(states: Sequence[AgentState], W: WeightMatrix, t: int, alpha_k: float,
                problem: GlobalProblem, C: float, *, executor: Executor | None = None,
                k: int | None = None) -> list[AgentState]:
    X, E = _stack(states)
    mixed_x = mix(W, t, X)
    mixed_eta = mix(W, t, E)

    def update(i: int) -> AgentState:
        x_new = project_to_manifold(mixed_x[i] + alpha_k * E[i])
        g_new = _grad(problem, i, x_new)
        beta = compute_beta_fr(g_new, states[i].prev_grad_norm_sq, C)
        eta_new = -g_new + beta * project_to_tangent(x_new, mixed_eta[i])
        return AgentState(x_new, eta_new, float(np.sum(g_new * g_new)))

    return _map_agents(_guard(update, k), len(states), executor)


def dprgd_round(states: Sequence[AgentState], W: WeightMatrix, t: int, alpha_k: float,
                problem: GlobalProblem, *, executor: Executor | None = None,
                k: int | None = None) -> list[AgentState]:
    # stored eta is -grad f_i(x_i) for this variant
    X, E = _stack(states)
    mixed_x = mix(W, t, X)

    def update(i: int) -> AgentState:
        x_new = project_to_manifold(mixed_x[i] + alpha_k * E[i])
        g_new = _grad(problem, i, x_new)
        return AgentState(x_new, -g_new, float(np.sum(g_new * g_new)))

    return _map_agents(_guard(update, k), len(states), executor)


def drdgd_round(states: Sequence[AgentState], W: WeightMatrix, t: int, alpha_k: float,
                problem: GlobalProblem, *, executor: Executor | None = None,
                k: int | None = None) -> list[AgentState]:
    X, E = _stack(states)
    mixed_x = mix(W, t, X)

    def update(i: int) -> AgentState:
        x = X[i]
        step = project_to_tangent(x, mixed_x[i] - x) + alpha_k * E[i]
        x_new = polar_retraction(x, step)
        g_new = _grad(problem, i, x_new)
        return AgentState(x_new, -g_new, float(np.sum(g_new * g_new)))

    return _map_agents(_guard(update, k), len(states), executor)


def _log_armijo(before: Sequence[AgentState], after: Sequence[AgentState], problem: GlobalProblem,
                alpha_k: float, k: int, c1: float = 1e-4) -> None:
    for i, (s0, s1) in enumerate(zip(before, after)):
        g0 = _grad(problem, i, s0.x)
        ok = armijo_check(problem.local_cost(i, s0.x), problem.local_cost(i, s1.x),
                          float(np.sum(g0 * s0.eta)), alpha_k, c1)
        log.debug("round %d agent %d armijo=%s", k, i, ok)


def run(config: SolverConfig, problem: GlobalProblem, W: WeightMatrix, init: Sequence[np.ndarray], *,
        workers: int = 1, on_round: Callable[[int, list[AgentState]], None] | None = None,
        diagnostics_enabled: bool = False) -> list[IterationRecord]:
    """
    Iterate the configured scheme for up to ``config.max_epochs`` rounds.

    Emits one record for the initial state and one after every round, and
    stops early once ``ds <= config.tol_ds`` (never when the optimum is
    unknown). ``on_round(k, states)`` sees the states behind record ``k``.
    ``workers > 1`` spreads per-agent updates over a thread pool; results
    are identical for any worker count.
    """
    if W.n != problem.n:
        raise ValueError(f"weight matrix is {W.n}x{W.n} but the problem has {problem.n} agents")
    K = config.max_epochs
    start = time.perf_counter()
    records: list[IterationRecord] = []
    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        states = initial_states(problem, init)
        for k in range(K + 1):
            alpha = step_size(config.schedule, config.alpha_hat, k, K)
            snap = diagnostics.snapshot(states, problem)
            records.append(IterationRecord(
                k=k, alpha=alpha,
                consensus_error=snap.consensus_error,
                mean_sq_consensus=snap.mean_sq_consensus,
                grad_norm=snap.grad_norm_at_mean,
                objective_gap=snap.objective_gap,
                ds=snap.ds,
                wall_seconds=time.perf_counter() - start,
            ))
            if on_round is not None:
                on_round(k, states)
            if snap.ds <= config.tol_ds or k == K:
                break
            if config.variant == "drcgd":
                new = drcgd_round(states, W, config.t, alpha, problem, config.beta_cap, executor=executor, k=k)
            elif config.variant == "dprgd":
                new = dprgd_round(states, W, config.t, alpha, problem, executor=executor, k=k)
            else:
                new = drdgd_round(states, W, config.t, alpha, problem, executor=executor, k=k)
            if diagnostics_enabled:
                _log_armijo(states, new, problem, alpha, k)
            states = new
    except SingularInput as exc:
        raise RunAborted(str(exc), records) from exc
    finally:
        if executor is not None:
            executor.shutdown()
    return records
