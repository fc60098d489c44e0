"""Trajectory optimization: minimize weighted feature sums plus a smoothness term.

Gradient descent with backtracking over the interior waypoints, initialized from
straight-line joint interpolation. Endpoints never move. A stand-in for a full
trajectory optimizer; downstream code only consumes the resulting waypoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import arm
from .errors import DimensionMismatch, NonFiniteValue
from .features import FeatureSet
from .trajectory import Trajectory


@dataclass(frozen=True)
class PlannerParams:
    steps: int = 20  # T
    smoothness_weight: float = 1.0
    step_size: float = 0.1  # initial backtracking step
    max_iters: int = 2000
    tol: float = 1e-7  # stop when the gradient inf-norm falls below this
    restarts: int = 0  # extra jittered initializations
    jitter: float = 0.15
    seed: int = 0


def straight_line(start: np.ndarray, goal: np.ndarray, steps: int) -> Trajectory:
    """Linear joint-space interpolation with T segments."""
    alphas = np.linspace(0.0, 1.0, steps + 1)[:, None]
    return Trajectory((1 - alphas) * np.asarray(start) + alphas * np.asarray(goal))


def trajectory_cost(
    traj: Trajectory,
    fs: FeatureSet,
    theta: np.ndarray,
    model: arm.ArmModel,
    smoothness_weight: float,
) -> float:
    pts = arm.ee_batch(model, traj.waypoints)
    feature_term = sum(
        float(th) * float(np.sum(f.eval_points(pts))) for th, f in zip(theta, fs)
    )
    steps = np.diff(traj.waypoints, axis=0)
    return feature_term + smoothness_weight * float(np.sum(steps * steps))


def cost_gradient(
    traj: Trajectory,
    fs: FeatureSet,
    theta: np.ndarray,
    model: arm.ArmModel,
    smoothness_weight: float,
) -> np.ndarray:
    """Analytic gradient of the planning objective w.r.t. interior waypoints, (T-1, J).

    Feature part chains the radial-basis gradient through the arm Jacobian;
    smoothness part is the discrete Laplacian of the waypoint sequence.
    """
    wp = traj.waypoints
    interior = wp[1:-1]
    grad = np.zeros_like(interior)
    pts = arm.ee_batch(model, interior)
    jacs = arm.jacobian_batch(model, interior)  # (T-1, 2, J)
    for th, f in zip(theta, fs):
        if th == 0.0:
            continue
        dphi_dp = f.gradient_points(pts)  # (T-1, 2)
        grad += th * np.einsum("tk,tkj->tj", dphi_dp, jacs)
    grad += 2.0 * smoothness_weight * (2.0 * interior - wp[:-2] - wp[2:])
    return grad


def _descend(
    init: Trajectory,
    fs: FeatureSet,
    theta: np.ndarray,
    model: arm.ArmModel,
    params: PlannerParams,
) -> tuple[Trajectory, float, float, int]:
    w_s = params.smoothness_weight
    wp = init.waypoints.copy()
    traj = Trajectory(wp)
    cost = trajectory_cost(traj, fs, theta, model, w_s)
    if not np.isfinite(cost):
        raise NonFiniteValue("planning objective is not finite at the initialization")
    step = params.step_size
    iters = 0
    grad_norm = np.inf
    for iters in range(1, params.max_iters + 1):
        grad = cost_gradient(traj, fs, theta, model, w_s)
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= params.tol:
            break
        accepted = False
        gsq = float(np.sum(grad * grad))
        while step > 1e-14:
            cand = traj.waypoints.copy()
            cand[1:-1] -= step * grad
            cand_traj = Trajectory(cand)
            cand_cost = trajectory_cost(cand_traj, fs, theta, model, w_s)
            if cand_cost <= cost - 1e-4 * step * gsq:
                traj, cost = cand_traj, cand_cost
                step = min(step * 1.5, 10.0)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # no descent direction at float precision
    return traj, cost, grad_norm, iters


def plan(
    model: arm.ArmModel,
    fs: FeatureSet,
    theta: np.ndarray,
    start: np.ndarray,
    goal: np.ndarray,
    params: PlannerParams = PlannerParams(),
) -> Trajectory:
    """Locally optimal trajectory between fixed start and goal configurations.

    Deterministic given params.seed. With restarts > 0, jittered initializations
    compete; ties break toward the lowest cost, then the earliest seed.
    """
    theta = np.asarray(theta, dtype=float)
    start = model.check_config(np.asarray(start, dtype=float))
    goal = model.check_config(np.asarray(goal, dtype=float))
    if len(theta) != len(fs):
        raise DimensionMismatch("theta length must match the number of features")
    if not np.all(np.isfinite(theta)):
        raise NonFiniteValue("theta contains non-finite entries")

    inits = [straight_line(start, goal, params.steps)]
    rng = np.random.default_rng(params.seed)
    for _ in range(params.restarts):
        wp = inits[0].waypoints.copy()
        wp[1:-1] += rng.normal(scale=params.jitter, size=wp[1:-1].shape)
        inits.append(Trajectory(wp))

    best: tuple[Trajectory, float] | None = None
    for init in inits:
        traj, cost, _, _ = _descend(init, fs, theta, model, params)
        if best is None or cost < best[1] - 1e-12:
            best = (traj, cost)
    return best[0]
