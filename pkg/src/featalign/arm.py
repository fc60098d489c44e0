"""Planar N-link serial arm: forward kinematics, Jacobian, damped-least-squares IK,
and end-effector-level shifting of whole trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NoConvergence, Unreachable
from .trajectory import Trajectory


def _readonly(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ArmModel:
    """Planar serial manipulator: link lengths, base position, per-joint angle limits."""

    link_lengths: tuple[float, ...]
    base_position: np.ndarray = field(default_factory=lambda: np.zeros(2))
    joint_limits: np.ndarray | None = None  # (J, 2); defaults to [-pi, pi] per joint

    def __post_init__(self):
        lengths = tuple(float(l) for l in self.link_lengths)
        if len(lengths) < 2:
            raise DimensionMismatch("need at least 2 links")
        if any(l <= 0 for l in lengths):
            raise DimensionMismatch("link lengths must be positive")
        limits = self.joint_limits
        if limits is None:
            limits = np.tile([-np.pi, np.pi], (len(lengths), 1))
        limits = np.asarray(limits, dtype=float)
        if limits.shape != (len(lengths), 2):
            raise DimensionMismatch("joint_limits must be (J, 2)")
        if np.any(limits[:, 0] >= limits[:, 1]):
            raise DimensionMismatch("each joint limit needs min < max")
        object.__setattr__(self, "link_lengths", lengths)
        object.__setattr__(self, "base_position", _readonly(self.base_position))
        object.__setattr__(self, "joint_limits", _readonly(limits))

    @property
    def joint_dim(self) -> int:
        return len(self.link_lengths)

    @property
    def reach(self) -> float:
        return float(sum(self.link_lengths))

    def check_config(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.joint_dim,):
            raise DimensionMismatch(
                f"expected {self.joint_dim} joint angles, got shape {q.shape}"
            )
        return q


def forward_kinematics(model: ArmModel, q: np.ndarray) -> np.ndarray:
    """All J+1 joint frame positions; row 0 is the base, the last row the end-effector."""
    q = model.check_config(q)
    return fk_batch(model, q[None, :])[0]


def fk_batch(model: ArmModel, configs: np.ndarray) -> np.ndarray:
    """Vectorized FK: (N, J) joint angles -> (N, J+1, 2) workspace points."""
    configs = np.atleast_2d(np.asarray(configs, dtype=float))
    if configs.shape[1] != model.joint_dim:
        raise DimensionMismatch("config batch has wrong joint dimension")
    s = np.cumsum(configs, axis=1)  # absolute link angles
    lengths = np.asarray(model.link_lengths)
    seg = np.stack([lengths * np.cos(s), lengths * np.sin(s)], axis=-1)  # (N, J, 2)
    pts = np.concatenate(
        [np.zeros((configs.shape[0], 1, 2)), np.cumsum(seg, axis=1)], axis=1
    )
    return pts + model.base_position


def end_effector(model: ArmModel, q: np.ndarray) -> np.ndarray:
    return forward_kinematics(model, q)[-1]


def ee_batch(model: ArmModel, configs: np.ndarray) -> np.ndarray:
    """End-effector positions for a batch of configurations: (N, J) -> (N, 2)."""
    return fk_batch(model, configs)[:, -1, :]


def jacobian(model: ArmModel, q: np.ndarray) -> np.ndarray:
    """2 x J matrix of end-effector position partials with respect to joint angles."""
    return jacobian_batch(model, model.check_config(q)[None, :])[0]


def jacobian_batch(model: ArmModel, configs: np.ndarray) -> np.ndarray:
    """Vectorized end-effector Jacobians: (N, J) -> (N, 2, J)."""
    configs = np.atleast_2d(np.asarray(configs, dtype=float))
    if configs.shape[1] != model.joint_dim:
        raise DimensionMismatch("config batch has wrong joint dimension")
    s = np.cumsum(configs, axis=1)
    lengths = np.asarray(model.link_lengths)
    # column j sums the contributions of every link at or beyond joint j
    sin_tail = np.cumsum((lengths * np.sin(s))[:, ::-1], axis=1)[:, ::-1]
    cos_tail = np.cumsum((lengths * np.cos(s))[:, ::-1], axis=1)[:, ::-1]
    return np.stack([-sin_tail, cos_tail], axis=1)


def inverse_kinematics(
    model: ArmModel,
    q_init: np.ndarray,
    target: np.ndarray,
    tol: float = 1e-8,
    max_iters: int = 300,
    damping: float = 0.05,
    step_clamp: float = 0.2,
) -> np.ndarray:
    """Damped-least-squares IK seeded at q_init.

    The damping keeps steps finite near singular (stretched or folded)
    configurations; per-joint steps are clamped so iterates stay on one branch.
    Raises Unreachable if the target is beyond total reach, NoConvergence if
    the residual is still above tol after max_iters (retry with another seed).
    """
    q = model.check_config(q_init)
    target = np.asarray(target, dtype=float)
    if target.shape != (2,):
        raise DimensionMismatch("target must be a 2D point")
    if np.linalg.norm(target - model.base_position) > model.reach + 1e-12:
        raise Unreachable(
            f"target {target.tolist()} beyond reach {model.reach:.3f}", target=target
        )
    limits = model.joint_limits
    q = np.clip(q, limits[:, 0], limits[:, 1])
    damping_sq = damping * damping
    for _ in range(max_iters):
        err = target - end_effector(model, q)
        if np.linalg.norm(err) <= tol:
            return q
        jac = jacobian(model, q)
        gram = jac @ jac.T + damping_sq * np.eye(2)
        dq = jac.T @ np.linalg.solve(gram, err)
        dq = np.clip(dq, -step_clamp, step_clamp)
        q = np.clip(q + dq, limits[:, 0], limits[:, 1])
    residual = float(np.linalg.norm(target - end_effector(model, q)))
    if residual <= tol:
        return q
    raise NoConvergence(
        f"IK residual {residual:.3e} > tol {tol:.1e} after {max_iters} iterations",
        residual=residual,
    )


def shift_trajectory_end_effector(
    model: ArmModel,
    traj: Trajectory,
    delta: np.ndarray,
    tol: float = 1e-8,
    max_iters: int = 300,
) -> Trajectory:
    """Translate every waypoint's end-effector by delta, re-solving joints via IK.

    Each waypoint seeds from the previous shifted solution so the whole
    trajectory stays on one IK branch. Failure at any waypoint aborts the whole
    shift and reports the offending index.
    """
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (2,):
        raise DimensionMismatch("delta must be a 2D vector")
    if np.all(delta == 0.0):
        return traj
    if traj.joint_dim != model.joint_dim:
        raise DimensionMismatch("trajectory joint dimension does not match the arm")
    targets = ee_batch(model, traj.waypoints) + delta
    out = np.empty_like(traj.waypoints)
    seed = traj.waypoints[0]
    for t, target in enumerate(targets):
        try:
            out[t] = inverse_kinematics(
                model, seed, target, tol=tol, max_iters=max_iters
            )
        except (Unreachable, NoConvergence) as exc:
            exc.waypoint_index = t
            raise
        seed = out[t]
    return Trajectory(out)
