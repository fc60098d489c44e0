"""Joint-space waypoint trajectories and the human-correction deformation operator.

A correction is a joint torque applied at a single interior waypoint; it bends
the whole trajectory through a fixed smoothing profile while the endpoints stay
pinned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Trajectory:
    """Sequence of T+1 joint configurations; index 0 is the start, T the goal."""

    waypoints: np.ndarray  # (T+1, J)

    def __post_init__(self):
        wp = _readonly(np.atleast_2d(self.waypoints))
        if wp.shape[0] < 3:
            raise DimensionMismatch("a trajectory needs at least T=2 segments (3 waypoints)")
        if not np.all(np.isfinite(wp)):
            raise DimensionMismatch("waypoints must be finite")
        object.__setattr__(self, "waypoints", wp)

    @property
    def steps(self) -> int:
        """T, the number of segments."""
        return self.waypoints.shape[0] - 1

    @property
    def joint_dim(self) -> int:
        return self.waypoints.shape[1]

    @property
    def start(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def goal(self) -> np.ndarray:
        return self.waypoints[-1]


def second_difference_matrix(n: int) -> np.ndarray:
    """Second differences of an n-vector padded with fixed zeros at both ends.

    Full rank, so K^T K is positive definite; rows touching the (pinned)
    endpoints keep only the interior coefficients.
    """
    k = np.zeros((n, n))
    for i in range(n):
        k[i, i] = -2.0
        if i > 0:
            k[i, i - 1] = 1.0
        if i < n - 1:
            k[i, i + 1] = 1.0
    return k


@dataclass(frozen=True)
class DeformationShape:
    """Shape (A proportional to K^T K over interior waypoints) and magnitude (mu).

    A is scaled by one global constant so that a unit torque at the most
    compliant (middle) waypoint displaces that waypoint by exactly mu; torques
    and waypoint displacements then live on comparable scales regardless of T.
    """

    steps: int  # T
    mu: float = 0.15
    a_matrix: np.ndarray = field(init=False, repr=False)
    a_inverse: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.steps < 2:
            raise DimensionMismatch("need T >= 2")
        if self.mu <= 0:
            raise DimensionMismatch("mu must be positive")
        k = second_difference_matrix(self.steps - 1)
        raw = k.T @ k
        raw_inv = np.linalg.inv(raw)
        scale = float(np.max(np.diag(raw_inv)))
        object.__setattr__(self, "a_matrix", _readonly(raw * scale))
        object.__setattr__(self, "a_inverse", _readonly(raw_inv / scale))

    def profile(self, waypoint_index: int) -> np.ndarray:
        """Displacement profile over interior waypoints for a unit torque at one index."""
        if not 1 <= waypoint_index <= self.steps - 1:
            raise DimensionMismatch(
                f"correction index {waypoint_index} not interior (1..{self.steps - 1})"
            )
        return self.mu * self.a_inverse[:, waypoint_index - 1]


@dataclass(frozen=True)
class CorrectionEvent:
    """A human torque applied at one interior waypoint."""

    waypoint_index: int
    torque: np.ndarray  # (J,)
    timestamp: float = 0.0

    def __post_init__(self):
        t = _readonly(np.atleast_1d(self.torque))
        if not np.all(np.isfinite(t)):
            raise DimensionMismatch("torque must be finite")
        object.__setattr__(self, "torque", t)

    @property
    def norm_sq(self) -> float:
        return float(self.torque @ self.torque)


def deform(traj: Trajectory, corr: CorrectionEvent, shape: DeformationShape) -> Trajectory:
    """Apply a single-waypoint correction: interior waypoints move by mu * A^-1 U.

    Linear in the torque; endpoints are never touched. Each joint dimension is
    deformed independently by the same scalar profile.
    """
    if shape.steps != traj.steps:
        raise DimensionMismatch("deformation shape built for a different T")
    if corr.torque.shape[0] != traj.joint_dim:
        raise DimensionMismatch("torque dimension does not match trajectory joints")
    prof = shape.profile(corr.waypoint_index)  # (T-1,)
    wp = traj.waypoints.copy()
    wp[1:-1] += np.outer(prof, corr.torque)
    return Trajectory(wp)


def recover_correction(
    traj_r: Trajectory, traj_h: Trajectory, shape: DeformationShape
) -> CorrectionEvent:
    """Invert ``deform``: recover the single-waypoint torque that produced traj_h.

    Exact when traj_h really came from one correction (U = A (xi_H - xi_R) / mu
    is zero except at the corrected row); otherwise returns the dominant row.
    """
    if traj_r.steps != traj_h.steps or traj_r.joint_dim != traj_h.joint_dim:
        raise DimensionMismatch("trajectories do not match")
    diff = (traj_h.waypoints[1:-1] - traj_r.waypoints[1:-1]) / shape.mu
    u_rows = shape.a_matrix @ diff  # (T-1, J)
    idx = int(np.argmax(np.linalg.norm(u_rows, axis=1)))
    return CorrectionEvent(waypoint_index=idx + 1, torque=u_rows[idx])
