"""Simulated human: holds the true, generalizing features and decides when and
how to push the arm.

The true features use the same radial-basis family as the robot's, but their
anchors follow the live object positions. Corrections target one feature at a
time and are parameterized as workspace pushes mapped through the Jacobian
transpose, the same channel a person has through the UI cursor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import arm
from .diagnosis import MissingFeatureQuery
from .errors import DimensionMismatch
from .features import Environment, FeatureSet, TrainedFeature, feature_sum
from .trajectory import CorrectionEvent, DeformationShape, Trajectory, deform


@dataclass(frozen=True)
class TrueFeatureSpec:
    """One thing the human actually cares about: a zone around an object
    (anchor follows the object) or around a fixed workspace point."""

    id: str
    width: float = 0.5
    object_id: str | None = None
    anchor: np.ndarray | None = None  # used when object_id is None

    def __post_init__(self):
        if (self.object_id is None) == (self.anchor is None):
            raise DimensionMismatch(
                f"true feature {self.id!r}: give exactly one of object_id or anchor"
            )
        if self.anchor is not None:
            a = np.array(self.anchor, dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, "anchor", a)

    def resolve(self, env: Environment) -> TrainedFeature:
        anchor = env.position(self.object_id) if self.object_id else self.anchor
        return TrainedFeature(id=self.id, anchor=anchor, width=self.width)


class TrueHuman:
    """Noisily-rational corrector; deterministic best response unless a finite
    Boltzmann temperature is set. One owner per episode (holds an RNG)."""

    def __init__(
        self,
        feature_specs: list[TrueFeatureSpec],
        theta_true: np.ndarray,
        lam: float = 0.5,
        correction_trigger: float = 0.2,
        temperature: float | None = None,  # None = deterministic best correction
        seed: int = 0,
        max_push: float = 1.5,  # meters, workspace push magnitude bound
        n_directions: int = 12,
        n_magnitudes: int = 6,
        waypoint_candidates: int = 9,
    ):
        theta_true = np.asarray(theta_true, dtype=float)
        if len(feature_specs) != len(theta_true):
            raise DimensionMismatch("theta_true length must match the feature specs")
        if np.any(theta_true < 0):
            raise DimensionMismatch("theta_true must be nonnegative")
        self.feature_specs = list(feature_specs)
        self.theta_true = theta_true
        self.lam = float(lam)
        self.correction_trigger = float(correction_trigger)
        self.temperature = temperature
        self.rng = np.random.default_rng(seed)
        self.max_push = float(max_push)
        self.n_directions = int(n_directions)
        self.n_magnitudes = int(n_magnitudes)
        self.waypoint_candidates = int(waypoint_candidates)
        self.last_target: TrueFeatureSpec | None = None

    def true_features(self, env: Environment) -> FeatureSet:
        """The generalizing representation: anchors track the current objects."""
        return FeatureSet(tuple(s.resolve(env) for s in self.feature_specs))

    def true_cost(self, traj: Trajectory, env: Environment, model: arm.ArmModel) -> float:
        phi = feature_sum(traj, self.true_features(env), model)
        return float(self.theta_true @ phi)

    def _candidate_waypoints(self, traj: Trajectory, stochastic: bool) -> list[int]:
        interior = list(range(1, traj.steps))
        if not stochastic or len(interior) <= self.waypoint_candidates:
            return interior
        picks = np.linspace(0, len(interior) - 1, self.waypoint_candidates)
        return sorted({interior[int(round(p))] for p in picks})

    def maybe_correct(
        self,
        traj: Trajectory,
        env: Environment,
        model: arm.ArmModel,
        shape: DeformationShape,
        timestamp: float = 0.0,
    ) -> CorrectionEvent | None:
        """Push the arm if some feature's cost contribution exceeds the trigger.

        The push minimizes (that feature's weighted sum of the deformed
        trajectory) + lam * ||torque||^2 over waypoint x workspace-push
        candidates, polished by a continuous optimizer. Returns None when the
        trajectory is already acceptable or no push strictly improves.
        """
        feats = self.true_features(env)
        phi = feature_sum(traj, feats, model)
        contributions = self.theta_true * phi
        target_idx = int(np.argmax(contributions))
        if contributions[target_idx] <= self.correction_trigger:
            return None
        spec = self.feature_specs[target_idx]
        feature = feats[target_idx]
        weight = float(self.theta_true[target_idx])

        def score(t: int, torque: np.ndarray) -> float:
            deformed = deform(traj, CorrectionEvent(t, torque), shape)
            pts = arm.ee_batch(model, deformed.waypoints)
            value = weight * float(feature.eval_points(pts).sum())
            return value + self.lam * float(torque @ torque)

        base_cost = weight * float(phi[target_idx])
        stochastic = self.temperature is not None
        angles = np.linspace(0.0, 2.0 * math.pi, self.n_directions, endpoint=False)
        mags = np.linspace(self.max_push / self.n_magnitudes, self.max_push, self.n_magnitudes)
        # candidates are workspace pushes mapped to torques at each waypoint
        grid: list[tuple[float, int, np.ndarray]] = []
        for t in self._candidate_waypoints(traj, stochastic):
            jac_t = arm.jacobian(model, traj.waypoints[t]).T
            for a in angles:
                direction = np.array([math.cos(a), math.sin(a)])
                for m in mags:
                    torque = jac_t @ (m * direction)
                    grid.append((score(t, torque), t, torque))

        if stochastic:
            # Boltzmann sample over the candidate grid
            scores = np.array([g[0] for g in grid])
            logits = -scores / self.temperature
            logits -= logits.max()
            probs = np.exp(logits)
            probs /= probs.sum()
            pick = int(self.rng.choice(len(grid), p=probs))
            best_score, best_t, best_torque = grid[pick]
        else:
            # polish the best few waypoints in full torque space so the emitted
            # correction is effort-optimal, not just grid-optimal
            by_waypoint: dict[int, tuple[float, int, np.ndarray]] = {}
            for entry in grid:
                t = entry[1]
                if t not in by_waypoint or entry[0] < by_waypoint[t][0]:
                    by_waypoint[t] = entry
            leaders = sorted(by_waypoint.values(), key=lambda g: g[0])[:3]
            best_score, best_t, best_torque = leaders[0]
            for g_score, t, torque in leaders:
                res = optimize.minimize(
                    lambda u, t=t: score(t, u),
                    torque,
                    method="Nelder-Mead",
                    options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 800},
                )
                if res.fun < best_score:
                    best_score, best_t, best_torque = float(res.fun), t, res.x

        if best_score >= base_cost:
            return None  # no push strictly improves cost + effort
        self.last_target = spec
        return CorrectionEvent(waypoint_index=best_t, torque=best_torque, timestamp=timestamp)

    def answer_feature_query(
        self, query: MissingFeatureQuery, env: Environment
    ) -> list[tuple[np.ndarray, float]]:
        """Sample the feature the human was correcting for on a jittered grid.

        Falls back to the true feature with the highest value at the query
        center when no correction has been issued yet.
        """
        if self.last_target is not None:
            feature = self.last_target.resolve(env)
        else:
            candidates = [s.resolve(env) for s in self.feature_specs]
            feature = max(candidates, key=lambda f: f.eval_point(query.center))
        side = max(2, int(math.ceil(math.sqrt(query.count))))
        xs = np.linspace(-query.half_extent, query.half_extent, side)
        pts = np.array([[x, y] for x in xs for y in xs])[: query.count]
        jitter_scale = 0.25 * (xs[1] - xs[0])
        pts = pts + self.rng.uniform(-jitter_scale, jitter_scale, size=pts.shape)
        pts = pts + query.center
        vals = feature.eval_points(pts)
        return [(p, float(v)) for p, v in zip(pts, vals)]
