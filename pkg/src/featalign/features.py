"""Environments, trained workspace features, alignment, and trajectory feature sums.

A trained feature is a radial basis over the end-effector position whose anchor
was fixed in the training environment. Evaluation never looks at the current
environment -- that anchoring is exactly what fails to generalize when objects
move, and what alignment repairs by accumulating a workspace offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import arm
from .errors import DimensionMismatch, UnknownObject
from .trajectory import Trajectory


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ObjectPose:
    id: str
    position: np.ndarray  # (2,)

    def __post_init__(self):
        p = _readonly(self.position)
        if p.shape != (2,) or not np.all(np.isfinite(p)):
            raise DimensionMismatch(f"object {self.id!r} needs a finite 2D position")
        object.__setattr__(self, "position", p)


@dataclass(frozen=True)
class Environment:
    objects: tuple[ObjectPose, ...]
    label: str = ""

    def __post_init__(self):
        objs = tuple(self.objects)
        ids = [o.id for o in objs]
        if len(set(ids)) != len(ids):
            raise DimensionMismatch("object ids must be unique")
        object.__setattr__(self, "objects", objs)

    def position(self, object_id: str) -> np.ndarray:
        for o in self.objects:
            if o.id == object_id:
                return o.position
        raise UnknownObject(f"no object {object_id!r} in environment {self.label!r}")

    def ids(self) -> list[str]:
        return [o.id for o in self.objects]


@dataclass(frozen=True)
class TrainedFeature:
    """Radial basis over the end-effector, anchored at training time.

    ``delta_acc`` accumulates alignment corrections; the effective peak sits at
    anchor + delta_acc. Values are always in [0, 1].
    """

    id: str
    anchor: np.ndarray  # (2,) training-time peak
    width: float = 0.5
    delta_acc: np.ndarray = field(default_factory=lambda: np.zeros(2))
    training_env: Environment | None = None

    def __post_init__(self):
        if self.width <= 0:
            raise DimensionMismatch(f"feature {self.id!r}: width must be positive")
        object.__setattr__(self, "anchor", _readonly(self.anchor))
        object.__setattr__(self, "delta_acc", _readonly(self.delta_acc))

    @property
    def peak(self) -> np.ndarray:
        """Aligned peak position: anchor + accumulated offset."""
        return self.anchor + self.delta_acc

    def eval_points(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at workspace points, (N, 2) -> (N,) in [0, 1]."""
        d = np.atleast_2d(points) - self.peak
        return np.exp(-np.sum(d * d, axis=-1) / (2.0 * self.width**2))

    def eval_point(self, point: np.ndarray) -> float:
        return float(self.eval_points(np.asarray(point)[None, :])[0])

    def gradient_points(self, points: np.ndarray) -> np.ndarray:
        """d(value)/d(point): (N, 2) -> (N, 2)."""
        pts = np.atleast_2d(points)
        d = pts - self.peak
        vals = np.exp(-np.sum(d * d, axis=-1) / (2.0 * self.width**2))
        return -(d / self.width**2) * vals[:, None]

    def translated(self, delta: np.ndarray) -> "TrainedFeature":
        return replace(self, delta_acc=self.delta_acc + delta)


@dataclass(frozen=True)
class ProductFeature:
    """Two-anchor variant for pairwise relations (near, above, between objects).

    Value is the product of two radial bases, so it stays in [0, 1]. Alignment
    can translate the whole feature or just the anchor tied to a moved object.
    """

    id: str
    anchors: np.ndarray  # (2, 2), one row per anchor
    widths: tuple[float, float] = (0.5, 0.5)
    delta_accs: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))

    def __post_init__(self):
        a = _readonly(self.anchors)
        d = _readonly(self.delta_accs)
        if a.shape != (2, 2) or d.shape != (2, 2):
            raise DimensionMismatch("ProductFeature needs two 2D anchors")
        if any(w <= 0 for w in self.widths):
            raise DimensionMismatch("widths must be positive")
        object.__setattr__(self, "anchors", a)
        object.__setattr__(self, "delta_accs", d)

    def _factors(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        out = np.empty((2, pts.shape[0]))
        for i in range(2):
            d = pts - (self.anchors[i] + self.delta_accs[i])
            out[i] = np.exp(-np.sum(d * d, axis=-1) / (2.0 * self.widths[i] ** 2))
        return out

    def eval_points(self, points: np.ndarray) -> np.ndarray:
        f = self._factors(points)
        return f[0] * f[1]

    def eval_point(self, point: np.ndarray) -> float:
        return float(self.eval_points(np.asarray(point)[None, :])[0])

    def gradient_points(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        f = self._factors(pts)
        grad = np.zeros_like(pts)
        for i in range(2):
            d = pts - (self.anchors[i] + self.delta_accs[i])
            grad += -(d / self.widths[i] ** 2) * (f[0] * f[1])[:, None]
        return grad

    def translated(self, delta: np.ndarray) -> "ProductFeature":
        return replace(self, delta_accs=self.delta_accs + delta[None, :])

    def align_anchor(self, anchor_index: int, delta: np.ndarray) -> "ProductFeature":
        """Shift only the anchor associated with one (moved) object."""
        d = self.delta_accs.copy()
        d[anchor_index] += np.asarray(delta, dtype=float)
        return replace(self, delta_accs=d)


def eval_feature(f: TrainedFeature, model: arm.ArmModel, q: np.ndarray) -> float:
    """Feature value at one joint configuration (via the end-effector position)."""
    return f.eval_point(arm.end_effector(model, q))


def align_feature(f, delta: np.ndarray):
    """Translate a feature by delta: the returned feature evaluated at p equals
    the original at p - delta."""
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (2,) or not np.all(np.isfinite(delta)):
        raise DimensionMismatch("delta must be a finite 2D vector")
    return f.translated(delta)


def clone_feature_for_new_object(
    f: TrainedFeature, delta: np.ndarray, new_id: str | None = None
) -> TrainedFeature:
    """Copy a trained feature for a newly seen object, translated by delta.

    The original feature is untouched; the clone gets a fresh id and is meant
    to be appended at index M+1.
    """
    aligned = align_feature(f, delta)
    return replace(aligned, id=new_id if new_id is not None else f"{f.id}+clone")


@dataclass(frozen=True)
class FeatureSet:
    features: tuple[TrainedFeature, ...]

    def __post_init__(self):
        feats = tuple(self.features)
        ids = [f.id for f in feats]
        if len(set(ids)) != len(ids):
            raise DimensionMismatch("feature ids must be unique")
        object.__setattr__(self, "features", feats)

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __getitem__(self, i: int) -> TrainedFeature:
        return self.features[i]

    def ids(self) -> list[str]:
        return [f.id for f in self.features]

    def index_of(self, feature_id: str) -> int:
        for i, f in enumerate(self.features):
            if f.id == feature_id:
                return i
        raise UnknownObject(f"no feature {feature_id!r}")

    def with_aligned(self, index: int, delta: np.ndarray) -> "FeatureSet":
        feats = list(self.features)
        feats[index] = align_feature(feats[index], delta)
        return FeatureSet(tuple(feats))

    def with_appended(self, f: TrainedFeature) -> "FeatureSet":
        return FeatureSet(self.features + (f,))


def object_displacements(env_train: Environment, env_test: Environment) -> list[np.ndarray]:
    """Per-object displacement, training position minus test position, in object order."""
    if set(env_train.ids()) != set(env_test.ids()):
        raise UnknownObject(
            f"environments disagree on objects: {sorted(env_train.ids())} "
            f"vs {sorted(env_test.ids())}"
        )
    return [o.position - env_test.position(o.id) for o in env_train.objects]


def feature_sum(traj: Trajectory, fs: FeatureSet, model: arm.ArmModel) -> np.ndarray:
    """Sum of each feature over all waypoints' end-effector positions, length M."""
    pts = arm.ee_batch(model, traj.waypoints)
    return np.array([float(np.sum(f.eval_points(pts))) for f in fs])


def shifted_feature_sum(
    traj: Trajectory,
    delta: np.ndarray,
    fs: FeatureSet,
    model: arm.ArmModel,
    ik_tol: float = 1e-8,
    ik_max_iters: int = 300,
) -> np.ndarray:
    """Feature sums of the trajectory after shifting every end-effector by delta.

    Propagates Unreachable/NoConvergence from the underlying IK shift.
    """
    shifted = arm.shift_trajectory_end_effector(
        model, traj, delta, tol=ik_tol, max_iters=ik_max_iters
    )
    return feature_sum(shifted, fs, model)
