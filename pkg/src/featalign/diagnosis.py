"""Misalignment diagnosis and repair.

When no feature explains a correction, each feature is re-examined in a frame
translated by the displacement of a moved object: if the correction becomes
efficient there, the feature belongs to that object and is translated to the
new position. If no feature passes for any object, a feature is missing and
the human is queried for data to fit a new one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import arm
from .errors import DegenerateFit, DimensionMismatch, NoConvergence, Unreachable
from .features import FeatureSet, TrainedFeature
from .learning import (
    LearnerParams,
    OptimalCorrection,
    _solve_min_correction,
    beta_from_norms,
    estimate_beta,
)
from .trajectory import CorrectionEvent, DeformationShape, Trajectory, recover_correction


class Verdict(str, enum.Enum):
    SHIFTED_WITH_OBJECT = "shifted-with-object"
    UNRELATED = "unrelated"


@dataclass(frozen=True)
class FeatureDiagnosis:
    feature_id: str
    beta_delta: float
    u_star_norm_sq: float
    verdict: Verdict
    note: str = ""


@dataclass(frozen=True)
class DiagnosisReport:
    per_feature: tuple[FeatureDiagnosis, ...]
    missing_feature: bool
    applied_object: str | None
    delta: np.ndarray
    aligned_feature_ids: tuple[str, ...] = ()

    def __post_init__(self):
        d = np.array(self.delta, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "per_feature", tuple(self.per_feature))
        object.__setattr__(self, "aligned_feature_ids", tuple(self.aligned_feature_ids))
        all_unrelated = all(p.verdict is Verdict.UNRELATED for p in self.per_feature)
        if self.missing_feature != all_unrelated:
            raise DimensionMismatch(
                "missing_feature must hold exactly when every verdict is unrelated"
            )
        shifted = {
            p.feature_id for p in self.per_feature if p.verdict is Verdict.SHIFTED_WITH_OBJECT
        }
        if not set(self.aligned_feature_ids) <= shifted:
            raise DimensionMismatch("only shifted-with-object features can be aligned")


@dataclass(frozen=True)
class DeltaHypothesis:
    """One candidate explanation for which object the correction relates to."""

    object_id: str
    delta: np.ndarray
    max_beta_delta: float = float("nan")

    def __post_init__(self):
        d = np.array(self.delta, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)


@dataclass(frozen=True)
class MissingFeatureQuery:
    """Request for human samples of an unknown feature near the correction."""

    center: np.ndarray
    half_extent: float = 0.75
    count: int = 25

    def __post_init__(self):
        c = np.array(self.center, dtype=float)
        if c.shape != (2,) or not np.all(np.isfinite(c)):
            raise DimensionMismatch("query center must be a finite 2D point")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if self.half_extent <= 0 or self.count < 8:
            raise DimensionMismatch("query needs a positive extent and >= 8 samples")


def shifted_optimal_correction(
    xi_r: Trajectory,
    xi_h: Trajectory,
    delta: np.ndarray,
    feature_index: int,
    shape: DeformationShape,
    model: arm.ArmModel,
    fs: FeatureSet,
    params: LearnerParams,
) -> OptimalCorrection:
    """Minimum-effort correction in the frame where both trajectories are moved by delta.

    The same solver as detection, applied to the shifted original against the
    shifted deformed trajectory's feature sum. Raises Unreachable/NoConvergence
    when the shift itself fails.
    """
    observed = recover_correction(xi_r, xi_h, shape)
    delta = np.asarray(delta, dtype=float)
    if np.all(delta == 0.0):
        shifted_r, shifted_h = xi_r, xi_h
        observed_exact = True
    else:
        shifted_r = arm.shift_trajectory_end_effector(model, xi_r, delta)
        shifted_h = arm.shift_trajectory_end_effector(model, xi_h, delta)
        observed_exact = False
    feature = fs[feature_index]
    phi_target = float(feature.eval_points(arm.ee_batch(model, shifted_h.waypoints)).sum())
    return _solve_min_correction(
        shifted_r,
        phi_target,
        feature,
        shape,
        model,
        params,
        observed,
        observed_exact=observed_exact,
    )


def estimate_beta_delta(
    u_h: np.ndarray, u_star_delta: np.ndarray, params: LearnerParams
) -> float:
    """Shifted-frame confidence; identical contract (and clamps) to estimate_beta."""
    return estimate_beta(u_h, u_star_delta, params)


def _diagnose_features(
    xi_r: Trajectory,
    corr: CorrectionEvent,
    xi_h: Trajectory,
    fs: FeatureSet,
    delta: np.ndarray,
    shape: DeformationShape,
    model: arm.ArmModel,
    params: LearnerParams,
) -> list[FeatureDiagnosis]:
    out = []
    for i, f in enumerate(fs):
        try:
            res = shifted_optimal_correction(
                xi_r, xi_h, delta, i, shape, model, fs, params
            )
        except (Unreachable, NoConvergence) as exc:
            out.append(
                FeatureDiagnosis(f.id, 0.0, float("nan"), Verdict.UNRELATED,
                                 note=f"shift-failed: {exc}")
            )
            continue
        if not res.feasible:
            out.append(
                FeatureDiagnosis(f.id, 0.0, res.norm_sq, Verdict.UNRELATED,
                                 note=f"infeasible (residual {res.residual:.2e})")
            )
            continue
        beta_delta = beta_from_norms(corr.norm_sq, res.norm_sq, params)
        verdict = (
            Verdict.SHIFTED_WITH_OBJECT
            if beta_delta >= params.epsilon_beta
            else Verdict.UNRELATED
        )
        out.append(FeatureDiagnosis(f.id, beta_delta, res.norm_sq, verdict))
    return out


def _query_from_correction(
    xi_h: Trajectory, corr: CorrectionEvent, model: arm.ArmModel
) -> MissingFeatureQuery:
    center = arm.end_effector(model, xi_h.waypoints[corr.waypoint_index])
    reach = model.reach
    center = np.clip(center, model.base_position - reach, model.base_position + reach)
    return MissingFeatureQuery(center=center)


def diagnose_and_correct(
    xi_r: Trajectory,
    corr: CorrectionEvent,
    xi_h: Trajectory,
    fs: FeatureSet,
    env_train,
    env_test,
    model: arm.ArmModel,
    shape: DeformationShape,
    params: LearnerParams,
    policy: str = "permissive",
) -> tuple[FeatureSet, list[DiagnosisReport], MissingFeatureQuery | None]:
    """Per-object shifted diagnosis, alignment of explaining features, or a query.

    Moved objects are processed in environment order. Every feature whose
    shifted confidence clears the threshold is translated to the object's new
    position ("permissive"); the "conservative" policy aligns only the best
    feature. When no feature passes for any moved object (including the case
    where nothing moved), the correction must come from a missing feature and
    a query is returned instead.
    """
    if policy not in ("permissive", "conservative"):
        raise DimensionMismatch(f"unknown alignment policy {policy!r}")

    moved = []
    for obj in env_train.objects:
        d = obj.position - env_test.position(obj.id)
        if np.linalg.norm(d) > 1e-12:
            moved.append((obj.id, d))

    reports: list[DiagnosisReport] = []
    current = fs
    any_aligned = False

    if not moved:
        per_feature = _diagnose_features(
            xi_r, corr, xi_h, current, np.zeros(2), shape, model, params
        )
        reports.append(
            DiagnosisReport(
                per_feature=tuple(per_feature),
                missing_feature=True,
                applied_object=None,
                delta=np.zeros(2),
            )
        )
        return current, reports, _query_from_correction(xi_h, corr, model)

    for object_id, delta in moved:
        per_feature = _diagnose_features(
            xi_r, corr, xi_h, current, delta, shape, model, params
        )
        shifted_ids = [
            p.feature_id for p in per_feature if p.verdict is Verdict.SHIFTED_WITH_OBJECT
        ]
        if policy == "conservative" and shifted_ids:
            best = max(
                (p for p in per_feature if p.verdict is Verdict.SHIFTED_WITH_OBJECT),
                key=lambda p: p.beta_delta,
            )
            shifted_ids = [best.feature_id]
        aligned_ids = []
        for fid in shifted_ids:
            idx = current.index_of(fid)
            # delta points from the new position back to the training one, so
            # the anchor moves by the opposite vector to land on the object
            current = current.with_aligned(idx, -delta)
            aligned_ids.append(fid)
            any_aligned = True
        reports.append(
            DiagnosisReport(
                per_feature=tuple(per_feature),
                missing_feature=not shifted_ids,
                applied_object=object_id,
                delta=delta,
                aligned_feature_ids=tuple(aligned_ids),
            )
        )
        if aligned_ids:
            break  # explained; remaining objects are re-examined only if needed

    if any_aligned:
        return current, reports, None
    return current, reports, _query_from_correction(xi_h, corr, model)


def diagnose_unknown_object(
    xi_r: Trajectory,
    corr: CorrectionEvent,
    xi_h: Trajectory,
    fs: FeatureSet,
    hypotheses: list[DeltaHypothesis],
    shape: DeformationShape,
    model: arm.ArmModel,
    params: LearnerParams,
) -> tuple[DeltaHypothesis, DiagnosisReport]:
    """Score each candidate displacement and report the one that best explains
    the correction; ties break toward the smallest displacement, then list order.
    """
    if not hypotheses:
        raise DimensionMismatch("need at least one hypothesis")
    scored = []
    for rank, hyp in enumerate(hypotheses):
        per_feature = _diagnose_features(
            xi_r, corr, xi_h, fs, hyp.delta, shape, model, params
        )
        best_beta = max(p.beta_delta for p in per_feature)
        scored.append((best_beta, float(np.linalg.norm(hyp.delta)), rank, hyp, per_feature))
    scored.sort(key=lambda s: (-s[0], s[1], s[2]))
    best_beta, _, _, hyp, per_feature = scored[0]
    report = DiagnosisReport(
        per_feature=tuple(per_feature),
        missing_feature=all(p.verdict is Verdict.UNRELATED for p in per_feature),
        applied_object=hyp.object_id,
        delta=hyp.delta,
    )
    winner = DeltaHypothesis(hyp.object_id, hyp.delta, max_beta_delta=best_beta)
    return winner, report


def learn_missing_feature(
    query: MissingFeatureQuery,
    samples: list[tuple[np.ndarray, float]],
    feature_id: str = "learned",
) -> tuple[TrainedFeature, float]:
    """Fit a radial basis (anchor, width) to human-provided samples.

    Grid-seeded nonlinear least squares; returns the feature and the fit RMSE.
    Raises DegenerateFit when the samples carry no signal.
    """
    if len(samples) < 8:
        raise DimensionMismatch("need at least 8 samples")
    pts = np.array([np.asarray(p, dtype=float) for p, _ in samples])
    vals = np.array([float(v) for _, v in samples])
    if float(np.ptp(vals)) < 1e-12:
        raise DegenerateFit("all sample values are equal; nothing to fit")

    def residuals(x):
        ax, ay, log_w = x
        w = math.exp(log_w)
        d = pts - np.array([ax, ay])
        return np.exp(-np.sum(d * d, axis=1) / (2.0 * w * w)) - vals

    # seed anchors at the highest-valued samples and a coarse grid over the box
    order = np.argsort(vals)[::-1]
    anchor_seeds = [pts[i] for i in order[:3]]
    lo = query.center - query.half_extent
    hi = query.center + query.half_extent
    for gx in np.linspace(lo[0], hi[0], 3):
        for gy in np.linspace(lo[1], hi[1], 3):
            anchor_seeds.append(np.array([gx, gy]))

    best = None
    for a in anchor_seeds:
        for w0 in (0.2, 0.5):
            res = optimize.least_squares(
                residuals, x0=[a[0], a[1], math.log(w0)], method="lm", max_nfev=2000
            )
            if best is None or res.cost < best.cost:
                best = res
    ax, ay, log_w = best.x
    rmse = float(np.sqrt(np.mean(residuals(best.x) ** 2)))
    feature = TrainedFeature(
        id=feature_id, anchor=np.array([ax, ay]), width=math.exp(log_w)
    )
    return feature, rmse
