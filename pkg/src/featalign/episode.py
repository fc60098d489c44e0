"""The act / correct / detect / diagnose / update loop, with event logging.

One "step" is a full cycle: plan (or keep the current plan), receive at most
one correction, detect how well the features explain it, diagnose and repair
the representation if they cannot, update the weights, replan. The engine is
shared by the batch harness and the live correction service so both drive the
exact same math.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import arm
from .diagnosis import (
    DeltaHypothesis,
    diagnose_and_correct,
    diagnose_unknown_object,
    learn_missing_feature,
)
from .errors import ScenarioError
from .features import FeatureSet, clone_feature_for_new_object, feature_sum
from .learning import Belief, beta_from_norms, confidence_update, optimal_correction
from .oracle import TrueHuman
from .planner import plan
from .scenario import Scenario
from .trajectory import CorrectionEvent, DeformationShape, Trajectory, deform

REPORT_SCHEMA_VERSION = 1


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass
class EpisodeReport:
    label: str
    seed: int
    policy: str
    status: str  # converged | budget_exhausted
    steps: int
    events: list[dict]
    final_theta: list[float]
    final_beta: float
    final_e_posterior: float
    final_features: list[dict]
    metrics: dict

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "schema_version": REPORT_SCHEMA_VERSION,
                "label": self.label,
                "seed": self.seed,
                "policy": self.policy,
                "status": self.status,
                "steps": self.steps,
                "events": self.events,
                "final": {
                    "theta": self.final_theta,
                    "beta_hat": self.final_beta,
                    "e_posterior": self.final_e_posterior,
                    "features": self.final_features,
                },
                "metrics": self.metrics,
            }
        )

    @classmethod
    def from_dict(cls, doc: dict) -> "EpisodeReport":
        if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ScenarioError(
                f"unsupported report schema_version {doc.get('schema_version')}",
                "schema_version",
            )
        final = doc["final"]
        return cls(
            label=doc["label"],
            seed=doc["seed"],
            policy=doc["policy"],
            status=doc["status"],
            steps=doc["steps"],
            events=doc["events"],
            final_theta=final["theta"],
            final_beta=final["beta_hat"],
            final_e_posterior=final["e_posterior"],
            final_features=final["features"],
            metrics=doc["metrics"],
        )


def emit_report(report: EpisodeReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def load_report(path: str | Path) -> EpisodeReport:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON (line {exc.lineno}, col {exc.colno}): {exc.msg}")
    return EpisodeReport.from_dict(doc)


def recompute_metrics(events: list[dict]) -> dict:
    """Rebuild the summary metrics from the event log (consistency oracle)."""
    plans = [e for e in events if e["type"] == "plan"]
    corrections = [e for e in events if e["type"] == "correction"]
    out = {
        "correction_count": len(corrections),
        "total_human_effort": float(sum(c["torque_norm_sq"] for c in corrections)),
        "clearance_before": plans[0]["clearances"] if plans else {},
        "clearance_after": plans[-1]["clearances"] if plans else {},
    }
    return out


class EpisodeEngine:
    """Stateful episode driver; one owner at a time (harness loop or session)."""

    def __init__(
        self,
        scenario: Scenario,
        feature_set: FeatureSet | None = None,
        belief: Belief | None = None,
    ):
        self.scenario = scenario
        self.model = scenario.model
        self.fs = feature_set if feature_set is not None else scenario.feature_set
        theta = belief.theta if belief is not None else scenario.theta_init
        self.theta = np.array(theta, dtype=float)
        if len(self.theta) != len(self.fs):
            raise ScenarioError("theta length must match the feature set")
        self.beta_hat = belief.beta_hat if belief is not None else 0.0
        self.e_posterior = belief.e_posterior if belief is not None else 0.5
        self.shape = DeformationShape(steps=scenario.planner.steps, mu=scenario.mu)
        spec = scenario.oracle
        self.oracle = TrueHuman(
            feature_specs=list(spec.feature_specs),
            theta_true=spec.theta_true,
            lam=spec.lam,
            correction_trigger=spec.trigger,
            temperature=spec.temperature,
            seed=spec.seed + scenario.seed,
            max_push=spec.max_push,
        )
        self.params = scenario.learner
        self.events: list[dict] = []
        self.step_no = 0
        self.current: Trajectory | None = None
        self.xi_h: Trajectory | None = None
        self.last_correction: CorrectionEvent | None = None
        self.pending_update: tuple[np.ndarray, np.ndarray, float] | None = None
        self.status = "running"
        self.learned_count = 0

    # -- logging ---------------------------------------------------------

    def _log(self, event_type: str, **data) -> dict:
        event = {"step": self.step_no, "type": event_type}
        event.update(_jsonable(data))
        self.events.append(event)
        return event

    def _traj_payload(self, traj: Trajectory) -> dict:
        pts = arm.ee_batch(self.model, traj.waypoints)
        clearances = {
            o.id: float(np.min(np.linalg.norm(pts - o.position, axis=1)))
            for o in self.scenario.env_test.objects
        }
        return {
            "waypoints": traj.waypoints,
            "ee": pts,
            "clearances": clearances,
        }

    def belief(self) -> Belief:
        return Belief(self.theta, self.beta_hat, self.e_posterior)

    # -- loop pieces -----------------------------------------------------

    def plan_current(self, reason: str) -> Trajectory:
        self.current = plan(
            self.model,
            self.fs,
            self.theta,
            self.scenario.start,
            self.scenario.goal,
            self.scenario.planner,
        )
        self._log("plan", reason=reason, **self._traj_payload(self.current))
        return self.current

    def consult_oracle(self) -> CorrectionEvent | None:
        return self.oracle.maybe_correct(
            self.current,
            self.scenario.env_test,
            self.model,
            self.shape,
            timestamp=float(self.step_no),
        )

    def _detect(self, corr: CorrectionEvent) -> tuple[list[dict], float]:
        per_feature = []
        best = 0.0
        for i, f in enumerate(self.fs):
            res = optimal_correction(
                self.current, self.xi_h, i, self.shape, self.model, self.fs, self.params
            )
            beta_i = beta_from_norms(corr.norm_sq, res.norm_sq, self.params)
            per_feature.append(
                {
                    "feature_id": f.id,
                    "u_star_norm_sq": res.norm_sq,
                    "beta": beta_i,
                    "waypoint_index": res.waypoint_index,
                }
            )
            best = max(best, beta_i)
        return per_feature, best

    def _new_object_hypotheses(self) -> list[DeltaHypothesis]:
        train_ids = set(self.scenario.env_train.ids())
        hyps = []
        for new_obj in self.scenario.env_test.objects:
            if new_obj.id in train_ids:
                continue
            for old_obj in self.scenario.env_train.objects:
                hyps.append(
                    DeltaHypothesis(
                        object_id=f"{new_obj.id}<-{old_obj.id}",
                        delta=old_obj.position - new_obj.position,
                    )
                )
        return hyps

    def process_correction(self, corr: CorrectionEvent) -> None:
        """Deform, detect, and (when confidence is low) diagnose and repair."""
        self.last_correction = corr
        self.xi_h = deform(self.current, corr, self.shape)
        self._log(
            "correction",
            waypoint_index=corr.waypoint_index,
            torque=corr.torque,
            torque_norm_sq=corr.norm_sq,
            deformed_ee=arm.ee_batch(self.model, self.xi_h.waypoints),
        )
        per_feature, beta = self._detect(corr)
        self._log("detection", per_feature=per_feature, beta_hat=beta)

        if beta < self.params.epsilon_beta:
            query = None
            hyps = self._new_object_hypotheses() if self.scenario.new_object else []
            if hyps:
                winner, report = diagnose_unknown_object(
                    self.current, corr, self.xi_h, self.fs, hyps,
                    self.shape, self.model, self.params,
                )
                self._log(
                    "diagnosis",
                    object_id=report.applied_object,
                    delta=report.delta,
                    missing_feature=report.missing_feature,
                    per_feature=[
                        {
                            "feature_id": p.feature_id,
                            "beta_delta": p.beta_delta,
                            "u_star_norm_sq": p.u_star_norm_sq,
                            "verdict": p.verdict.value,
                            "note": p.note,
                        }
                        for p in report.per_feature
                    ],
                    aligned_feature_ids=[],
                    hypothesis_scores={winner.object_id: winner.max_beta_delta},
                )
                if not report.missing_feature:
                    best = max(
                        (p for p in report.per_feature), key=lambda p: p.beta_delta
                    )
                    idx = self.fs.index_of(best.feature_id)
                    clone_id = f"{best.feature_id}@{winner.object_id.split('<-')[0]}"
                    clone = clone_feature_for_new_object(
                        self.fs[idx], -winner.delta, new_id=clone_id
                    )
                    self.fs = self.fs.with_appended(clone)
                    self.theta = np.append(self.theta, self.theta[idx])
                    self._log(
                        "feature_cloned",
                        source_feature_id=best.feature_id,
                        feature_id=clone.id,
                        delta_applied=-winner.delta,
                        peak=clone.peak,
                    )
                else:
                    query = self._query_for(corr)
            else:
                fs_new, reports, query = diagnose_and_correct(
                    self.current, corr, self.xi_h, self.fs,
                    self.scenario.env_train, self.scenario.env_test,
                    self.model, self.shape, self.params,
                    policy=self.scenario.policy,
                )
                for report in reports:
                    self._log(
                        "diagnosis",
                        object_id=report.applied_object,
                        delta=report.delta,
                        missing_feature=report.missing_feature,
                        per_feature=[
                            {
                                "feature_id": p.feature_id,
                                "beta_delta": p.beta_delta,
                                "u_star_norm_sq": p.u_star_norm_sq,
                                "verdict": p.verdict.value,
                                "note": p.note,
                            }
                            for p in report.per_feature
                        ],
                        aligned_feature_ids=list(report.aligned_feature_ids),
                    )
                    for fid in report.aligned_feature_ids:
                        aligned = fs_new[fs_new.index_of(fid)]
                        self._log(
                            "alignment",
                            feature_id=fid,
                            delta_applied=-report.delta,
                            new_peak=aligned.peak,
                        )
                self.fs = fs_new

            if query is not None:
                self._log(
                    "missing_feature_query",
                    center=query.center,
                    half_extent=query.half_extent,
                    count=query.count,
                )
                samples = self.oracle.answer_feature_query(query, self.scenario.env_test)
                self.learned_count += 1
                learned, rmse = learn_missing_feature(
                    query, samples, feature_id=f"learned-{self.learned_count}"
                )
                self.fs = self.fs.with_appended(learned)
                self.theta = np.append(self.theta, 0.0)
                self._log(
                    "feature_learned",
                    feature_id=learned.id,
                    anchor=learned.anchor,
                    width=learned.width,
                    rmse=rmse,
                    sample_count=len(samples),
                )

            per_feature, beta = self._detect(corr)
            self._log("recheck", per_feature=per_feature, beta_hat=beta)

        phi_r = feature_sum(self.current, self.fs, self.model)
        phi_h = feature_sum(self.xi_h, self.fs, self.model)
        self.pending_update = (phi_h, phi_r, beta)

    def _query_for(self, corr: CorrectionEvent):
        from .diagnosis import MissingFeatureQuery

        center = arm.end_effector(self.model, self.xi_h.waypoints[corr.waypoint_index])
        return MissingFeatureQuery(center=center)

    def apply_update_and_replan(self) -> None:
        phi_h, phi_r, beta = self.pending_update
        self.pending_update = None
        theta_before = self.theta.copy()
        self.theta, weight = confidence_update(
            self.theta, phi_h, phi_r, beta, self.params
        )
        self.beta_hat = beta
        self.e_posterior = weight
        self._log(
            "update",
            beta_used=beta,
            weight=weight,
            phi_h=phi_h,
            phi_r=phi_r,
            theta_before=theta_before,
            theta_after=self.theta,
        )
        self.step_no += 1
        self.plan_current(reason="replan")

    def finish(self, status: str) -> None:
        self.status = status
        self._log("done", status=status, steps=self.step_no)

    def report(self) -> EpisodeReport:
        metrics = recompute_metrics(self.events)
        metrics["steps"] = self.step_no
        metrics["status"] = self.status
        return EpisodeReport(
            label=self.scenario.label,
            seed=self.scenario.seed,
            policy=self.scenario.policy,
            status=self.status,
            steps=self.step_no,
            events=list(self.events),
            final_theta=[float(v) for v in self.theta],
            final_beta=float(self.beta_hat),
            final_e_posterior=float(self.e_posterior),
            final_features=[
                {
                    "id": f.id,
                    "anchor": [float(v) for v in f.anchor],
                    "delta_acc": [float(v) for v in f.delta_acc],
                    "width": float(f.width),
                    "peak": [float(v) for v in f.peak],
                }
                for f in self.fs
            ],
            metrics=metrics,
        )


def run_episode(
    scenario: Scenario,
    feature_set: FeatureSet | None = None,
    belief: Belief | None = None,
) -> EpisodeReport:
    """Run one full episode: loop until the human stops correcting or the budget ends."""
    engine = EpisodeEngine(scenario, feature_set=feature_set, belief=belief)
    engine.plan_current(reason="initial")
    while True:
        if engine.step_no >= scenario.budget:
            engine.finish("budget_exhausted")
            break
        corr = engine.consult_oracle()
        if corr is None:
            engine.finish("converged")
            break
        engine.process_correction(corr)
        engine.apply_update_and_replan()
    return engine.report()
