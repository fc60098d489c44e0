"""Scenario documents: strict schema, loading, and serialization.

A scenario bundles everything one episode needs: the arm, both environments,
the robot's trained features and initial weights, the simulated human, and the
solver parameters. Unknown fields are hard errors so typos cannot silently
change an experiment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arm import ArmModel
from .errors import ScenarioError
from .features import Environment, FeatureSet, ObjectPose, TrainedFeature
from .learning import LearnerParams
from .oracle import TrueFeatureSpec
from .planner import PlannerParams

SCENARIO_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class OracleSpec:
    """Serializable description of the simulated human."""

    feature_specs: tuple[TrueFeatureSpec, ...]
    theta_true: np.ndarray
    lam: float = 0.5
    trigger: float = 0.2
    temperature: float | None = None
    max_push: float = 1.5
    seed: int = 0

    def __post_init__(self):
        th = np.array(self.theta_true, dtype=float)
        th.setflags(write=False)
        object.__setattr__(self, "theta_true", th)
        object.__setattr__(self, "feature_specs", tuple(self.feature_specs))


@dataclass(frozen=True)
class Scenario:
    label: str
    model: ArmModel
    env_train: Environment
    env_test: Environment
    feature_set: FeatureSet
    theta_init: np.ndarray
    start: np.ndarray
    goal: np.ndarray
    oracle: OracleSpec
    learner: LearnerParams
    planner: PlannerParams
    mu: float = 0.15
    seed: int = 0
    budget: int = 10
    policy: str = "permissive"
    new_object: bool = False

    def __post_init__(self):
        for name in ("theta_init", "start", "goal"):
            v = np.array(getattr(self, name), dtype=float)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if len(self.feature_set) < 1:
            raise ScenarioError("need at least one trained feature", "features")
        if len(self.theta_init) != len(self.feature_set):
            raise ScenarioError("theta_init length must equal the feature count", "theta_init")
        if self.budget < 1:
            raise ScenarioError("budget must be >= 1", "budget")
        if self.policy not in ("permissive", "conservative"):
            raise ScenarioError(f"unknown policy {self.policy!r}", "policy")
        if not self.new_object and set(self.env_train.ids()) != set(self.env_test.ids()):
            raise ScenarioError(
                "training and test environments must share object ids "
                "unless new_object is set",
                "test_env",
            )
        self.model.check_config(self.start)
        self.model.check_config(self.goal)


def _require_keys(obj: dict, allowed: dict, required: tuple, loc: str) -> None:
    if not isinstance(obj, dict):
        raise ScenarioError(f"expected an object, got {type(obj).__name__}", loc)
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ScenarioError(f"unknown field(s): {', '.join(unknown)}", loc)
    missing = sorted(set(required) - set(obj))
    if missing:
        raise ScenarioError(f"missing required field(s): {', '.join(missing)}", loc)
    for key, value in obj.items():
        kinds = allowed[key]
        if kinds is not None and not isinstance(value, kinds):
            raise ScenarioError(
                f"wrong type for {key}: expected {kinds}, got {type(value).__name__}",
                loc,
            )


def _parse_env(obj: dict, loc: str) -> Environment:
    _require_keys(obj, {"label": str, "objects": list}, ("objects",), loc)
    poses = []
    for i, o in enumerate(obj["objects"]):
        oloc = f"{loc}.objects[{i}]"
        _require_keys(o, {"id": str, "position": list}, ("id", "position"), oloc)
        poses.append(ObjectPose(id=o["id"], position=np.array(o["position"], dtype=float)))
    return Environment(objects=tuple(poses), label=obj.get("label", ""))


_NUM = (int, float)


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a Scenario from a parsed JSON document, validating strictly."""
    top = {
        "schema_version": int,
        "label": str,
        "seed": int,
        "budget": int,
        "policy": str,
        "new_object": bool,
        "arm": dict,
        "training_env": dict,
        "test_env": dict,
        "features": list,
        "theta_init": list,
        "start": list,
        "goal": list,
        "true_human": dict,
        "learner": dict,
        "planner": dict,
        "deformation": dict,
    }
    required = (
        "schema_version", "label", "arm", "training_env", "test_env",
        "features", "theta_init", "start", "goal", "true_human",
    )
    _require_keys(doc, top, required, "scenario")
    if doc["schema_version"] != SCENARIO_SCHEMA_VERSION:
        raise ScenarioError(
            f"unsupported schema_version {doc['schema_version']}", "schema_version"
        )

    a = doc["arm"]
    _require_keys(
        a,
        {"base_position": list, "link_lengths": list, "joint_limits": list},
        ("link_lengths",),
        "arm",
    )
    model = ArmModel(
        link_lengths=tuple(float(l) for l in a["link_lengths"]),
        base_position=np.array(a.get("base_position", [0.0, 0.0]), dtype=float),
        joint_limits=(
            np.array(a["joint_limits"], dtype=float) if "joint_limits" in a else None
        ),
    )

    env_train = _parse_env(doc["training_env"], "training_env")
    env_test = _parse_env(doc["test_env"], "test_env")

    feats = []
    for i, f in enumerate(doc["features"]):
        floc = f"features[{i}]"
        _require_keys(
            f,
            {"id": str, "anchor": list, "width": _NUM, "delta_acc": list},
            ("id", "anchor", "width"),
            floc,
        )
        feats.append(
            TrainedFeature(
                id=f["id"],
                anchor=np.array(f["anchor"], dtype=float),
                width=float(f["width"]),
                delta_acc=np.array(f.get("delta_acc", [0.0, 0.0]), dtype=float),
                training_env=env_train,
            )
        )
    feature_set = FeatureSet(tuple(feats))

    h = doc["true_human"]
    _require_keys(
        h,
        {
            "features": list, "theta": list, "lam": _NUM, "trigger": _NUM,
            "temperature": _NUM, "max_push": _NUM, "seed": int,
        },
        ("features", "theta"),
        "true_human",
    )
    specs = []
    for i, f in enumerate(h["features"]):
        floc = f"true_human.features[{i}]"
        _require_keys(
            f,
            {"id": str, "width": _NUM, "object_id": str, "anchor": list},
            ("id",),
            floc,
        )
        if ("object_id" in f) == ("anchor" in f):
            raise ScenarioError("give exactly one of object_id or anchor", floc)
        specs.append(
            TrueFeatureSpec(
                id=f["id"],
                width=float(f.get("width", 0.5)),
                object_id=f.get("object_id"),
                anchor=np.array(f["anchor"], dtype=float) if "anchor" in f else None,
            )
        )
    oracle = OracleSpec(
        feature_specs=tuple(specs),
        theta_true=np.array(h["theta"], dtype=float),
        lam=float(h.get("lam", 0.5)),
        trigger=float(h.get("trigger", 0.2)),
        temperature=(None if h.get("temperature") is None else float(h["temperature"])),
        max_push=float(h.get("max_push", 1.5)),
        seed=int(h.get("seed", 0)),
    )

    le = doc.get("learner", {})
    _require_keys(
        le,
        {
            "alpha": _NUM, "lam": _NUM, "epsilon_beta": _NUM, "beta_max": _NUM,
            "slope": _NUM, "p_e_override": _NUM, "phi_tol": _NUM,
        },
        (),
        "learner",
    )
    learner = LearnerParams(
        k=model.joint_dim,
        alpha=float(le.get("alpha", 0.1)),
        lam=float(le.get("lam", 0.5)),
        epsilon_beta=float(le.get("epsilon_beta", 1.0)),
        beta_max=float(le.get("beta_max", 100.0)),
        slope=float(le.get("slope", 10.0)),
        p_e_override=(
            None if le.get("p_e_override") is None else float(le["p_e_override"])
        ),
        phi_tol=float(le.get("phi_tol", 1e-3)),
    )

    p = doc.get("planner", {})
    _require_keys(
        p,
        {
            "steps": int, "smoothness_weight": _NUM, "step_size": _NUM,
            "max_iters": int, "tol": _NUM, "restarts": int, "jitter": _NUM,
        },
        (),
        "planner",
    )
    planner = PlannerParams(
        steps=int(p.get("steps", 20)),
        smoothness_weight=float(p.get("smoothness_weight", 1.0)),
        step_size=float(p.get("step_size", 0.1)),
        max_iters=int(p.get("max_iters", 2000)),
        tol=float(p.get("tol", 1e-7)),
        restarts=int(p.get("restarts", 0)),
        jitter=float(p.get("jitter", 0.15)),
        seed=int(doc.get("seed", 0)),
    )

    d = doc.get("deformation", {})
    _require_keys(d, {"mu": _NUM}, (), "deformation")

    return Scenario(
        label=doc["label"],
        model=model,
        env_train=env_train,
        env_test=env_test,
        feature_set=feature_set,
        theta_init=np.array(doc["theta_init"], dtype=float),
        start=np.array(doc["start"], dtype=float),
        goal=np.array(doc["goal"], dtype=float),
        oracle=oracle,
        learner=learner,
        planner=planner,
        mu=float(d.get("mu", 0.15)),
        seed=int(doc.get("seed", 0)),
        budget=int(doc.get("budget", 10)),
        policy=doc.get("policy", "permissive"),
        new_object=bool(doc.get("new_object", False)),
    )


def scenario_to_dict(s: Scenario) -> dict:
    """Serialize back to the schema; load(emit(x)) is structurally x."""
    def env_dict(env):
        return {
            "label": env.label,
            "objects": [
                {"id": o.id, "position": [float(v) for v in o.position]}
                for o in env.objects
            ],
        }

    doc = {
        "schema_version": SCENARIO_SCHEMA_VERSION,
        "label": s.label,
        "seed": s.seed,
        "budget": s.budget,
        "policy": s.policy,
        "new_object": s.new_object,
        "arm": {
            "base_position": [float(v) for v in s.model.base_position],
            "link_lengths": [float(l) for l in s.model.link_lengths],
            "joint_limits": [[float(a), float(b)] for a, b in s.model.joint_limits],
        },
        "training_env": env_dict(s.env_train),
        "test_env": env_dict(s.env_test),
        "features": [
            {
                "id": f.id,
                "anchor": [float(v) for v in f.anchor],
                "width": float(f.width),
                "delta_acc": [float(v) for v in f.delta_acc],
            }
            for f in s.feature_set
        ],
        "theta_init": [float(v) for v in s.theta_init],
        "start": [float(v) for v in s.start],
        "goal": [float(v) for v in s.goal],
        "true_human": {
            "features": [
                (
                    {"id": f.id, "width": float(f.width), "object_id": f.object_id}
                    if f.object_id is not None
                    else {
                        "id": f.id,
                        "width": float(f.width),
                        "anchor": [float(v) for v in f.anchor],
                    }
                )
                for f in s.oracle.feature_specs
            ],
            "theta": [float(v) for v in s.oracle.theta_true],
            "lam": float(s.oracle.lam),
            "trigger": float(s.oracle.trigger),
            "max_push": float(s.oracle.max_push),
            "seed": s.oracle.seed,
            **(
                {}
                if s.oracle.temperature is None
                else {"temperature": float(s.oracle.temperature)}
            ),
        },
        "learner": {
            "alpha": s.learner.alpha,
            "lam": s.learner.lam,
            "epsilon_beta": s.learner.epsilon_beta,
            "beta_max": s.learner.beta_max,
            "slope": s.learner.slope,
            "phi_tol": s.learner.phi_tol,
            **(
                {}
                if s.learner.p_e_override is None
                else {"p_e_override": s.learner.p_e_override}
            ),
        },
        "planner": {
            "steps": s.planner.steps,
            "smoothness_weight": s.planner.smoothness_weight,
            "step_size": s.planner.step_size,
            "max_iters": s.planner.max_iters,
            "tol": s.planner.tol,
            "restarts": s.planner.restarts,
            "jitter": s.planner.jitter,
        },
        "deformation": {"mu": s.mu},
    }
    return doc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON (line {exc.lineno}, col {exc.colno}): {exc.msg}")
    return scenario_from_dict(doc)


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2) + "\n")
