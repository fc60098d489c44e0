"""Desk-scale simulation of a robot that learns cost weights from physical
corrections and can detect, diagnose, and repair a misaligned feature
representation online."""

from .arm import (
    ArmModel,
    end_effector,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    shift_trajectory_end_effector,
)
from .diagnosis import (
    DeltaHypothesis,
    DiagnosisReport,
    FeatureDiagnosis,
    MissingFeatureQuery,
    Verdict,
    diagnose_and_correct,
    diagnose_unknown_object,
    estimate_beta_delta,
    learn_missing_feature,
    shifted_optimal_correction,
)
from .episode import EpisodeEngine, EpisodeReport, emit_report, load_report, run_episode
from .errors import (
    DegenerateFit,
    DimensionMismatch,
    FeatAlignError,
    NoConvergence,
    NonFiniteValue,
    ScenarioError,
    SessionError,
    Unreachable,
    UnknownObject,
)
from .features import (
    Environment,
    FeatureSet,
    ObjectPose,
    ProductFeature,
    TrainedFeature,
    align_feature,
    clone_feature_for_new_object,
    eval_feature,
    feature_sum,
    object_displacements,
    shifted_feature_sum,
)
from .learning import (
    Belief,
    LearnerParams,
    OptimalCorrection,
    confidence_update,
    estimate_beta,
    fit_offline,
    naive_update,
    optimal_correction,
    p_e_given_beta,
)
from .oracle import TrueFeatureSpec, TrueHuman
from .planner import PlannerParams, cost_gradient, plan, straight_line, trajectory_cost
from .scenario import (
    OracleSpec,
    Scenario,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from .trajectory import CorrectionEvent, DeformationShape, Trajectory, deform

__version__ = "0.1.0"
