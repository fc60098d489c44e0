import numpy as np
import pytest

from featalign import (
    DeformationShape,
    Environment,
    MissingFeatureQuery,
    ObjectPose,
    Trajectory,
    deform,
    learn_missing_feature,
)
from featalign.arm import ee_batch, inverse_kinematics
from featalign.oracle import TrueFeatureSpec, TrueHuman

from oracles import straight_line_waypoints


def make_human(theta=16.0, lam=0.5, trigger=0.5, temperature=None, seed=3, max_push=1.5):
    specs = [
        TrueFeatureSpec("laptop-zone", 0.25, object_id="laptop"),
        TrueFeatureSpec("vase-zone", 0.25, object_id="vase"),
    ]
    return TrueHuman(
        specs, np.array([theta, theta]), lam=lam, correction_trigger=trigger,
        temperature=temperature, seed=seed, max_push=max_push,
    )


@pytest.fixture(scope="module")
def world(arm3):
    env = Environment(
        (ObjectPose("laptop", np.array([1.55, 0.35])), ObjectPose("vase", np.array([-0.5, 1.2]))),
        "live",
    )
    q_a = inverse_kinematics(arm3, np.array([0.1, 0.3, 0.2]), np.array([1.4, -0.8]), tol=1e-10)
    q_b = inverse_kinematics(arm3, q_a, np.array([1.2, 1.4]), tol=1e-10)
    hot = Trajectory(straight_line_waypoints(q_a, q_b, 20))  # passes the laptop zone
    q_c = inverse_kinematics(arm3, np.array([-1.5, 0.8, 0.7]), np.array([-0.3, -1.8]), tol=1e-10)
    q_d = inverse_kinematics(arm3, q_c, np.array([1.0, -2.2]), tol=1e-10)
    cold = Trajectory(straight_line_waypoints(q_c, q_d, 20))  # far from everything
    shape = DeformationShape(steps=20)
    return env, hot, cold, shape


class TestMaybeCorrect:
    def test_acceptable_trajectory_gets_no_correction(self, arm3, world):
        env, _, cold, shape = world
        human = make_human()
        assert human.maybe_correct(cold, env, arm3, shape) is None

    def test_correction_strictly_decreases_true_cost(self, arm3, world):
        env, hot, _, shape = world
        human = make_human()
        corr = human.maybe_correct(hot, env, arm3, shape)
        assert corr is not None
        before = human.true_cost(hot, env, arm3)
        after = human.true_cost(deform(hot, corr, shape), env, arm3) + human.lam * corr.norm_sq
        assert after < before

    def test_pushes_away_from_target_zone(self, arm3, world):
        env, hot, _, shape = world
        human = make_human()
        corr = human.maybe_correct(hot, env, arm3, shape)
        deformed = deform(hot, corr, shape)
        anchor = env.position("laptop")
        before = np.min(np.linalg.norm(ee_batch(arm3, hot.waypoints) - anchor, axis=1))
        after = np.min(np.linalg.norm(ee_batch(arm3, deformed.waypoints) - anchor, axis=1))
        assert after > before

    def test_effort_dominates_in_the_limit(self, arm3, world):
        env, hot, _, shape = world
        norms = []
        for lam in (0.5, 5.0, 50.0, 500.0):
            human = make_human(lam=lam, trigger=0.01)
            corr = human.maybe_correct(hot, env, arm3, shape)
            assert corr is not None
            norms.append(np.linalg.norm(corr.torque))
        assert all(a > b for a, b in zip(norms, norms[1:]))
        assert norms[-1] < 0.05

    def test_single_feature_targeted(self, arm3, world):
        env, hot, _, shape = world
        human = make_human()
        human.maybe_correct(hot, env, arm3, shape)
        assert human.last_target is not None
        assert human.last_target.id == "laptop-zone"

    def test_deterministic_under_seed(self, arm3, world):
        env, hot, _, shape = world
        a = make_human(seed=11).maybe_correct(hot, env, arm3, shape)
        b = make_human(seed=11).maybe_correct(hot, env, arm3, shape)
        assert a.waypoint_index == b.waypoint_index
        assert np.array_equal(a.torque, b.torque)

    def test_stochastic_mode_seeded(self, arm3, world):
        env, hot, _, shape = world
        a = make_human(temperature=2.0, seed=5).maybe_correct(hot, env, arm3, shape)
        b = make_human(temperature=2.0, seed=5).maybe_correct(hot, env, arm3, shape)
        c = make_human(temperature=2.0, seed=6).maybe_correct(hot, env, arm3, shape)
        assert np.array_equal(a.torque, b.torque)
        assert c is not None  # different seed still corrects, possibly differently


class TestAnswerFeatureQuery:
    def test_box_on_anchor_contains_peak_values(self, arm3):
        env = Environment((ObjectPose("laptop", np.array([1.0, 0.5])),), "live")
        human = TrueHuman(
            [TrueFeatureSpec("zone", 0.3, object_id="laptop")], np.array([8.0]), seed=2
        )
        q = MissingFeatureQuery(center=np.array([1.0, 0.5]), half_extent=0.75, count=25)
        samples = human.answer_feature_query(q, env)
        assert len(samples) == 25
        assert max(v for _, v in samples) > 0.9

    def test_far_box_samples_are_tail_values(self, arm3):
        env = Environment((ObjectPose("laptop", np.array([1.0, 0.5])),), "live")
        human = TrueHuman(
            [TrueFeatureSpec("zone", 0.25, object_id="laptop")], np.array([8.0]), seed=2
        )
        human.last_target = human.feature_specs[0]
        q = MissingFeatureQuery(center=np.array([1.0, 0.5]) + 10 * 0.25, half_extent=0.5, count=25)
        samples = human.answer_feature_query(q, env)
        assert all(v < 1e-3 for _, v in samples)

    def test_roundtrip_recovery_through_fit(self, arm3):
        env = Environment((ObjectPose("laptop", np.array([0.9, 0.7])),), "live")
        human = TrueHuman(
            [TrueFeatureSpec("zone", 0.3, object_id="laptop")], np.array([8.0]), seed=4
        )
        q = MissingFeatureQuery(center=np.array([1.0, 0.6]), half_extent=0.75, count=25)
        samples = human.answer_feature_query(q, env)
        feature, _ = learn_missing_feature(q, samples)
        assert np.linalg.norm(feature.anchor - [0.9, 0.7]) < 1e-2

    def test_deterministic_given_seed(self, arm3):
        env = Environment((ObjectPose("laptop", np.array([1.0, 0.5])),), "live")
        q = MissingFeatureQuery(center=np.array([1.0, 0.5]), count=25)
        mk = lambda: TrueHuman(
            [TrueFeatureSpec("zone", 0.3, object_id="laptop")], np.array([8.0]), seed=9
        )
        a = mk().answer_feature_query(q, env)
        b = mk().answer_feature_query(q, env)
        assert all(np.array_equal(pa, pb) and va == vb for (pa, va), (pb, vb) in zip(a, b))


class TestValidation:
    def test_theta_spec_length_mismatch(self):
        with pytest.raises(Exception):
            TrueHuman([TrueFeatureSpec("a", 0.3, anchor=np.zeros(2))], np.array([1.0, 2.0]))

    def test_spec_needs_exactly_one_binding(self):
        from featalign.errors import DimensionMismatch

        with pytest.raises(DimensionMismatch):
            TrueFeatureSpec("bad", 0.3)
        with pytest.raises(DimensionMismatch):
            TrueFeatureSpec("bad", 0.3, object_id="x", anchor=np.zeros(2))
