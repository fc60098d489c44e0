import dataclasses

import numpy as np
import pytest

from featalign import (
    FeatureSet,
    NonFiniteValue,
    PlannerParams,
    TrainedFeature,
    Trajectory,
    cost_gradient,
    plan,
    trajectory_cost,
)
from featalign.arm import ee_batch, inverse_kinematics

from oracles import fd_trajectory_gradient, straight_line_waypoints


@pytest.fixture(scope="module")
def setup(arm3):
    q_start = inverse_kinematics(arm3, np.array([0.1, 0.3, 0.2]), np.array([1.4, -0.8]), tol=1e-10)
    q_goal = inverse_kinematics(arm3, q_start, np.array([1.2, 1.4]), tol=1e-10)
    fs = FeatureSet(
        (
            TrainedFeature("bump-a", np.array([1.45, 0.35]), width=0.3),
            TrainedFeature("bump-b", np.array([-0.8, 0.8]), width=0.3),
        )
    )
    return q_start, q_goal, fs


class TestPlan:
    def test_zero_weights_give_straight_line(self, arm3, setup):
        q_start, q_goal, fs = setup
        traj = plan(arm3, fs, np.zeros(2), q_start, q_goal, PlannerParams(steps=20))
        expected = straight_line_waypoints(q_start, q_goal, 20)
        assert np.max(np.abs(traj.waypoints - expected)) <= 1e-6

    def test_avoids_feature_on_path(self, arm3, setup):
        q_start, q_goal, fs = setup
        params = PlannerParams(steps=20)
        straight = Trajectory(straight_line_waypoints(q_start, q_goal, 20))
        anchor = fs[0].anchor
        base_clear = np.min(np.linalg.norm(ee_batch(arm3, straight.waypoints) - anchor, axis=1))
        planned = plan(arm3, fs, np.array([1.0, 0.0]), q_start, q_goal, params)
        plan_clear = np.min(np.linalg.norm(ee_batch(arm3, planned.waypoints) - anchor, axis=1))
        assert plan_clear > base_clear

    def test_objective_scaling_preserves_argmin(self, arm3, setup):
        q_start, q_goal, fs = setup
        tight = PlannerParams(steps=20, tol=1e-10, max_iters=20000)
        theta = np.array([0.8, 0.3])
        a = plan(arm3, fs, theta, q_start, q_goal, tight)
        b = plan(
            arm3, fs, 2.0 * theta, q_start, q_goal,
            dataclasses.replace(tight, smoothness_weight=2.0),
        )
        assert np.max(np.abs(a.waypoints - b.waypoints)) <= 1e-6

    def test_endpoints_exact(self, arm3, setup):
        q_start, q_goal, fs = setup
        traj = plan(arm3, fs, np.array([1.5, 0.5]), q_start, q_goal, PlannerParams(steps=20))
        assert np.array_equal(traj.waypoints[0], q_start)
        assert np.array_equal(traj.waypoints[-1], q_goal)

    def test_descent_from_straight_line(self, arm3, setup):
        q_start, q_goal, fs = setup
        theta = np.array([1.2, 0.1])
        params = PlannerParams(steps=20)
        straight = Trajectory(straight_line_waypoints(q_start, q_goal, 20))
        planned = plan(arm3, fs, theta, q_start, q_goal, params)
        assert trajectory_cost(planned, fs, theta, arm3, 1.0) <= trajectory_cost(
            straight, fs, theta, arm3, 1.0
        )

    def test_bit_reproducible(self, arm3, setup):
        q_start, q_goal, fs = setup
        params = PlannerParams(steps=20, restarts=2, seed=9)
        a = plan(arm3, fs, np.array([1.0, 0.4]), q_start, q_goal, params)
        b = plan(arm3, fs, np.array([1.0, 0.4]), q_start, q_goal, params)
        assert np.array_equal(a.waypoints, b.waypoints)

    def test_nonfinite_theta_rejected(self, arm3, setup):
        q_start, q_goal, fs = setup
        with pytest.raises(NonFiniteValue):
            plan(arm3, fs, np.array([np.nan, 1.0]), q_start, q_goal, PlannerParams())


class TestCostGradient:
    def test_matches_finite_differences(self, arm3, setup):
        q_start, q_goal, fs = setup
        rng = np.random.default_rng(17)
        theta = np.array([0.9, 0.7])
        w_s = 1.0
        for _ in range(100):
            wp = straight_line_waypoints(q_start, q_goal, 8)
            wp[1:-1] += rng.normal(scale=0.2, size=wp[1:-1].shape)
            traj = Trajectory(wp)
            analytic = cost_gradient(traj, fs, theta, arm3, w_s)

            def cost_of(w):
                return trajectory_cost(Trajectory(w), fs, theta, arm3, w_s)

            numeric = fd_trajectory_gradient(cost_of, wp)
            denom = max(1.0, np.linalg.norm(numeric))
            assert np.linalg.norm(analytic - numeric) / denom < 1e-4

    def test_zero_theta_leaves_smoothness_gradient(self, arm3, setup):
        q_start, q_goal, fs = setup
        rng = np.random.default_rng(3)
        wp = straight_line_waypoints(q_start, q_goal, 10)
        wp[1:-1] += rng.normal(scale=0.1, size=wp[1:-1].shape)
        traj = Trajectory(wp)
        grad = cost_gradient(traj, fs, np.zeros(2), arm3, 2.5)
        smooth = 2 * 2.5 * (2 * wp[1:-1] - wp[:-2] - wp[2:])
        assert np.allclose(grad, smooth)

    def test_zero_at_straight_line_with_zero_theta(self, arm3, setup):
        q_start, q_goal, fs = setup
        traj = Trajectory(straight_line_waypoints(q_start, q_goal, 12))
        grad = cost_gradient(traj, fs, np.zeros(2), arm3, 1.0)
        assert np.max(np.abs(grad)) <= 1e-8
