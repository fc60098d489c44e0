"""Independent oracles the tests check the library against.

Everything here is deliberately written without reusing the library's solver
paths: finite differences, naive python summation loops, exhaustive grid/ray
search with bisection, and fresh linear solves.
"""

import math

import numpy as np

from featalign import arm as arm_mod
from featalign.trajectory import CorrectionEvent, deform


def fd_jacobian(model, q, step=1e-6):
    """Forward-difference end-effector Jacobian."""
    base = arm_mod.end_effector(model, q)
    cols = []
    for j in range(len(q)):
        qp = np.array(q, dtype=float)
        qp[j] += step
        cols.append((arm_mod.end_effector(model, qp) - base) / step)
    return np.stack(cols, axis=1)


def naive_feature_sum(traj, fs, model):
    """Per-waypoint python loop with math.exp; no vectorized paths."""
    out = []
    for f in fs:
        total = 0.0
        for q in traj.waypoints:
            pts = arm_mod.forward_kinematics(model, q)
            ee = pts[-1]
            d2 = (ee[0] - f.peak[0]) ** 2 + (ee[1] - f.peak[1]) ** 2
            total += math.exp(-d2 / (2.0 * f.width**2))
        out.append(total)
    return np.array(out)


def straight_line_waypoints(start, goal, steps):
    """Closed-form joint interpolation, written independently of the planner."""
    out = np.zeros((steps + 1, len(start)))
    for t in range(steps + 1):
        a = t / steps
        for j in range(len(start)):
            out[t, j] = (1 - a) * start[j] + a * goal[j]
    return out


def fd_trajectory_gradient(cost_of_waypoints, waypoints, step=1e-6):
    """Central-difference gradient of a scalar cost over interior waypoints."""
    grad = np.zeros((waypoints.shape[0] - 2, waypoints.shape[1]))
    for t in range(1, waypoints.shape[0] - 1):
        for j in range(waypoints.shape[1]):
            up = waypoints.copy()
            up[t, j] += step
            dn = waypoints.copy()
            dn[t, j] -= step
            grad[t - 1, j] = (cost_of_waypoints(up) - cost_of_waypoints(dn)) / (2 * step)
    return grad


def fresh_deformation_displacement(steps, mu, waypoint_index, torque):
    """Solve the deformation displacement from scratch: rebuild K row by row,
    form A with the same unit-compliance scaling, and np.linalg.solve it."""
    n = steps - 1
    k = np.zeros((n, n))
    for i in range(n):
        k[i, i] = -2.0
        if i > 0:
            k[i, i - 1] = 1.0
        if i < n - 1:
            k[i, i + 1] = 1.0
    a_raw = k.T @ k
    scale = float(np.max(np.diag(np.linalg.inv(a_raw))))
    a = a_raw * scale
    unit = np.zeros(n)
    unit[waypoint_index - 1] = 1.0
    col = np.linalg.solve(a, unit)
    return mu * np.outer(col, torque)


def _batch_constraint(base, feature, model, shape, waypoint_index, phi_target, torques):
    """g(u) for a batch of torques at one waypoint: feature-sum mismatch."""
    prof = shape.profile(waypoint_index)  # (T-1,)
    interior = base.waypoints[1:-1]
    cfg = interior[None, :, :] + prof[None, :, None] * torques[:, None, :]
    pts = arm_mod.ee_batch(model, cfg.reshape(-1, base.joint_dim))
    vals = feature.eval_points(pts).reshape(torques.shape[0], -1).sum(axis=1)
    ends = arm_mod.ee_batch(model, base.waypoints[[0, -1]])
    end_contrib = float(feature.eval_points(ends).sum())
    return end_contrib + vals - phi_target


def brute_min_correction(
    base,
    phi_target,
    feature,
    shape,
    model,
    tol,
    grid_n=41,
    span=2.0,
    bisect_iters=60,
):
    """Exhaustive minimum-norm single-waypoint torque matching a feature sum.

    Derivative-free: sweeps every interior waypoint and every direction of the
    grid_n x grid_n torque lattice over [-span, span]^2; along each ray the
    magnitude is pinned down by bisection on sign changes of the constraint.
    Returns (norm_sq, torque, waypoint_index) or None if nothing feasible.
    """
    joint_dim = base.joint_dim
    assert joint_dim == 2, "grid oracle is built for 2-joint instances"
    axis = np.linspace(-span, span, grid_n)
    lattice = np.array([[x, y] for x in axis for y in axis if (x, y) != (0.0, 0.0)])
    angles = np.unique(np.round(np.arctan2(lattice[:, 1], lattice[:, 0]), 6))
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)  # (D, 2)
    mags = np.linspace(0.0, span * math.sqrt(2.0), grid_n)

    # feasibility is the band |g| <= tol (the solver's own contract), so the
    # oracle finds, along each ray, the smallest magnitude entering the band
    best = None
    for t in range(1, base.steps):
        g0 = _batch_constraint(
            base, feature, model, shape, t, phi_target, np.zeros((1, joint_dim))
        )[0]
        if abs(g0) <= tol:
            return 0.0, np.zeros(joint_dim), t
        torques = (mags[None, :, None] * dirs[:, None, :]).reshape(-1, joint_dim)
        g = _batch_constraint(base, feature, model, shape, t, phi_target, torques)
        g = g.reshape(len(dirs), len(mags))

        in_band = np.abs(g) <= tol  # (D, M)
        crossing = g[:, :-1] * g[:, 1:] <= 0.0  # sign change between grid points
        lo_list, hi_list, ray_list = [], [], []
        for di in range(len(dirs)):
            if in_band[di].any():
                i = int(np.argmax(in_band[di]))
                lo_m, hi_m = mags[i - 1], mags[i]  # i >= 1 because |g0| > tol
            elif crossing[di].any():
                i = int(np.argmax(crossing[di]))
                lo_m, hi_m, g_lo = mags[i], mags[i + 1], g[di, i]
                for _ in range(bisect_iters):  # locate a point inside the band
                    mid = 0.5 * (lo_m + hi_m)
                    g_mid = _batch_constraint(
                        base, feature, model, shape, t, phi_target,
                        (mid * dirs[di])[None, :],
                    )[0]
                    if abs(g_mid) <= tol:
                        hi_m = mid
                        break
                    if g_lo * g_mid <= 0.0:
                        hi_m = mid
                    else:
                        lo_m, g_lo = mid, g_mid
                else:
                    continue
            else:
                continue
            lo_list.append(lo_m)
            hi_list.append(hi_m)
            ray_list.append(dirs[di])
        if not lo_list:
            continue
        lo = np.array(lo_list)
        hi = np.array(hi_list)  # hi is inside the band, lo outside
        rays = np.array(ray_list)
        for _ in range(bisect_iters):  # vectorized band-boundary bisection
            mid = 0.5 * (lo + hi)
            g_mid = _batch_constraint(
                base, feature, model, shape, t, phi_target, mid[:, None] * rays
            )
            inside = np.abs(g_mid) <= tol
            hi = np.where(inside, mid, hi)
            lo = np.where(inside, lo, mid)
        i_best = int(np.argmin(hi))
        if best is None or hi[i_best] ** 2 < best[0]:
            best = (float(hi[i_best] ** 2), hi[i_best] * rays[i_best], t)
    return best


def make_small_instance(seed):
    """Random T=6, J=2 instance: arm, trajectory, feature, and observed push."""
    rng = np.random.default_rng(seed)
    model = arm_mod.ArmModel(link_lengths=(1.0, 1.0))
    start = rng.uniform(-1.2, 1.2, 2)
    goal = rng.uniform(-1.2, 1.2, 2)
    wp = straight_line_waypoints(start, goal, 6)
    wp[1:-1] += rng.normal(scale=0.1, size=wp[1:-1].shape)
    from featalign.trajectory import DeformationShape, Trajectory

    base = Trajectory(wp)
    shape = DeformationShape(steps=6, mu=0.15)
    mid_ee = arm_mod.end_effector(model, wp[3])
    from featalign.features import FeatureSet, TrainedFeature

    anchor = mid_ee + rng.uniform(-0.4, 0.4, 2)
    fs = FeatureSet((TrainedFeature("probe", anchor, float(rng.uniform(0.3, 0.6))),))
    angle = rng.uniform(0, 2 * math.pi)
    magnitude = rng.uniform(0.5, 1.5)
    torque = magnitude * np.array([math.cos(angle), math.sin(angle)])
    corr = CorrectionEvent(waypoint_index=int(rng.integers(1, 6)), torque=torque)
    deformed = deform(base, corr, shape)
    return model, base, deformed, corr, fs, shape
