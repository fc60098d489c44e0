"""Reward learning from corrections: offline weight fitting, the minimum-effort
correction problem, confidence estimation, and the weight updates.

Confidence logic: for each feature we ask for the cheapest single-waypoint
torque that reproduces the feature-sum change the human's correction caused.
If the human's torque is barely bigger than that optimum, the feature explains
the correction and confidence is high; a large gap means no feature explains it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import arm
from .errors import DimensionMismatch, NonFiniteValue
from .features import FeatureSet, feature_sum
from .trajectory import CorrectionEvent, DeformationShape, Trajectory, recover_correction


@dataclass(frozen=True)
class LearnerParams:
    """Knobs of the update loop. ``k`` is the action-space dimension (= joints)."""

    k: int
    alpha: float = 0.1  # learning rate
    lam: float = 0.5  # cost-vs-effort trade-off
    epsilon_beta: float = 1.0  # confidence threshold between "small" and "large"
    beta_max: float = 100.0  # clamp for the confidence estimate
    slope: float = 10.0  # logistic slope of P(E=1 | beta)
    p_e_override: float | None = None  # force P(E=1 | beta); None = use the logistic
    denom_guard: float = 1e-9  # treat smaller effort gaps as "maximally efficient"
    phi_tol: float = 1e-3  # feature-sum matching tolerance of the correction solver
    rho_schedule: tuple[float, ...] = (1e2, 1e3, 1e4)  # penalty continuation
    solver_max_evals: int = 120  # per penalty stage

    def __post_init__(self):
        if self.k <= 0 or self.alpha <= 0 or self.lam <= 0:
            raise DimensionMismatch("k, alpha, lam must be positive")
        if not 0 < self.epsilon_beta < self.beta_max:
            raise DimensionMismatch("need 0 < epsilon_beta < beta_max")


@dataclass(frozen=True)
class Belief:
    """The robot's running estimate: weights, last confidence, last E posterior."""

    theta: np.ndarray
    beta_hat: float = 0.0
    e_posterior: float = 0.5

    def __post_init__(self):
        th = np.array(self.theta, dtype=float)
        if not np.all(np.isfinite(th)):
            raise NonFiniteValue("theta must be finite")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)


@dataclass(frozen=True)
class OptimalCorrection:
    """Solution of the per-feature minimum-effort correction problem."""

    torque: np.ndarray
    waypoint_index: int
    norm_sq: float
    residual: float  # |Phi_i(deformed) - Phi_i target| at the returned torque
    feasible: bool


def _phi_partials(base: Trajectory, feature, model: arm.ArmModel):
    """Precompute what the solver needs to evaluate one feature of deformations."""
    pts = arm.ee_batch(model, base.waypoints)
    end_contrib = float(feature.eval_points(pts[[0, -1]]).sum())
    return base.waypoints[1:-1], end_contrib


def _make_constraint(base: Trajectory, feature, model, shape, waypoint_index, phi_target):
    """Return g(u), grad_g(u) for one candidate waypoint: feature-sum mismatch."""
    interior, end_contrib = _phi_partials(base, feature, model)
    prof = shape.profile(waypoint_index)  # (T-1,), includes mu

    def g_and_grad(u: np.ndarray):
        cfg = interior + np.outer(prof, u)
        pts = arm.ee_batch(model, cfg)
        vals = feature.eval_points(pts)
        g = end_contrib + float(vals.sum()) - phi_target
        dphi_dp = feature.gradient_points(pts)  # (T-1, 2)
        jacs = arm.jacobian_batch(model, cfg)  # (T-1, 2, J)
        grad = np.einsum("t,tk,tkj->j", prof, dphi_dp, jacs)
        return g, grad

    return g_and_grad


def _shrink_to_band(u: np.ndarray, g_and_grad, tol: float, iters: int = 60) -> np.ndarray:
    """Scale a feasible torque down its own ray to the |g| <= tol boundary.

    Assumes |g(u)| <= tol and |g(0)| > tol; keeps the returned point feasible.
    """
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        g_mid, _ = g_and_grad(mid * u)
        if abs(g_mid) <= tol:
            hi = mid
        else:
            lo = mid
    return hi * u


def _solve_min_correction(
    base: Trajectory,
    phi_target: float,
    feature,
    shape: DeformationShape,
    model: arm.ArmModel,
    params: LearnerParams,
    observed: CorrectionEvent,
    observed_exact: bool,
) -> OptimalCorrection:
    """Minimum-norm single-waypoint torque matching one feature's sum.

    Outer search over interior waypoints; inner penalty continuation
    min ||u||^2 + rho * g(u)^2 solved by L-BFGS with analytic gradients, then a
    radial shrink onto the phi_tol feasibility boundary. The observed
    correction is always tried as a candidate, which keeps the solution's norm
    at or below the human's whenever the observed torque is exactly feasible
    (the unshifted detection case).
    """
    joint_dim = base.joint_dim
    zero = np.zeros(joint_dim)
    candidates: list[tuple[float, np.ndarray, int, float]] = []
    best_infeasible: tuple[float, np.ndarray, int, float] | None = None

    for t in range(1, base.steps):
        g_and_grad = _make_constraint(base, feature, model, shape, t, phi_target)
        g0, grad0 = g_and_grad(zero)
        if abs(g0) <= params.phi_tol:
            # zero torque already matches this feature's sum: global optimum
            return OptimalCorrection(zero, t, 0.0, abs(g0), True)

        seeds = [observed.torque]
        gnorm_sq = float(grad0 @ grad0)
        if gnorm_sq > 1e-16:
            newton = -g0 * grad0 / gnorm_sq  # linearized minimum-norm solution
            cap = 2.0 * math.sqrt(observed.norm_sq) + 1.0
            nn = float(np.linalg.norm(newton))
            if nn > cap:
                newton = newton * (cap / nn)
            seeds.append(newton)

        for seed in seeds:
            u = np.asarray(seed, dtype=float)
            rho = params.rho_schedule[0]
            stage = 0
            while True:

                def objective(v, rho=rho, gg=g_and_grad):
                    g, grad = gg(v)
                    val = float(v @ v) + rho * g * g
                    return val, 2.0 * v + 2.0 * rho * g * grad

                res = optimize.minimize(
                    objective,
                    u,
                    jac=True,
                    method="L-BFGS-B",
                    options={"maxiter": params.solver_max_evals, "ftol": 1e-14, "gtol": 1e-12},
                )
                u = res.x
                stage += 1
                if stage < len(params.rho_schedule):
                    rho = params.rho_schedule[stage]
                    continue
                # keep tightening until the constraint is met at this scale
                g_now, _ = g_and_grad(u)
                if abs(g_now) <= params.phi_tol or rho >= 1e9:
                    break
                rho *= 10.0
            g_final, _ = g_and_grad(u)
            if abs(g_final) <= params.phi_tol:
                u = _shrink_to_band(u, g_and_grad, params.phi_tol)
                g_final, _ = g_and_grad(u)
                candidates.append((float(u @ u), u.copy(), t, abs(g_final)))
            else:
                entry = (float(u @ u), u.copy(), t, abs(g_final))
                if best_infeasible is None or entry[3] < best_infeasible[3]:
                    best_infeasible = entry

    gg_obs = _make_constraint(
        base, feature, model, shape, observed.waypoint_index, phi_target
    )
    g_obs, _ = gg_obs(observed.torque)
    if observed_exact or abs(g_obs) <= params.phi_tol:
        # the human's own torque reproduces every feature sum of the deformed
        # trajectory by construction (exactly so in the unshifted frame)
        u_obs = _shrink_to_band(
            np.array(observed.torque), gg_obs, max(params.phi_tol, abs(g_obs))
        )
        g_shrunk, _ = gg_obs(u_obs)
        candidates.append(
            (float(u_obs @ u_obs), u_obs, observed.waypoint_index, abs(g_shrunk))
        )

    if candidates:
        norm_sq, u, t, resid = min(candidates, key=lambda c: c[0])
        return OptimalCorrection(u, t, norm_sq, resid, True)
    norm_sq, u, t, resid = best_infeasible
    return OptimalCorrection(u, t, norm_sq, resid, False)


def optimal_correction(
    xi_r: Trajectory,
    xi_h: Trajectory,
    feature_index: int,
    shape: DeformationShape,
    model: arm.ArmModel,
    fs: FeatureSet,
    params: LearnerParams,
) -> OptimalCorrection:
    """Cheapest single-waypoint torque whose deformation matches feature i's sum on xi_h.

    xi_h must have been produced by ``deform`` from xi_r; the observed torque is
    recovered from the waypoint difference and is always a feasible fallback.
    """
    observed = recover_correction(xi_r, xi_h, shape)
    feature = fs[feature_index]
    pts = arm.ee_batch(model, xi_h.waypoints)
    phi_target = float(feature.eval_points(pts).sum())
    return _solve_min_correction(
        xi_r, phi_target, feature, shape, model, params, observed, observed_exact=True
    )


def beta_from_norms(u_h_norm_sq: float, u_star_norm_sq: float, params: LearnerParams) -> float:
    """Confidence k / (2 lam (||u_H||^2 - ||u*||^2)), clamped to [0, beta_max].

    A non-positive (or tiny) effort gap means the human's correction was
    maximally efficient for this feature, which the formula's singularity
    encodes as unbounded confidence; we return beta_max.
    """
    gap = u_h_norm_sq - u_star_norm_sq
    if gap <= params.denom_guard:
        return params.beta_max
    return float(np.clip(params.k / (2.0 * params.lam * gap), 0.0, params.beta_max))


def estimate_beta(u_h: np.ndarray, u_star: np.ndarray, params: LearnerParams) -> float:
    """Confidence in the human correction given the per-feature optimal correction."""
    u_h = np.asarray(u_h, dtype=float)
    u_star = np.asarray(u_star, dtype=float)
    if not (np.all(np.isfinite(u_h)) and np.all(np.isfinite(u_star))):
        raise NonFiniteValue("torques must be finite")
    return beta_from_norms(float(u_h @ u_h), float(u_star @ u_star), params)


def naive_update(
    theta: np.ndarray, phi_h: np.ndarray, phi_r: np.ndarray, alpha: float
) -> np.ndarray:
    """theta <- theta - alpha (Phi(xi_H) - Phi(xi_R))."""
    theta = np.asarray(theta, dtype=float)
    phi_h = np.asarray(phi_h, dtype=float)
    phi_r = np.asarray(phi_r, dtype=float)
    if theta.shape != phi_h.shape or theta.shape != phi_r.shape:
        raise DimensionMismatch("theta and feature sums must share a length")
    return theta - alpha * (phi_h - phi_r)


def p_e_given_beta(beta_hat: float, params: LearnerParams) -> float:
    """P(E=1 | beta): logistic in beta with midpoint at the confidence threshold."""
    if params.p_e_override is not None:
        return float(params.p_e_override)
    z = params.slope * (beta_hat - params.epsilon_beta)
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def confidence_update(
    theta: np.ndarray,
    phi_h: np.ndarray,
    phi_r: np.ndarray,
    beta_hat: float,
    params: LearnerParams,
) -> tuple[np.ndarray, float]:
    """Confidence-weighted update: the naive step scaled by the posterior of E=1.

    Likelihoods (log space): under E=1 a Boltzmann improvement term
    exp(-theta . dPhi); under E=0 an effort-only Gaussian in ||dPhi||. With
    P(E=1)=1 this reduces exactly to the naive update.
    """
    theta = np.asarray(theta, dtype=float)
    dphi = np.asarray(phi_h, dtype=float) - np.asarray(phi_r, dtype=float)
    if theta.shape != dphi.shape:
        raise DimensionMismatch("theta and feature sums must share a length")
    p1 = p_e_given_beta(beta_hat, params)
    if p1 >= 1.0:
        weight = 1.0
    elif p1 <= 0.0:
        weight = 0.0
    else:
        log_g1 = math.log(p1) - float(theta @ dphi)
        log_g0 = (
            math.log(1.0 - p1)
            + 0.5 * params.k * math.log(params.lam / math.pi)
            - params.lam * float(dphi @ dphi)
        )
        z = log_g1 - log_g0
        if z >= 0:
            weight = 1.0 / (1.0 + math.exp(-z))
        else:
            e = math.exp(z)
            weight = e / (1.0 + e)
    if not math.isfinite(weight):
        raise NonFiniteValue("posterior weight is not finite")
    return theta - params.alpha * weight * dphi, weight


@dataclass(frozen=True)
class OfflineFitResult:
    theta: np.ndarray
    grad_norm: float
    iterations: int
    objective: float


def fit_offline(
    demos: list[Trajectory],
    fs: FeatureSet,
    model: arm.ArmModel,
    reg: float = 1e-2,
    partition_samples: int = 0,
    perturb_scale: float = 0.3,
    seed: int = 0,
    learning_rate: float = 0.05,
    max_iters: int = 3000,
    tol: float = 1e-6,
) -> OfflineFitResult:
    """Maximum-likelihood weights from demonstrations, with nonnegativity projection.

    The likelihood of the demo set under the Boltzmann model is ascended with a
    Monte Carlo partition over the demos themselves, optionally widened by
    ``partition_samples`` perturbed copies (without samples and a single demo,
    the likelihood is flat and the regularizer alone pins theta at zero).
    """
    if len(demos) < 1:
        raise DimensionMismatch("need at least one demonstration")
    if reg <= 0:
        raise DimensionMismatch("reg must be positive")
    d_count = len(demos)
    phis = np.array([feature_sum(tr, fs, model) for tr in demos])  # (D, M)

    rng = np.random.default_rng(seed)
    partition_rows = [phis]
    for s in range(partition_samples):
        base = demos[s % d_count]
        wp = base.waypoints.copy()
        wp[1:-1] += rng.normal(scale=perturb_scale, size=wp[1:-1].shape)
        partition_rows.append(feature_sum(Trajectory(wp), fs, model)[None, :])
    z_rows = np.vstack(partition_rows)  # (D + S, M)

    theta = np.zeros(phis.shape[1])

    def objective_and_grad(th):
        costs = z_rows @ th
        m = float(np.min(costs))
        log_z = m * -1.0 + math.log(float(np.sum(np.exp(-(costs - m)))))
        obj = -float(np.sum(phis @ th)) - d_count * log_z - reg * float(th @ th)
        soft = np.exp(-(costs - m))
        soft /= soft.sum()
        grad = -phis.sum(axis=0) + d_count * (soft @ z_rows) - 2.0 * reg * th
        return obj, grad

    obj, grad = objective_and_grad(theta)
    lr = learning_rate
    iters = 0
    for iters in range(1, max_iters + 1):
        proj_grad = np.where((theta <= 0.0) & (grad < 0.0), 0.0, grad)
        gnorm = float(np.max(np.abs(proj_grad)))
        if gnorm <= tol:
            break
        stepped = False
        while lr > 1e-12:
            cand = np.maximum(0.0, theta + lr * grad)
            cand_obj, cand_grad = objective_and_grad(cand)
            if not math.isfinite(cand_obj):
                raise NonFiniteValue("offline likelihood became non-finite")
            if cand_obj > obj:
                theta, obj, grad = cand, cand_obj, cand_grad
                lr = min(lr * 1.3, 1.0)
                stepped = True
                break
            lr *= 0.5
        if not stepped:
            break
    proj_grad = np.where((theta <= 0.0) & (grad < 0.0), 0.0, grad)
    return OfflineFitResult(theta, float(np.max(np.abs(proj_grad))), iters, obj)
