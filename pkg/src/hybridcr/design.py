"""Design solvers: power, sensing time, receive beamforming, and the
alternating joint optimizer, plus the interweave and underlay baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import eigh as generalized_eigh

from .config import SystemConfig
from .channel import complex_normal, seeded_rng
from .numerics import (EULER_GAMMA, bisect_root, exp_e1, fix_phase,
                       maximize_concave_1d, q_function, q_inverse)
from .outage import OutageModel, outage_F, outage_G, outage_hybrid
from .rates import LN2, RateContext, rate_case0_bound, rate_case1_exact
from .sensing import SensingDesign, design_sensing
from . import rates

_BF_START_SEED = 0x5CF          # fixed seed for the random SCF multi-starts
_SCF_MAX_ITER = 200
_RIDGE_REL = 1e-9


class InfeasibleConstraintError(ValueError):
    """The outage budget cannot be met by any admissible design."""

    def __init__(self, message: str, min_achievable_outage: float):
        super().__init__(message)
        self.min_achievable_outage = min_achievable_outage


@dataclass(frozen=True)
class ConstraintReport:
    outage: float
    p_d: float


@dataclass(frozen=True)
class DesignSolution:
    """Optimized operating point of one CR mode for a given direct channel."""

    mode: str
    P1_star: float
    tau_star: float
    eps_star: Optional[float]
    w1_star: np.ndarray
    objective: float                 # the mode's own design objective [bits/s/Hz]
    objective_exact: float           # same design, exact busy-branch expectation
    trace: Tuple[float, ...]
    constraint_report: ConstraintReport
    converged: bool = True
    flags: Tuple[str, ...] = field(default_factory=tuple)
    rate_terms: dict = field(default_factory=dict)


def solve_power(model: OutageModel, cfg: SystemConfig) -> float:
    """Busy-branch transmit power meeting the outage budget with equality.

    Solves the hybrid outage equation for the busy-branch power, brackets the
    root inside the increasing region of the outage curve and caps at the
    peak power when the constraint goes slack.
    """
    f_peak = outage_F(model, cfg.P_peak)
    pd = cfg.Pd_target
    y0 = (cfg.Pout_target - (1.0 - pd) * f_peak) / pd
    if y0 >= f_peak:
        return cfg.P_peak
    if y0 <= model.f_floor:
        min_outage = (1.0 - pd) * f_peak + pd * model.f_floor
        raise InfeasibleConstraintError(
            f"outage budget {cfg.Pout_target} below the minimum achievable "
            f"{min_outage:.6g} (detector misses alone contribute "
            f"{(1.0 - pd) * f_peak:.6g})", min_outage)
    root = bisect_root(lambda p: outage_F(model, p) - y0,
                       model.p_min_mono, cfg.P_peak, tol=1e-12)
    return min(root, cfg.P_peak)


def _pf_at_target(tau: float, cfg: SystemConfig, xi: float) -> float:
    """False-alarm probability along the constant-detection threshold curve."""
    n = tau * cfg.f_s
    delta = cfg.N00 + cfg.P_p * cfg.sigma0_sq
    u = math.sqrt(n) * (delta / cfg.N00 - 1.0) + delta * xi / cfg.N00
    return q_function(u)


def _sensing_objective_bits(tau: float, cfg: SystemConfig, xi: float,
                            pd_fixed: float, c00: float, c01: float,
                            d10: float, d11: float) -> float:
    theta = (cfg.T - tau) / cfg.T
    p0, p1 = cfg.P0_prior, cfg.P1_prior
    pf = _pf_at_target(tau, cfg, xi)
    return theta * (p0 * (1.0 - pf) * c00 + p1 * (1.0 - pd_fixed) * c01
                    + p0 * pf * d10 + p1 * pd_fixed * d11) / LN2


def sensing_derivative(tau: float, cfg: SystemConfig, c00: float, c01: float,
                       d10: float, d11: float) -> float:
    """Closed-form derivative of the sensing objective [bits/s/Hz per second].

    Valid where the detection-target threshold is unclamped. The leading
    direct-rate term carries the idle prior on c00 and the busy prior on c01.
    """
    p0, p1 = cfg.P0_prior, cfg.P1_prior
    pd = cfg.Pd_target
    xi = q_inverse(pd)
    n = tau * cfg.f_s
    delta = cfg.N00 + cfg.P_p * cfg.sigma0_sq
    slope = delta / cfg.N00 - 1.0
    u = math.sqrt(n) * slope + delta * xi / cfg.N00
    pf = q_function(u)
    phi = math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    du = slope * cfg.f_s / (2.0 * math.sqrt(n))
    theta = (cfg.T - tau) / cfg.T
    value = (-(p0 * c00 + p1 * c01) / cfg.T
             - p0 * pf * (d10 - c00) / cfg.T
             - p1 * pd * (d11 - c01) / cfg.T
             - theta * p0 * (d10 - c00) * phi * du)
    return value / LN2


def _sensing_domain(cfg: SystemConfig, xi: float) -> Tuple[float, float]:
    lo = max(xi * xi / cfg.f_s * (1.0 + 1e-9) if xi < 0.0 else 0.0,
             cfg.T * 1e-9)
    if lo >= cfg.T:
        raise ValueError("frame too short for any valid sensing slot")
    return lo, cfg.T


def optimize_sensing(w1: np.ndarray, p1_star: float, ctx: RateContext,
                     cfg: SystemConfig) -> SensingDesign:
    """Rate-optimal sensing slot for a fixed busy-branch beamformer.

    The detection constraint is folded in through the target threshold, so
    the search is one-dimensional over the slot length on the region where
    that threshold is nonnegative (the objective is concave there).
    """
    case0 = rate_case0_bound(ctx, 1.0, 1.0)
    busy = ctx.with_design(w1, p1_star)
    d10, d11 = rates.rate_case1_highinr(busy)
    xi = q_inverse(cfg.Pd_target)
    lo, hi = _sensing_domain(cfg, xi)
    if case0.c00 <= 0.0 and case0.c01 <= 0.0 and d10 <= 0.0:
        return design_sensing(lo, cfg)
    tau, _ = maximize_concave_1d(
        lambda t: _sensing_objective_bits(t, cfg, xi, cfg.Pd_target,
                                          case0.c00, case0.c01, d10, d11),
        lo, hi, tol=1e-13 * cfg.T)
    return design_sensing(tau, cfg)


@dataclass(frozen=True)
class SecantCoefficients:
    """Secant slopes of the two concave link functions over their spectra."""

    kappa1: float
    mu1: float
    interval0: Tuple[float, float]
    interval1: Tuple[float, float]


def _f1(x: float, b1_hat: float) -> float:
    return b1_hat * (math.log(x) + exp_e1(x))


def secant_coefficients(h_eff: np.ndarray, r_eff: np.ndarray,
                        alpha1_hat: float, beta1_hat: float) -> SecantCoefficients:
    """Linear lower-bound slopes for the busy-branch rate surrogate.

    kappa1 spans the spectrum of the signal matrix, mu1 the generalized
    spectrum of the (signal, interference) pencil; coincident endpoints fall
    back to the derivative at the point.
    """
    eigs_h = np.linalg.eigvalsh(h_eff).real
    lmin, lmax = float(eigs_h[0]), float(eigs_h[-1])
    if lmin <= 0.0:
        raise ValueError("signal matrix must be positive definite")
    if lmax - lmin < 1e-12 * max(1.0, lmax):
        kappa1 = alpha1_hat / lmin
    else:
        kappa1 = alpha1_hat * (math.log(lmax) - math.log(lmin)) / (lmax - lmin)
    pencil = generalized_eigh(h_eff, r_eff, eigvals_only=True).real
    emin, emax = float(pencil[0]), float(pencil[-1])
    if emin <= 0.0:
        raise ValueError("pencil eigenvalues must be positive")
    if emax - emin < 1e-12 * max(1.0, emax):
        mu1 = beta1_hat * exp_e1(emin)      # f1'(x) = beta1 * exp(x) E1(x)
    else:
        mu1 = (_f1(emax, beta1_hat) - _f1(emin, beta1_hat)) / (emax - emin)
    return SecantCoefficients(kappa1=float(kappa1), mu1=float(mu1),
                              interval0=(lmin, lmax), interval1=(emin, emax))


def effective_matrices(ctx: RateContext, p1: float) -> Tuple[np.ndarray, np.ndarray, bool]:
    """Signal and interference matrices of the busy-branch rate expressions.

    A nearly singular interference covariance is ridge-regularized and
    flagged so the pencil stays invertible.
    """
    m = ctx.h_ss.shape[0]
    h_eff = np.eye(m, dtype=complex) + (p1 / ctx.N0s) * np.outer(ctx.h_ss, ctx.h_ss.conj())
    r_ps = np.asarray(ctx.R_ps, dtype=complex)
    ridged = False
    min_eig = np.linalg.eigvalsh(r_ps).min().real
    if min_eig <= _RIDGE_REL * np.trace(r_ps).real / m:
        r_ps = r_ps + (_RIDGE_REL * np.trace(r_ps).real / m) * np.eye(m)
        ridged = True
    r_eff = ctx.rho_inr_s * r_ps
    return h_eff, r_eff, ridged


def _p6_objective(w: np.ndarray, h_tilde: np.ndarray, h_bar: np.ndarray,
                  r_eff: np.ndarray) -> float:
    quad_r = float((w.conj() @ r_eff @ w).real)
    return float((w.conj() @ h_tilde @ w).real + (w.conj() @ h_bar @ w).real / quad_r)


def dge_beamformer(ctx: RateContext, p1_star: float) -> np.ndarray:
    """Dominant generalized eigenvector of the (signal, interference) pencil."""
    h_eff, r_eff, _ = effective_matrices(ctx, p1_star)
    _, vecs = generalized_eigh(h_eff, r_eff)
    w = vecs[:, -1]
    return fix_phase(w / np.linalg.norm(w))


def _maximize_quadratic_plus_quotient(h_eff: np.ndarray, r_eff: np.ndarray,
                                      alpha1_hat: float, beta1_hat: float,
                                      h_ss: np.ndarray,
                                      rng: np.random.Generator) -> Tuple[np.ndarray, float, bool]:
    """Best unit vector for the quadratic-plus-Rayleigh-quotient surrogate.

    Damped self-consistent-field iterations: repeatedly take the dominant
    eigenvector of the gradient-stationarity matrix, averaging on objective
    decrease. Multi-start from MRC, the pencil DGE and random vectors; the
    best iterate ever seen is returned, so the result never falls below the
    starting candidates.
    """
    sec = secant_coefficients(h_eff, r_eff, alpha1_hat, beta1_hat)
    h_tilde = sec.kappa1 * h_eff
    h_bar = sec.mu1 * h_eff
    m = h_eff.shape[0]
    starts = []
    nrm = np.linalg.norm(h_ss)
    if nrm > 0.0:
        starts.append(h_ss / nrm)
    _, vecs = generalized_eigh(h_eff, r_eff)
    starts.append(vecs[:, -1] / np.linalg.norm(vecs[:, -1]))
    for _ in range(3):
        v = complex_normal(rng, m)
        starts.append(v / np.linalg.norm(v))

    best_w, best_obj = starts[0], _p6_objective(starts[0], h_tilde, h_bar, r_eff)
    all_converged = True
    for w0 in starts:
        w = w0
        prev = _p6_objective(w, h_tilde, h_bar, r_eff)
        if prev > best_obj:
            best_w, best_obj = w, prev
        converged = False
        for _ in range(_SCF_MAX_ITER):
            quad_r = float((w.conj() @ r_eff @ w).real)
            quad_b = float((w.conj() @ h_bar @ w).real)
            stationarity = h_tilde + h_bar / quad_r - (quad_b / quad_r ** 2) * r_eff
            _, vecs = np.linalg.eigh(stationarity)
            w_next = vecs[:, -1]
            cur = _p6_objective(w_next, h_tilde, h_bar, r_eff)
            if cur < prev - 1e-13:
                phase = np.exp(-1j * np.angle(np.vdot(w, w_next)))
                w_next = w + 0.5 * (phase * w_next - w)
                w_next = w_next / np.linalg.norm(w_next)
                cur = _p6_objective(w_next, h_tilde, h_bar, r_eff)
            if cur > best_obj:
                best_w, best_obj = w_next, cur
            if abs(cur - prev) <= 1e-13 * max(1.0, abs(prev)):
                converged = True
                w = w_next
                break
            w, prev = w_next, cur
        all_converged = all_converged and converged
    return fix_phase(best_w), best_obj, all_converged


def optimize_beamformer(tau_hat: float, eps_hat: float, p1_star: float,
                        ctx: RateContext, cfg: SystemConfig,
                        rng: np.random.Generator | None = None,
                        full_output: bool = False):
    """Busy-branch beamformer for a fixed sensing pair (tau, epsilon)."""
    rng = rng if rng is not None else seeded_rng(_BF_START_SEED)
    sensing = design_sensing(tau_hat, cfg, epsilon=eps_hat)
    h_eff, r_eff, ridged = effective_matrices(ctx, p1_star)
    w, obj, converged = _maximize_quadratic_plus_quotient(
        h_eff, r_eff, sensing.alpha1, sensing.beta1, ctx.h_ss, rng)
    if full_output:
        return w, obj, converged, ridged
    return w


def _exact_objective_bits(ctx: RateContext, sensing: SensingDesign,
                          w: np.ndarray, p1: float) -> float:
    return rates.objective_C(ctx.with_design(w, p1), sensing, mode="exact")


def _highinr_objective_bits(ctx: RateContext, sensing: SensingDesign,
                            w: np.ndarray, p1: float) -> float:
    return rates.objective_C(ctx.with_design(w, p1), sensing, mode="high_inr")


def alternating_optimize(ctx: RateContext, cfg: SystemConfig, model: OutageModel,
                         conv_tol: float = 1e-6, max_outer: int = 50,
                         rng: np.random.Generator | None = None) -> DesignSolution:
    """Joint sensing and beamforming design by block-coordinate ascent.

    The busy-branch power is fixed once from the outage budget; sensing time
    and beamformer then alternate until the interference-limited objective
    moves less than ``conv_tol`` bits. The beamformer update is kept only if
    it does not decrease the common objective, so the trace is nondecreasing.
    """
    rng = rng if rng is not None else seeded_rng(_BF_START_SEED)
    p1 = solve_power(model, cfg)
    m = ctx.h_ss.shape[0]
    flags: list[str] = []

    if np.linalg.norm(ctx.h_ss) == 0.0:
        xi = q_inverse(cfg.Pd_target)
        lo, _ = _sensing_domain(cfg, xi)
        sensing = design_sensing(lo, cfg)
        w = np.zeros(m, dtype=complex)
        w[0] = 1.0
        report = ConstraintReport(
            outage=outage_hybrid(model, cfg.Pd_target, cfg.P_peak, p1),
            p_d=sensing.p_d)
        return DesignSolution(mode="hybrid", P1_star=p1, tau_star=sensing.tau,
                              eps_star=sensing.epsilon, w1_star=w,
                              objective=0.0, objective_exact=0.0,
                              trace=(0.0,), constraint_report=report,
                              converged=True, flags=("zero-rate-boundary",))

    if cfg.P1_prior < 0.5:
        w = fix_phase(ctx.h_ss / np.linalg.norm(ctx.h_ss))
    else:
        w = dge_beamformer(ctx, p1)

    trace: list[float] = []
    sensing = None
    converged = False
    prev = None
    for _ in range(max_outer):
        sensing = optimize_sensing(w, p1, ctx, cfg)
        w_cand, _, scf_ok, ridged = optimize_beamformer(
            sensing.tau, sensing.epsilon, p1, ctx, cfg, rng, full_output=True)
        if not scf_ok and "scf-not-converged" not in flags:
            flags.append("scf-not-converged")
        if ridged and "interference-ridge" not in flags:
            flags.append("interference-ridge")
        if (_highinr_objective_bits(ctx, sensing, w_cand, p1)
                >= _highinr_objective_bits(ctx, sensing, w, p1)):
            w = w_cand
        current = _highinr_objective_bits(ctx, sensing, w, p1)
        trace.append(current)
        if prev is not None and abs(current - prev) < conv_tol:
            converged = True
            break
        prev = current

    report = ConstraintReport(
        outage=outage_hybrid(model, cfg.Pd_target, cfg.P_peak, p1),
        p_d=sensing.p_d)
    busy = ctx.with_design(w, p1)
    c10, c11 = rate_case1_exact(busy)
    d10, d11 = rates.rate_case1_highinr(busy)
    case0 = rate_case0_bound(ctx, 1.0, 1.0)
    return DesignSolution(
        mode="hybrid", P1_star=p1, tau_star=sensing.tau, eps_star=sensing.epsilon,
        w1_star=w, objective=trace[-1],
        objective_exact=_exact_objective_bits(ctx, sensing, w, p1),
        trace=tuple(trace), constraint_report=report, converged=converged,
        flags=tuple(flags),
        rate_terms={"c00": case0.c00, "c01": case0.c01, "c10": c10, "c11": c11,
                    "d10": d10, "d11": d11})


def optimize_interweave(ctx: RateContext, cfg: SystemConfig,
                        model: OutageModel) -> DesignSolution:
    """Rate-optimal interweave design: peak power, MRC, sensing from the
    outage equality.

    The outage equality pins the detection probability, hence the threshold
    curve; the slot length then maximizes the idle-branch rate. A budget at
    or above the full-interference outage cannot bind and yields a slack
    boundary design; a budget at or below the interference-free outage is
    infeasible.
    """
    f_peak = outage_F(model, cfg.P_peak)
    g = outage_G(model)
    flags: list[str] = []
    if cfg.Pout_target <= g:
        raise InfeasibleConstraintError(
            f"outage budget {cfg.Pout_target} not above the interference-free "
            f"outage {g:.6g}", g)
    if cfg.Pout_target >= f_peak:
        pd_int = 1e-12          # constraint slack: drive both detector rates to zero
        flags.append("outage-slack")
    else:
        pd_int = (cfg.Pout_target - f_peak) / (g - f_peak)
    xi_int = q_inverse(pd_int)
    lo = max(xi_int * xi_int / cfg.f_s * (1.0 + 1e-9) if xi_int < 0.0 else 0.0,
             cfg.T * 1e-9)
    case0 = rate_case0_bound(ctx, 1.0, 1.0)
    if case0.c00 <= 0.0 and case0.c01 <= 0.0:
        tau = lo
    else:
        tau, _ = maximize_concave_1d(
            lambda t: _sensing_objective_bits(t, cfg, xi_int, pd_int,
                                              case0.c00, case0.c01, 0.0, 0.0),
            lo, cfg.T, tol=1e-13 * cfg.T)
    delta = cfg.N00 + cfg.P_p * cfg.sigma0_sq
    eps_int = max(delta * (xi_int / math.sqrt(tau * cfg.f_s) + 1.0), 0.0)
    sensing = design_sensing(tau, cfg, epsilon=eps_int)
    objective = _sensing_objective_bits(tau, cfg, xi_int, pd_int,
                                        case0.c00, case0.c01, 0.0, 0.0)
    nrm = np.linalg.norm(ctx.h_ss)
    w = fix_phase(ctx.h_ss / nrm) if nrm > 0 else np.eye(ctx.h_ss.shape[0])[:, 0].astype(complex)
    report = ConstraintReport(
        outage=(1.0 - sensing.p_d) * f_peak + sensing.p_d * g, p_d=sensing.p_d)
    return DesignSolution(
        mode="interweave", P1_star=cfg.P_peak, tau_star=tau, eps_star=eps_int,
        w1_star=w, objective=objective, objective_exact=objective,
        trace=(objective,), constraint_report=report, converged=True,
        flags=tuple(flags),
        rate_terms={"c00": case0.c00, "c01": case0.c01})


def optimize_underlay(ctx: RateContext, cfg: SystemConfig, model: OutageModel,
                      rng: np.random.Generator | None = None) -> DesignSolution:
    """Rate-optimal underlay design: no sensing, outage-constrained power.

    The power solve is the certain-detection limit of the hybrid one; the
    beamformer solves the busy-branch surrogate with the activity priors as
    branch weights, and the objective covers the whole frame.
    """
    rng = rng if rng is not None else seeded_rng(_BF_START_SEED)
    if cfg.Pout_target <= model.f_floor:
        raise InfeasibleConstraintError(
            f"outage budget {cfg.Pout_target} below the minimum closed-form "
            f"outage {model.f_floor:.6g}", model.f_floor)
    f_peak = outage_F(model, cfg.P_peak)
    if cfg.Pout_target >= f_peak:
        p_und = cfg.P_peak
    else:
        p_und = bisect_root(lambda p: outage_F(model, p) - cfg.Pout_target,
                            model.p_min_mono, cfg.P_peak, tol=1e-12)
    h_eff, r_eff, ridged = effective_matrices(ctx, p_und)
    nrm = np.linalg.norm(ctx.h_ss)
    if nrm == 0.0:
        w = np.zeros(ctx.h_ss.shape[0], dtype=complex)
        w[0] = 1.0
    else:
        w, _, _ = _maximize_quadratic_plus_quotient(
            h_eff, r_eff, cfg.P0_prior, cfg.P1_prior, ctx.h_ss, rng)
    busy = ctx.with_design(w, p_und)
    c10, c11 = rate_case1_exact(busy)
    d10, d11 = rates.rate_case1_highinr(busy)
    objective = (cfg.P0_prior * d10 + cfg.P1_prior * d11) / LN2
    objective_exact = (cfg.P0_prior * c10 + cfg.P1_prior * c11) / LN2
    report = ConstraintReport(outage=outage_F(model, p_und), p_d=1.0)
    flags = ("interference-ridge",) if ridged else ()
    return DesignSolution(
        mode="underlay", P1_star=p_und, tau_star=0.0, eps_star=None,
        w1_star=w, objective=objective, objective_exact=objective_exact,
        trace=(objective,), constraint_report=report, converged=True,
        flags=flags,
        rate_terms={"c10": c10, "c11": c11, "d10": d10, "d11": d11})
