import math

import numpy as np
import pytest

from hybridcr import (InfeasibleConstraintError, SystemConfig,
                      alternating_optimize, build_outage_model, dge_beamformer,
                      make_rate_context, matrix_sqrt, optimize_beamformer,
                      optimize_interweave, optimize_sensing, optimize_underlay,
                      outage_F, outage_G, q_inverse, rate_case1_exact,
                      rate_case1_highinr, sample_channels, secant_coefficients,
                      seeded_rng, sensing_derivative, solve_power,
                      uniform_correlation_set)
from hybridcr.channel import complex_normal
from hybridcr.design import (_sensing_objective_bits, effective_matrices,
                             _maximize_quadratic_plus_quotient, _p6_objective)
from hybridcr.rates import rate_case0_bound


def make_ctx(cfg, corr, seed, **kw):
    draw = sample_channels(corr, cfg.sigma0_sq, [seed])
    return make_rate_context(draw, corr, cfg, **kw)


# ---------------------------------------------------------------------------
# power

def test_solve_power_full_power_when_budget_loose(cfg, corr, model):
    loose = cfg.with_overrides(Pout_target=0.35)
    assert solve_power(model, loose) == cfg.P_peak


def test_solve_power_reconstructs_fixed_point(corr, model):
    # a budget engineered from a known power must be solved back exactly
    target_power = 3.0
    cfg = SystemConfig(Pd_target=1.0 - 1e-12,
                       Pout_target=outage_F(model, target_power))
    assert solve_power(model, cfg) == pytest.approx(target_power, rel=1e-9)


def test_solve_power_equality_residual_over_sweep(cfg, corr, model):
    pd = cfg.Pd_target
    f_peak = outage_F(model, cfg.P_peak)
    for target in (0.01, 0.02, 0.05, 0.1, 0.25):
        cfg_t = cfg.with_overrides(Pout_target=target)
        p1 = solve_power(model, cfg_t)
        if p1 < cfg.P_peak:
            achieved = (1 - pd) * f_peak + pd * outage_F(model, p1)
            assert abs(achieved - target) <= 1e-8


def test_solve_power_infeasible_budget(cfg, corr, model):
    tight = cfg.with_overrides(Pout_target=5e-3)
    with pytest.raises(InfeasibleConstraintError) as err:
        solve_power(model, tight)
    assert err.value.min_achievable_outage > 5e-3


# ---------------------------------------------------------------------------
# sensing

def test_sensing_derivative_matches_finite_differences(cfg):
    rng = np.random.default_rng(7)
    c00, c01 = 2.2, 1.4
    d10, d11 = 1.1, 0.8
    xi = q_inverse(cfg.Pd_target)

    def objective(tau):
        return _sensing_objective_bits(tau, cfg, xi, cfg.Pd_target,
                                       c00, c01, d10, d11)

    for tau in rng.uniform(1e-4, cfg.T * 0.99, size=50):
        h = 1e-7 * max(tau, 1e-3)
        fd = (objective(tau + h) - objective(tau - h)) / (2 * h)
        closed = sensing_derivative(tau, cfg, c00, c01, d10, d11)
        assert closed == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_sensing_derivative_negative_near_frame_end(cfg):
    deriv = sensing_derivative(cfg.T * 0.999, cfg, 2.0, 1.5, 1.0, 0.9)
    assert deriv < 0.0


def test_sensing_objective_concave_on_grid(cfg):
    xi = q_inverse(cfg.Pd_target)
    taus = np.linspace(cfg.T / 200, cfg.T, 200)
    values = np.array([_sensing_objective_bits(t, cfg, xi, cfg.Pd_target,
                                               2.2, 1.4, 1.1, 0.8)
                       for t in taus])
    second = values[:-2] - 2 * values[1:-1] + values[2:]
    assert second.max() <= 1e-9


def test_optimize_sensing_matches_dense_grid(cfg, corr, model):
    ctx = make_ctx(cfg, corr, 42)
    p1 = solve_power(model, cfg)
    w = ctx.h_ss / np.linalg.norm(ctx.h_ss)
    sensing = optimize_sensing(w, p1, ctx, cfg)
    assert abs(sensing.p_d - cfg.Pd_target) < 1e-10

    case0 = rate_case0_bound(ctx, 1.0, 1.0)
    d10, d11 = rate_case1_highinr(ctx.with_design(w, p1))
    xi = q_inverse(cfg.Pd_target)
    lo = xi * xi / cfg.f_s * (1 + 1e-9)
    grid = np.geomspace(lo, cfg.T, 10_000)
    vals = [_sensing_objective_bits(t, cfg, xi, cfg.Pd_target,
                                    case0.c00, case0.c01, d10, d11) for t in grid]
    best = int(np.argmax(vals))
    spacing = grid[min(best + 1, grid.size - 1)] - grid[max(best - 1, 0)]
    assert abs(sensing.tau - grid[best]) <= spacing


def test_optimize_sensing_boundary_when_sensing_is_pure_overhead(corr):
    # an idle primary with an easy sensing channel makes any slot wasteful
    cfg = SystemConfig(P1_prior=0.0, sigma0_sq=1e4)
    model = build_outage_model(corr, cfg)
    ctx = make_ctx(cfg, corr, 43)
    w = ctx.h_ss / np.linalg.norm(ctx.h_ss)
    sensing = optimize_sensing(w, solve_power(model, cfg), ctx, cfg)
    assert sensing.tau < 1e-4 * cfg.T


# ---------------------------------------------------------------------------
# beamforming

def test_secant_degenerate_signal_interval(cfg, corr):
    ctx = make_ctx(cfg, corr, 44)
    h_eff, r_eff, _ = effective_matrices(ctx, 0.0)   # P1=0 makes H_eff identity
    sec = secant_coefficients(h_eff, r_eff, 0.7, 0.3)
    assert sec.interval0[0] == pytest.approx(sec.interval0[1])
    assert sec.kappa1 == pytest.approx(0.7)          # derivative of a1*ln at 1


def test_secant_zero_weights(cfg, corr):
    ctx = make_ctx(cfg, corr, 45)
    h_eff, r_eff, _ = effective_matrices(ctx, 2.0)
    sec = secant_coefficients(h_eff, r_eff, 0.0, 0.4)
    assert sec.kappa1 == 0.0
    assert sec.mu1 > 0.0


def test_secant_lines_lower_bound_link_functions(cfg, corr):
    from hybridcr import exp_e1

    ctx = make_ctx(cfg, corr, 46)
    h_eff, r_eff, _ = effective_matrices(ctx, 2.0)
    a1h, b1h = 0.45, 0.4
    sec = secant_coefficients(h_eff, r_eff, a1h, b1h)
    lo0, hi0 = sec.interval0
    f0 = lambda x: a1h * math.log(x)
    intercept0 = f0(lo0) - sec.kappa1 * lo0
    for x in np.linspace(lo0, hi0, 1000):
        assert f0(x) >= sec.kappa1 * x + intercept0 - 1e-12
    lo1, hi1 = sec.interval1
    f1 = lambda x: b1h * (math.log(x) + exp_e1(x))
    intercept1 = f1(lo1) - sec.mu1 * lo1
    for x in np.linspace(lo1, hi1, 1000):
        assert f1(x) >= sec.mu1 * x + intercept1 - 1e-12


def test_beamformer_pure_quadratic_gives_mrc(cfg, corr, model):
    ctx = make_ctx(cfg, corr, 47)
    h_eff, r_eff, _ = effective_matrices(ctx, 2.0)
    w, _, _ = _maximize_quadratic_plus_quotient(h_eff, r_eff, 0.5, 0.0,
                                                ctx.h_ss, seeded_rng(1))
    mrc = ctx.h_ss / np.linalg.norm(ctx.h_ss)
    assert abs(np.vdot(w, mrc)) == pytest.approx(1.0, abs=1e-8)


def test_beamformer_pure_quotient_gives_dge(cfg, corr):
    ctx = make_ctx(cfg, corr, 48)
    h_eff, r_eff, _ = effective_matrices(ctx, 2.0)
    w, _, _ = _maximize_quadratic_plus_quotient(h_eff, r_eff, 0.0, 0.5,
                                                ctx.h_ss, seeded_rng(2))
    dge = dge_beamformer(ctx, 2.0)
    assert abs(np.vdot(w, dge)) == pytest.approx(1.0, abs=1e-8)


def test_beamformer_two_antenna_grid_oracle():
    from hybridcr.validation import _sphere_grid_best

    cfg = SystemConfig(M=2)
    corr = uniform_correlation_set(0.5, 2)
    for seed in range(5):
        ctx = make_ctx(cfg, corr, 100 + seed)
        h_eff, r_eff, _ = effective_matrices(ctx, 1.5)
        sec = secant_coefficients(h_eff, r_eff, 0.4, 0.45)
        w, obj, _ = _maximize_quadratic_plus_quotient(
            h_eff, r_eff, 0.4, 0.45, ctx.h_ss, seeded_rng(200 + seed))
        best = _sphere_grid_best(sec.kappa1 * h_eff, sec.mu1 * h_eff, r_eff)
        assert abs(obj - best) / abs(best) <= 1e-4


def test_beamformer_beats_probes_and_baselines(cfg, corr):
    ctx = make_ctx(cfg, corr, 49)
    h_eff, r_eff, _ = effective_matrices(ctx, 2.0)
    sec = secant_coefficients(h_eff, r_eff, 0.45, 0.4)
    h_tilde, h_bar = sec.kappa1 * h_eff, sec.mu1 * h_eff
    w, obj, _ = _maximize_quadratic_plus_quotient(h_eff, r_eff, 0.45, 0.4,
                                                  ctx.h_ss, seeded_rng(3))
    mrc = ctx.h_ss / np.linalg.norm(ctx.h_ss)
    dge = dge_beamformer(ctx, 2.0)
    assert obj >= _p6_objective(mrc, h_tilde, h_bar, r_eff) - 1e-12
    assert obj >= _p6_objective(dge, h_tilde, h_bar, r_eff) - 1e-12
    probes = complex_normal(seeded_rng(4), 10_000, cfg.M)
    probes /= np.linalg.norm(probes, axis=1, keepdims=True)
    quad_r = np.einsum("ij,jk,ik->i", probes.conj(), r_eff, probes).real
    probe_objs = (np.einsum("ij,jk,ik->i", probes.conj(), h_tilde, probes).real
                  + np.einsum("ij,jk,ik->i", probes.conj(), h_bar, probes).real / quad_r)
    assert obj >= probe_objs.max()


def test_dge_beamformer_properties(cfg, corr):
    ctx = make_ctx(cfg, corr, 50)
    # whitened problem: interference covariance proportional to identity
    eye_corr = uniform_correlation_set(0.0, cfg.M)
    ctx_white = make_rate_context(ctx.h_ss, eye_corr, cfg)
    w = dge_beamformer(ctx_white, 2.0)
    mrc = ctx.h_ss / np.linalg.norm(ctx.h_ss)
    assert abs(np.vdot(w, mrc)) == pytest.approx(1.0, abs=1e-10)
    # zero power: quotient reduces to minimizing the interference form
    w0 = dge_beamformer(ctx, 0.0)
    eigvals, eigvecs = np.linalg.eigh(np.asarray(corr.R_ps))
    least = eigvecs[:, 0]
    assert abs(np.vdot(w0, least)) == pytest.approx(1.0, abs=1e-10)
    # stationarity residual of the pencil equation
    h_eff, r_eff, _ = effective_matrices(ctx, 2.0)
    wd = dge_beamformer(ctx, 2.0)
    lam = (wd.conj() @ h_eff @ wd).real / (wd.conj() @ r_eff @ wd).real
    assert np.linalg.norm(h_eff @ wd - lam * (r_eff @ wd)) < 1e-8


def test_optimize_beamformer_public_interface(cfg, corr, model):
    ctx = make_ctx(cfg, corr, 51)
    p1 = solve_power(model, cfg)
    sensing = optimize_sensing(ctx.h_ss / np.linalg.norm(ctx.h_ss), p1, ctx, cfg)
    w = optimize_beamformer(sensing.tau, sensing.epsilon, p1, ctx, cfg)
    assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-12)
    # phase convention: the largest-magnitude entry is real positive
    k = int(np.argmax(np.abs(w)))
    assert abs(w[k].imag) < 1e-12
    assert w[k].real > 0


# ---------------------------------------------------------------------------
# alternating joint design

def test_alternating_idle_prior_converges_to_mrc(corr):
    cfg = SystemConfig(P1_prior=0.0)
    model = build_outage_model(corr, cfg)
    ctx = make_ctx(cfg, corr, 52)
    sol = alternating_optimize(ctx, cfg, model)
    assert sol.converged
    assert len(sol.trace) <= 3
    mrc = ctx.h_ss / np.linalg.norm(ctx.h_ss)
    assert abs(np.vdot(sol.w1_star, mrc)) == pytest.approx(1.0, abs=1e-6)


def test_alternating_trace_monotone_and_constraints(cfg, corr, model):
    for seed in range(20):
        ctx = make_ctx(cfg, corr, 300 + seed)
        sol = alternating_optimize(ctx, cfg, model,
                                   rng=seeded_rng(400 + seed))
        diffs = np.diff(np.asarray(sol.trace))
        assert diffs.min() >= -1e-9 if diffs.size else True
        assert sol.converged
        assert abs(sol.constraint_report.outage - cfg.Pout_target) <= 1e-8
        assert abs(sol.constraint_report.p_d - cfg.Pd_target) <= 1e-10
        assert np.linalg.norm(sol.w1_star) == pytest.approx(1.0, abs=1e-12)


def test_alternating_dominates_baselines_per_draw(cfg, corr, model):
    # with a low activity prior the hybrid design beats both standard modes
    # on the like-for-like exact-form objective, draw by draw
    for seed in range(15):
        ctx = make_ctx(cfg, corr, 500 + seed)
        hybrid = alternating_optimize(ctx, cfg, model, rng=seeded_rng(600 + seed))
        inter = optimize_interweave(ctx, cfg, model)
        under = optimize_underlay(ctx, cfg, model, rng=seeded_rng(700 + seed))
        assert hybrid.objective_exact >= max(inter.objective_exact,
                                             under.objective_exact) - 1e-6


def test_alternating_zero_channel_flag(cfg, corr, model):
    ctx = make_rate_context(np.zeros(cfg.M, dtype=complex), corr, cfg)
    sol = alternating_optimize(ctx, cfg, model)
    assert "zero-rate-boundary" in sol.flags
    assert sol.objective == 0.0


def test_alternating_aligns_with_dge_at_high_activity(corr):
    cfg = SystemConfig(P1_prior=1.0 - 1e-9, Pd_target=1.0 - 1e-9,
                       Pout_target=2e-2)
    model = build_outage_model(corr, cfg)
    ctx = make_ctx(cfg, corr, 53)
    sol = alternating_optimize(ctx, cfg, model)
    w_dge = dge_beamformer(ctx, sol.P1_star)
    assert abs(np.vdot(sol.w1_star, w_dge)) >= 0.999


def test_alternating_propagates_infeasibility(cfg, corr, model):
    tight = cfg.with_overrides(Pout_target=5e-3)
    ctx = make_ctx(tight, corr, 54)
    with pytest.raises(InfeasibleConstraintError):
        alternating_optimize(ctx, tight, model)


# ---------------------------------------------------------------------------
# baselines

def test_interweave_objective_increases_with_budget(cfg, corr, model):
    ctx = make_ctx(cfg, corr, 55)
    objectives = []
    for target in (0.01, 0.02, 0.05, 0.1):
        sol = optimize_interweave(ctx, cfg.with_overrides(Pout_target=target), model)
        objectives.append(sol.objective)
        assert abs(sol.constraint_report.outage - target) <= 1e-8
    assert all(a < b for a, b in zip(objectives, objectives[1:]))


def test_interweave_matches_dense_grid(cfg, corr, model):
    ctx = make_ctx(cfg, corr, 56)
    sol = optimize_interweave(ctx, cfg, model)
    f_peak = outage_F(model, cfg.P_peak)
    g = outage_G(model)
    pd_int = (cfg.Pout_target - f_peak) / (g - f_peak)
    xi = q_inverse(pd_int)
    case0 = rate_case0_bound(ctx, 1.0, 1.0)
    lo = xi * xi / cfg.f_s * (1 + 1e-9) if xi < 0 else cfg.T * 1e-9
    grid = np.geomspace(max(lo, cfg.T * 1e-9), cfg.T, 10_000)
    vals = [_sensing_objective_bits(t, cfg, xi, pd_int,
                                    case0.c00, case0.c01, 0.0, 0.0) for t in grid]
    best = int(np.argmax(vals))
    spacing = grid[min(best + 1, grid.size - 1)] - grid[max(best - 1, 0)]
    assert abs(sol.tau_star - grid[best]) <= spacing


def test_interweave_slack_and_infeasible_budgets(cfg, corr, model):
    ctx = make_ctx(cfg, corr, 57)
    slack = optimize_interweave(
        ctx, cfg.with_overrides(Pout_target=outage_F(model, cfg.P_peak) + 0.01), model)
    assert "outage-slack" in slack.flags
    assert slack.constraint_report.outage <= outage_F(model, cfg.P_peak) + 0.01
    with pytest.raises(InfeasibleConstraintError):
        optimize_interweave(
            ctx, cfg.with_overrides(Pout_target=outage_G(model) / 2), model)


def test_underlay_full_activity_collapse(corr):
    cfg = SystemConfig(P1_prior=1.0)
    model = build_outage_model(corr, cfg)
    ctx = make_ctx(cfg, corr, 58)
    sol = optimize_underlay(ctx, cfg, model)
    busy = ctx.with_design(sol.w1_star, sol.P1_star)
    _, d11 = rate_case1_highinr(busy)
    assert sol.objective == pytest.approx(d11 / math.log(2), rel=1e-12)


def test_underlay_full_power_when_loose(cfg, corr, model):
    loose = cfg.with_overrides(Pout_target=0.35)
    ctx = make_ctx(loose, corr, 59)
    sol = optimize_underlay(ctx, loose, model)
    assert sol.P1_star == loose.P_peak


def test_underlay_outperforms_interweave_at_high_activity(corr):
    cfg = SystemConfig(P1_prior=0.7, Pout_target=0.1)
    model = build_outage_model(corr, cfg)
    wins = 0
    for seed in range(10):
        ctx = make_ctx(cfg, corr, 800 + seed)
        under = optimize_underlay(ctx, cfg, model, rng=seeded_rng(900 + seed))
        inter = optimize_interweave(ctx, cfg, model)
        wins += under.objective_exact > inter.objective_exact
    assert wins >= 8
