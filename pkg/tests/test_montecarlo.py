import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaincc

from hybridcr import (McSpec, SystemConfig, alternating_optimize,
                      build_outage_model, design_sensing, make_rate_context,
                      mc_conditional_rate, mc_ed_probabilities, mc_lambda_bar,
                      mc_outage, mc_secondary_rate, optimize_interweave,
                      outage_G, outage_hybrid, ratio_quadform_mean,
                      sample_channels, matrix_sqrt, seeded_rng,
                      uniform_correlation_set)
from hybridcr.design import ConstraintReport, DesignSolution


def fixed_design(mode, p1, pd, cfg, tau=1e-3, eps=None):
    if eps is None and mode != "underlay":
        sensing = design_sensing(tau, cfg)
        eps = sensing.epsilon
    m = cfg.M
    w = np.zeros(m, dtype=complex)
    w[0] = 1.0
    return DesignSolution(mode=mode, P1_star=p1, tau_star=tau, eps_star=eps,
                          w1_star=w, objective=0.0, objective_exact=0.0,
                          trace=(0.0,),
                          constraint_report=ConstraintReport(outage=0.0, p_d=pd))


def test_mc_ed_zero_threshold_always_alarms(cfg):
    est = mc_ed_probabilities(200, 0.0, cfg, McSpec(n_realizations=500, seed=1))
    assert est.pf_hat == 1.0
    assert est.pd_hat == 1.0


def test_mc_ed_false_alarm_matches_clt(cfg):
    est = mc_ed_probabilities(1000, cfg.N00, cfg, McSpec(n_realizations=20_000, seed=2))
    # the CLT value is 1/2; the exact finite-sample location is ~0.4958
    assert abs(est.pf_hat - 0.5) <= 3 * max(est.pf_se, 2e-3)


def test_mc_ed_detection_matches_exact_fading_average(cfg):
    # independent quadrature oracle for the exact finite-sample detector
    n, tau = 300, 300 / cfg.f_s
    from hybridcr import threshold_for_target
    eps, _ = threshold_for_target(tau, cfg)

    def integrand(g):
        mean_power = cfg.P_p * g + cfg.N00
        return (gammaincc(n, n * eps / mean_power)
                * math.exp(-g / cfg.sigma0_sq) / cfg.sigma0_sq)

    exact, _ = integrate.quad(integrand, 0.0, 60.0 * cfg.sigma0_sq, limit=200)
    est = mc_ed_probabilities(n, eps, cfg, McSpec(n_realizations=40_000, seed=3))
    assert abs(est.pd_hat - exact) <= 3 * est.pd_se


def test_mc_lambda_bar_identity_cases(cfg, corr):
    eye = np.eye(cfg.M)
    hat, se = mc_lambda_bar(eye, eye, McSpec(n_realizations=2000, seed=4))
    assert hat == pytest.approx(1.0, abs=1e-12)
    assert se == pytest.approx(0.0, abs=1e-12)
    hat, _ = mc_lambda_bar(eye, 2.0 * eye, McSpec(n_realizations=2000, seed=5))
    assert hat == pytest.approx(2.0, abs=1e-12)


def test_mc_lambda_bar_matches_quadrature(cfg, corr):
    hat, se = mc_lambda_bar(corr.R_pp, corr.R_sp,
                            McSpec(n_realizations=400_000, seed=6))
    root = matrix_sqrt(corr.R_pp)
    quad = ratio_quadform_mean(corr.R_pp, root @ corr.R_sp @ root)
    assert abs(hat - quad) <= 3 * se


def test_mc_outage_no_interference_limit(cfg, corr, model):
    design = fixed_design("underlay", 0.0, 1.0, cfg, tau=0.0, eps=None)
    hat, se = mc_outage(design, cfg, corr, McSpec(n_realizations=300_000, seed=7))
    g = outage_G(model)
    assert abs(hat - g) <= 3 * max(se, 1e-5)


def test_mc_outage_vanishes_with_threshold(cfg, corr):
    cfg_small = cfg.with_overrides(gamma0=1e-9)
    design = fixed_design("hybrid", 2.0, cfg.Pd_target, cfg_small)
    hat, _ = mc_outage(design, cfg_small, corr, McSpec(n_realizations=20_000, seed=8))
    assert hat == 0.0


def test_mc_outage_tracks_hybrid_closed_form(cfg, corr, model):
    from hybridcr import solve_power
    p1 = solve_power(model, cfg)
    design = fixed_design("hybrid", p1, cfg.Pd_target, cfg)
    hat, se = mc_outage(design, cfg, corr, McSpec(n_realizations=400_000, seed=9))
    closed = outage_hybrid(model, cfg.Pd_target, cfg.P_peak, p1)
    # the closed form overestimates at low busy-branch power, so the design
    # is conservative: the realized outage sits below the budget
    assert hat <= closed + 3 * se
    assert abs(hat - closed) <= 3 * se + 0.25 * closed


def test_mc_conditional_rate_whole_frame_sensing(cfg, corr):
    design = fixed_design("hybrid", 2.0, cfg.Pd_target, cfg, tau=cfg.T)
    h_ss = sample_channels(corr, cfg.sigma0_sq, [10]).h_ss
    rate, se = mc_conditional_rate(design, h_ss, cfg, corr, 100, seeded_rng(11))
    assert rate == pytest.approx(0.0, abs=1e-12)


def test_mc_conditional_rate_idle_collapse(corr):
    # idle primary and a no-false-alarm threshold leave one clean branch
    cfg = SystemConfig(P1_prior=0.0)
    tau = 1e-3
    design = fixed_design("interweave", cfg.P_peak, 0.0, cfg, tau=tau,
                          eps=5.0 * cfg.N00)
    h_ss = sample_channels(corr, cfg.sigma0_sq, [12]).h_ss
    design = DesignSolution(
        mode="interweave", P1_star=cfg.P_peak, tau_star=tau, eps_star=5.0 * cfg.N00,
        w1_star=design.w1_star, objective=0.0, objective_exact=0.0, trace=(0.0,),
        constraint_report=design.constraint_report)
    rate, _ = mc_conditional_rate(design, h_ss, cfg, corr, 200, seeded_rng(13))
    theta = (cfg.T - tau) / cfg.T
    expected = theta * math.log2(1 + cfg.P_peak * np.vdot(h_ss, h_ss).real / cfg.N0s)
    assert rate == pytest.approx(expected, rel=1e-12)


def test_mc_conditional_rate_matches_exact_formula(cfg, corr, model):
    from hybridcr import solve_power
    ctx_draw = sample_channels(corr, cfg.sigma0_sq, [14])
    ctx = make_rate_context(ctx_draw, corr, cfg)
    sol = alternating_optimize(ctx, cfg, model)
    rate, se = mc_conditional_rate(sol, ctx_draw.h_ss, cfg, corr, 200_000,
                                   seeded_rng(15))
    # exact objective sits below the sampled mean by the idle-branch Jensen gap
    assert sol.objective_exact <= rate + 3 * se
    assert rate - sol.objective_exact < 0.25


def test_mc_secondary_rate_fixed_vs_callable(cfg, corr, model):
    spec = McSpec(n_realizations=40, n_inner=100, seed=16)
    design = fixed_design("interweave", cfg.P_peak, 0.9, cfg)
    rate_fixed, se = mc_secondary_rate("interweave", design, cfg, corr, spec)
    assert np.isfinite(rate_fixed) and se > 0

    def designer(h_ss, rng):
        return optimize_interweave(make_rate_context(h_ss, corr, cfg), cfg, model)

    rate_opt, _ = mc_secondary_rate("interweave", designer, cfg, corr, spec)
    assert rate_opt > 0
    with pytest.raises(ValueError):
        mc_secondary_rate("hybrid", design, cfg, corr, spec)


def test_mc_estimates_deterministic(cfg, corr):
    spec = McSpec(n_realizations=5000, seed=17)
    design = fixed_design("hybrid", 2.0, cfg.Pd_target, cfg)
    a = mc_outage(design, cfg, corr, spec)
    b = mc_outage(design, cfg, corr, spec)
    assert a == b
    ed1 = mc_ed_probabilities(500, 1.05, cfg, McSpec(n_realizations=3000, seed=18))
    ed2 = mc_ed_probabilities(500, 1.05, cfg, McSpec(n_realizations=3000, seed=18))
    assert ed1 == ed2


def test_mc_spec_validation():
    with pytest.raises(ValueError):
        McSpec(n_realizations=0)
    with pytest.raises(ValueError):
        McSpec(n_inner=0)
