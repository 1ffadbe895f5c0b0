"""Closed-form primary-outage approximations for the three CR operating modes.

The closed forms rest on the mixture-of-exponentials density of the combined
primary channel gain, which requires distinct covariance eigenvalues; a
multiplicative perturbation guard keeps degenerate spectra usable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import CorrelationSet, matrix_sqrt
from .config import SystemConfig
from .numerics import QuadratureSpec, maximize_concave_1d, ratio_quadform_mean

EIGENGAP_REL_TOL = 1e-9


def _partial_fraction_weights(eigs: np.ndarray) -> np.ndarray:
    """Weights 1 / prod_{k != j} (1/eig_k - 1/eig_j) of the gain density."""
    inv = 1.0 / eigs
    diff = inv[:, None] - inv[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=0)


def distinct_eigenvalues(r: np.ndarray) -> tuple[np.ndarray, bool]:
    """Ascending eigenvalues, multiplicatively perturbed if nearly repeated.

    The partial-fraction weights grow like (eig/gap)^(M-1), so the step must
    balance summation cancellation against spectrum bias; eps^(1/M) keeps
    both near eps^(1-1/M) in the worst (fully degenerate) case.
    """
    eigs = np.sort(np.linalg.eigvalsh(np.asarray(r)))
    if eigs[0] <= 0.0:
        raise ValueError("covariance must be positive definite")
    gaps = np.diff(eigs)
    if eigs.size > 1 and gaps.min() / eigs[-1] < EIGENGAP_REL_TOL:
        step = float(np.finfo(float).eps ** (1.0 / eigs.size))
        eigs = eigs * (1.0 + np.arange(1, eigs.size + 1) * step)
        return np.sort(eigs), True
    return eigs, False


def norm_sq_cdf(eigs: np.ndarray, z) -> np.ndarray:
    """CDF of ||h||^2 for h ~ CN(0, R) with the given distinct eigenvalues."""
    eigs = np.asarray(eigs, dtype=float)
    weights = _partial_fraction_weights(eigs)
    z = np.asarray(z, dtype=float)
    terms = eigs * (1.0 - np.exp(-z[..., None] / eigs)) * weights
    return terms.sum(axis=-1) / np.prod(eigs)


@dataclass(frozen=True)
class OutageModel:
    """Precomputed quantities for the closed-form outage expressions."""

    R_pp: np.ndarray
    R_sp: np.ndarray
    eigs_pp: np.ndarray          # ascending, distinct after the guard
    lambda_bar: float            # mean interference-gain ratio
    gamma0: float
    P_p: float
    N0p: float
    perturbed: bool              # True when the eigengap guard fired
    p_min_mono: float            # start of the numerically increasing region
    f_floor: float               # value at p_min_mono

    @property
    def rho_snr_p(self) -> float:
        return self.P_p / self.N0p


def _raw_outage_f(x: float, eigs: np.ndarray, weights: np.ndarray,
                  lam_bar: float, gamma0: float, p_p: float, n0p: float) -> float:
    if x <= 0.0:
        raise ValueError("secondary interference power must be positive")
    terms = eigs * gamma0 * lam_bar * x / (p_p * eigs + gamma0 * x * lam_bar)
    total = float(np.dot(terms, weights)) / np.prod(eigs)
    # exp factor overflows as x -> 0; the clamp below absorbs it
    exponent = n0p / (x * lam_bar)
    if exponent > 700.0:
        return np.inf
    return np.exp(exponent) * total


def build_outage_model(corr: CorrelationSet, cfg: SystemConfig,
                       quad: QuadratureSpec | None = None) -> OutageModel:
    """Assemble the outage model from link covariances and system scalars.

    The mean interference-gain ratio is the expectation of
    h^H R_sp h / ||h||^2 over h ~ CN(0, R_pp), evaluated by the exact
    quadratic-form ratio integral.
    """
    eigs, perturbed = distinct_eigenvalues(corr.R_pp)
    root = matrix_sqrt(corr.R_pp)
    lam_bar = ratio_quadform_mean(corr.R_pp, root @ corr.R_sp @ root, quad)
    if lam_bar <= 0.0:
        raise ValueError(f"mean gain ratio must be positive, got {lam_bar}")
    weights = _partial_fraction_weights(eigs)

    def f_of(x: float) -> float:
        return _raw_outage_f(x, eigs, weights, lam_bar, cfg.gamma0, cfg.P_p, cfg.N0p)

    # locate the divergence-free increasing region on (0, P_peak]
    grid = np.geomspace(cfg.P_peak * 1e-6, cfg.P_peak, 200)
    values = np.array([f_of(x) for x in grid])
    k = int(np.argmin(values))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    if hi > lo:
        x_min, neg_min = maximize_concave_1d(lambda x: -f_of(x), lo, hi,
                                             tol=1e-12 * cfg.P_peak)
        f_min = -neg_min
    else:
        x_min, f_min = grid[k], values[k]
    return OutageModel(R_pp=np.asarray(corr.R_pp), R_sp=np.asarray(corr.R_sp),
                       eigs_pp=eigs, lambda_bar=lam_bar, gamma0=cfg.gamma0,
                       P_p=cfg.P_p, N0p=cfg.N0p, perturbed=perturbed,
                       p_min_mono=float(x_min), f_floor=float(f_min))


def outage_F(model: OutageModel, x: float) -> float:
    """Approximate primary outage under secondary interference power x.

    Clamped to [0, 1]; x = 0 returns the interference-free outage instead of
    evaluating the divergent closed form.
    """
    if x < 0.0:
        raise ValueError("interference power must be nonnegative")
    if x == 0.0:
        return outage_G(model)
    weights = _partial_fraction_weights(model.eigs_pp)
    value = _raw_outage_f(x, model.eigs_pp, weights, model.lambda_bar,
                          model.gamma0, model.P_p, model.N0p)
    return float(np.clip(value, 0.0, 1.0))


def outage_G(model: OutageModel) -> float:
    """Exact interference-free primary outage (SNR below threshold)."""
    z = model.gamma0 / model.rho_snr_p
    return float(np.clip(norm_sq_cdf(model.eigs_pp, np.asarray(z)), 0.0, 1.0))


def outage_hybrid(model: OutageModel, p_d: float, p0: float, p1: float) -> float:
    """Hybrid-mode outage: detector misses use power p0, hits use power p1."""
    value = (1.0 - p_d) * outage_F(model, p0) + p_d * outage_F(model, p1)
    return float(np.clip(value, 0.0, 1.0))


def outage_interweave(model: OutageModel, p_d: float, p_peak: float) -> float:
    """Interweave-mode outage: misses interfere at p_peak, hits stay silent."""
    value = (1.0 - p_d) * outage_F(model, p_peak) + p_d * outage_G(model)
    return float(np.clip(value, 0.0, 1.0))


def outage_underlay(model: OutageModel, p_und: float) -> float:
    """Underlay-mode outage: the secondary always transmits at p_und."""
    return outage_F(model, p_und)
