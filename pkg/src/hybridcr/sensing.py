"""Energy-detection statistics and MAC-frame time-fraction coefficients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .config import SystemConfig
from .numerics import q_function, q_inverse


def false_alarm_prob(n_samples: float, epsilon: float, n00: float) -> float:
    """Average false-alarm probability of the energy detector.

    CLT form Q(sqrt(N) (eps/N00 - 1)) over N samples of noise power N00.
    """
    if n_samples <= 0 or n00 <= 0:
        raise ValueError("sample count and noise power must be positive")
    if epsilon < 0:
        raise ValueError("detection threshold must be nonnegative")
    return q_function(np.sqrt(n_samples) * (epsilon / n00 - 1.0))


def detection_prob(n_samples: float, epsilon: float, p_p: float,
                   sigma0_sq: float, n00: float) -> float:
    """Approximate average detection probability of the energy detector.

    Same CLT form with the busy-hypothesis mean power P_p sigma0^2 + N00;
    the fading of the sensing channel is replaced by its average power.
    """
    if n_samples <= 0 or n00 <= 0:
        raise ValueError("sample count and noise power must be positive")
    if epsilon < 0:
        raise ValueError("detection threshold must be nonnegative")
    return q_function(np.sqrt(n_samples) * (epsilon / (p_p * sigma0_sq + n00) - 1.0))


def threshold_for_target(tau: float, cfg: SystemConfig) -> Tuple[float, bool]:
    """Detection threshold meeting the detection-probability target at time tau.

    Returns (epsilon, clamped). For targets above 1/2 the unclamped threshold
    goes negative once tau f_s < Qinv(target)^2; it is then clamped to zero
    and flagged, in which case the achieved detection probability no longer
    equals the target.
    """
    if not 0.0 < tau <= cfg.T:
        raise ValueError(f"sensing time must lie in (0, T], got {tau}")
    n = tau * cfg.f_s
    xi = q_inverse(cfg.Pd_target)
    epsilon = cfg.N00 * (1.0 + cfg.P_p * cfg.sigma0_sq / cfg.N00) * (xi / np.sqrt(n) + 1.0)
    if epsilon < 0.0:
        return 0.0, True
    return float(epsilon), False


def clamp_free_tau(cfg: SystemConfig) -> float:
    """Smallest sensing time for which the target threshold is nonnegative."""
    xi = q_inverse(cfg.Pd_target)
    if xi >= 0.0:
        return 0.0
    return xi * xi / cfg.f_s


def frame_coefficients(tau: float, epsilon: float,
                       cfg: SystemConfig) -> Tuple[float, float, float, float]:
    """Time-fraction weights of the four (truth, decision) frame branches.

    Returns (alpha0, beta0, alpha1, beta1); their sum is (T - tau)/T.
    """
    if not 0.0 < tau <= cfg.T:
        raise ValueError(f"sensing time must lie in (0, T], got {tau}")
    n = tau * cfg.f_s
    p_f = false_alarm_prob(n, epsilon, cfg.N00)
    p_d = detection_prob(n, epsilon, cfg.P_p, cfg.sigma0_sq, cfg.N00)
    theta = (cfg.T - tau) / cfg.T
    p0, p1 = cfg.P0_prior, cfg.P1_prior
    return (theta * p0 * (1.0 - p_f),
            theta * p1 * (1.0 - p_d),
            theta * p0 * p_f,
            theta * p1 * p_d)


@dataclass(frozen=True)
class SensingDesign:
    """A sensing slot (tau, epsilon) with its derived detector statistics."""

    tau: float
    epsilon: float
    n_samples: float
    p_f: float
    p_d: float
    alpha0: float
    beta0: float
    alpha1: float
    beta1: float
    clamped: bool = False

    def coefficients(self) -> Tuple[float, float, float, float]:
        return self.alpha0, self.beta0, self.alpha1, self.beta1


def design_sensing(tau: float, cfg: SystemConfig,
                   epsilon: float | None = None) -> SensingDesign:
    """Build a SensingDesign; epsilon defaults to the detection-target threshold."""
    clamped = False
    if epsilon is None:
        epsilon, clamped = threshold_for_target(tau, cfg)
    n = tau * cfg.f_s
    p_f = false_alarm_prob(n, epsilon, cfg.N00)
    p_d = detection_prob(n, epsilon, cfg.P_p, cfg.sigma0_sq, cfg.N00)
    a0, b0, a1, b1 = frame_coefficients(tau, epsilon, cfg)
    return SensingDesign(tau=tau, epsilon=epsilon, n_samples=n, p_f=p_f, p_d=p_d,
                         alpha0=a0, beta0=b0, alpha1=a1, beta1=b1, clamped=clamped)
