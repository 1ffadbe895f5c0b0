"""Conditional ergodic-rate terms of the secondary link for both sensing outcomes.

All internal math is in nats; conversion to bits happens only at the
objective boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Tuple

import numpy as np

from .channel import ChannelDraw, CorrelationSet
from .config import SystemConfig
from .numerics import EULER_GAMMA, exp_e1
from .sensing import SensingDesign

LN2 = math.log(2.0)


@dataclass(frozen=True)
class RateContext:
    """Everything the conditional rate terms need for one channel draw."""

    h_ss: np.ndarray
    R_ps: np.ndarray
    rho_inr_s: float
    N0s: float
    P_peak: float
    w1: np.ndarray | None = None     # unit receive beamformer for the busy branch
    P1: float | None = None          # secondary power for the busy branch

    def __post_init__(self) -> None:
        if self.rho_inr_s <= 0.0:
            raise ValueError("interference-to-noise ratio must be positive")
        if self.w1 is not None:
            nrm = np.linalg.norm(self.w1)
            if abs(nrm - 1.0) > 1e-12:
                raise ValueError(f"busy-branch beamformer must be unit norm, ||w||={nrm}")

    def with_design(self, w1: np.ndarray, p1: float) -> "RateContext":
        return replace(self, w1=w1, P1=p1)


def make_rate_context(draw: ChannelDraw | np.ndarray, corr: CorrelationSet,
                      cfg: SystemConfig, w1: np.ndarray | None = None,
                      p1: float | None = None) -> RateContext:
    h_ss = draw.h_ss if isinstance(draw, ChannelDraw) else np.asarray(draw)
    return RateContext(h_ss=h_ss, R_ps=np.asarray(corr.R_ps),
                       rho_inr_s=cfg.rho_inr_s, N0s=cfg.N0s,
                       P_peak=cfg.P_peak, w1=w1, P1=p1)


class Case0Rates(NamedTuple):
    c00: float          # idle truth, idle decision [nats]
    c01: float          # busy truth, idle decision, interference averaged [nats]
    weighted_bits: float


def rate_case0_bound(ctx: RateContext, alpha0: float, beta0: float) -> Case0Rates:
    """Idle-decision branch rates under MRC at peak power.

    The interference term lower-bounds the conditional mean via Jensen with
    the busy-link covariance; the weighted form applies the supplied frame
    coefficients and converts to bits.
    """
    norm_sq = float(np.vdot(ctx.h_ss, ctx.h_ss).real)
    if norm_sq == 0.0:
        return Case0Rates(0.0, 0.0, 0.0)
    c00 = math.log1p(ctx.P_peak * norm_sq / ctx.N0s)
    mean_gain = float((ctx.h_ss.conj() @ ctx.R_ps @ ctx.h_ss).real) / norm_sq
    interference = ctx.rho_inr_s * ctx.N0s * mean_gain
    c01 = math.log1p(ctx.P_peak * norm_sq / (ctx.N0s + interference))
    return Case0Rates(c00, c01, (alpha0 * c00 + beta0 * c01) / LN2)


def _case1_terms(signal_gain: float, interference_mean: float) -> Tuple[float, float, float, float]:
    """(c10, c11, d10, d11) from the busy-branch signal and interference scalars.

    ``signal_gain`` is P1 |w^H h_ss|^2 / N0s and ``interference_mean`` the mean
    of the exponentially distributed normalized interference power.
    """
    c10 = math.log1p(signal_gain)
    if interference_mean <= 0.0:
        return c10, c10, c10, c10
    a = (1.0 + signal_gain) / interference_mean
    b = 1.0 / interference_mean
    if signal_gain == 0.0:
        c11 = 0.0
    else:
        c11 = c10 + exp_e1(a) - exp_e1(b)
    d11 = math.log(a) + exp_e1(a) + EULER_GAMMA
    return c10, c11, c10, d11


def _busy_scalars(ctx: RateContext) -> Tuple[float, float]:
    if ctx.w1 is None or ctx.P1 is None:
        raise ValueError("rate context is missing the busy-branch design (w1, P1)")
    signal_gain = ctx.P1 * abs(np.vdot(ctx.w1, ctx.h_ss)) ** 2 / ctx.N0s
    interference_mean = ctx.rho_inr_s * float((ctx.w1.conj() @ ctx.R_ps @ ctx.w1).real)
    return float(signal_gain), interference_mean


def rate_case1_exact(ctx: RateContext) -> Tuple[float, float]:
    """Exact busy-decision branch rates (c10, c11) in nats.

    c11 is the exact conditional mean over the interfering channel, written
    as a difference of two exp(x)E1(x) products; a vanishing beamformed
    interference covariance degenerates it to the no-interference rate.
    """
    signal_gain, interference_mean = _busy_scalars(ctx)
    c10, c11, _, _ = _case1_terms(signal_gain, interference_mean)
    return c10, c11


def rate_case1_highinr(ctx: RateContext) -> Tuple[float, float]:
    """Interference-limited (high INR) busy-branch rates (d10, d11) in nats."""
    signal_gain, interference_mean = _busy_scalars(ctx)
    c10, c11, d10, d11 = _case1_terms(signal_gain, interference_mean)
    if interference_mean <= 0.0:
        return c10, c11
    return d10, d11


def objective_C(ctx: RateContext, sensing: SensingDesign,
                mode: str = "exact") -> float:
    """Conditional average-rate lower bound of the hybrid system in bits/s/Hz.

    ``mode`` selects the exact busy-branch expectation or its high-INR
    surrogate; the idle branch always uses the Jensen-bounded form.
    """
    if mode not in ("exact", "high_inr"):
        raise ValueError(f"unknown objective mode {mode!r}")
    a0, b0, a1, b1 = sensing.coefficients()
    case0 = rate_case0_bound(ctx, a0, b0)
    signal_gain, interference_mean = _busy_scalars(ctx)
    c10, c11, d10, d11 = _case1_terms(signal_gain, interference_mean)
    if mode == "exact":
        busy = a1 * c10 + b1 * c11
    else:
        busy = a1 * d10 + b1 * d11
    return case0.weighted_bits + busy / LN2
