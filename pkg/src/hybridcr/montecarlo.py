"""Brute-force Monte Carlo ground truth for the closed forms and for
end-to-end system throughput.

Per-realization generators derive from (master seed, realization index), so
estimates are identical however the work is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Tuple, Union

import numpy as np

from .channel import CorrelationSet, complex_normal, matrix_sqrt, seeded_rng
from .config import SystemConfig
from .design import DesignSolution
from .sensing import frame_coefficients

_CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class McSpec:
    """Sample counts and seeding for the Monte Carlo oracles."""

    n_realizations: int = 2500
    n_inner: int = 400
    seed: int = 0
    report_se: bool = True

    def __post_init__(self) -> None:
        if self.n_realizations < 1 or self.n_inner < 1:
            raise ValueError("Monte Carlo sample counts must be >= 1")


class EdEstimate(NamedTuple):
    pf_hat: float
    pd_hat: float
    pf_se: float
    pd_se: float


def _proportion_se(p: float, n: int) -> float:
    return float(np.sqrt(max(p * (1.0 - p), 0.0) / n))


def mc_ed_probabilities(n_samples: int, epsilon: float, cfg: SystemConfig,
                        spec: McSpec, hypotheses: str = "both") -> EdEstimate:
    """Sample-level energy detection under both hypotheses.

    The busy hypothesis redraws the sensing channel once per realization
    (the channel holds for a whole sensing slot) and the detector compares
    the per-slot average energy against the threshold. ``hypotheses`` limits
    the simulation to "idle" or "busy" when only one side is needed; the
    skipped side reports NaN.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample per sensing slot")
    if hypotheses not in ("both", "idle", "busy"):
        raise ValueError(f"unknown hypotheses selector {hypotheses!r}")
    n_real = spec.n_realizations
    rng = seeded_rng(spec.seed, 0xED)
    chunk = max(1, _CHUNK_ELEMENTS // n_samples)
    false_alarms = 0
    detections = 0
    done = 0
    while done < n_real:
        b = min(chunk, n_real - done)
        if hypotheses in ("both", "idle"):
            noise = np.sqrt(cfg.N00) * complex_normal(rng, b, n_samples)
            t0 = np.mean(np.abs(noise) ** 2, axis=1)
            false_alarms += int((t0 > epsilon).sum())
        if hypotheses in ("both", "busy"):
            h0 = np.sqrt(cfg.sigma0_sq) * complex_normal(rng, b)
            symbols = complex_normal(rng, b, n_samples)
            noise = np.sqrt(cfg.N00) * complex_normal(rng, b, n_samples)
            received = np.sqrt(cfg.P_p) * h0[:, None] * symbols + noise
            t1 = np.mean(np.abs(received) ** 2, axis=1)
            detections += int((t1 > epsilon).sum())
        done += b
    pf = false_alarms / n_real if hypotheses != "busy" else float("nan")
    pd = detections / n_real if hypotheses != "idle" else float("nan")
    pf_se = _proportion_se(pf, n_real) if hypotheses != "busy" else float("nan")
    pd_se = _proportion_se(pd, n_real) if hypotheses != "idle" else float("nan")
    return EdEstimate(pf, pd, pf_se, pd_se)


def mc_lambda_bar(r_pp: np.ndarray, r_sp: np.ndarray,
                  spec: McSpec) -> Tuple[float, float]:
    """Sample mean of the interference-gain ratio h^H R_sp h / ||h||^2."""
    rng = seeded_rng(spec.seed, 0x1A)
    root = matrix_sqrt(r_pp)
    m = root.shape[0]
    n = spec.n_realizations
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n:
        b = min(max(1, _CHUNK_ELEMENTS // m), n - done)
        h = complex_normal(rng, b, m) @ root.T
        num = np.einsum("ij,jk,ik->i", h.conj(), r_sp, h).real
        den = np.einsum("ij,ij->i", h.conj(), h).real
        ratio = num / den
        total += float(ratio.sum())
        total_sq += float((ratio ** 2).sum())
        done += b
    mean = total / n
    var = max(total_sq / n - mean ** 2, 0.0)
    return mean, float(np.sqrt(var / n))


def _decision_powers(design: DesignSolution, cfg: SystemConfig,
                     busy_decision: np.ndarray) -> np.ndarray:
    """Secondary transmit power seen by the primary, per realization."""
    if design.mode == "hybrid":
        return np.where(busy_decision, design.P1_star, cfg.P_peak)
    if design.mode == "interweave":
        return np.where(busy_decision, 0.0, cfg.P_peak)
    if design.mode == "underlay":
        return np.full(busy_decision.shape, design.P1_star)
    raise ValueError(f"unknown system mode {design.mode!r}")


def mc_outage(design: DesignSolution, cfg: SystemConfig, corr: CorrelationSet,
              spec: McSpec) -> Tuple[float, float]:
    """Empirical primary outage probability under the given design.

    Simulates the primary SINR with MRC reception, mixing the idle/busy
    detector branches by a Bernoulli draw with the design's detection
    probability; the primary is taken active throughout.
    """
    rng = seeded_rng(spec.seed, 0x0A)
    root_pp = matrix_sqrt(corr.R_pp)
    root_sp = matrix_sqrt(corr.R_sp)
    m = corr.M
    n = spec.n_realizations
    p_d = design.constraint_report.p_d
    outages = 0
    done = 0
    while done < n:
        b = min(max(1, _CHUNK_ELEMENTS // m), n - done)
        h_pp = complex_normal(rng, b, m) @ root_pp.T
        h_sp = complex_normal(rng, b, m) @ root_sp.T
        gain = np.einsum("ij,ij->i", h_pp.conj(), h_pp).real
        cross = np.abs(np.einsum("ij,ij->i", h_pp.conj(), h_sp)) ** 2 / gain
        busy_decision = rng.random(b) < p_d
        power = _decision_powers(design, cfg, busy_decision)
        sinr = cfg.P_p * gain / (cfg.N0p + power * cross)
        outages += int((sinr < cfg.gamma0).sum())
        done += b
    p = outages / n
    return p, _proportion_se(p, n)


def _branch_weights(design: DesignSolution, cfg: SystemConfig):
    """(alpha0, beta0, alpha1, beta1) frame weights realized by a design."""
    if design.mode == "hybrid":
        return frame_coefficients(design.tau_star, design.eps_star, cfg)
    if design.mode == "interweave":
        a0, b0, _, _ = frame_coefficients(design.tau_star, design.eps_star, cfg)
        return a0, b0, 0.0, 0.0
    if design.mode == "underlay":
        return 0.0, 0.0, cfg.P0_prior, cfg.P1_prior
    raise ValueError(f"unknown system mode {design.mode!r}")


def mc_conditional_rate(design: DesignSolution, h_ss: np.ndarray,
                        cfg: SystemConfig, corr: CorrelationSet,
                        n_inner: int, rng) -> Tuple[float, float]:
    """Average secondary rate for one direct-channel draw, over the
    interfering channel only (the conditioning of the rate lemmas)."""
    rng = seeded_rng(rng)
    a0, b0, a1, b1 = _branch_weights(design, cfg)
    nrm = np.linalg.norm(h_ss)
    w0 = h_ss / nrm if nrm > 0 else None
    w1 = design.w1_star
    p0_pow, p1_pow = cfg.P_peak, design.P1_star
    deterministic = 0.0
    if w0 is not None and a0 > 0.0:
        deterministic += a0 * np.log2(1.0 + p0_pow * abs(np.vdot(w0, h_ss)) ** 2 / cfg.N0s)
    if a1 > 0.0:
        deterministic += a1 * np.log2(1.0 + p1_pow * abs(np.vdot(w1, h_ss)) ** 2 / cfg.N0s)
    if (b0 <= 0.0 or w0 is None) and b1 <= 0.0:
        return float(deterministic), 0.0
    h_ps = complex_normal(rng, n_inner, corr.M) @ matrix_sqrt(corr.R_ps).T
    samples = np.zeros(n_inner)
    if b0 > 0.0 and w0 is not None:
        interference = cfg.P_p * np.abs(h_ps @ w0.conj()) ** 2
        samples += b0 * np.log2(1.0 + p0_pow * abs(np.vdot(w0, h_ss)) ** 2
                                / (cfg.N0s + interference))
    if b1 > 0.0:
        interference = cfg.P_p * np.abs(h_ps @ w1.conj()) ** 2
        samples += b1 * np.log2(1.0 + p1_pow * abs(np.vdot(w1, h_ss)) ** 2
                                / (cfg.N0s + interference))
    mean = float(deterministic + samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(n_inner)) if n_inner > 1 else 0.0
    return mean, se


Designer = Union[DesignSolution, Callable[[np.ndarray, np.random.Generator], DesignSolution]]


def mc_secondary_rate(system_mode: str, designer: Designer, cfg: SystemConfig,
                      corr: CorrelationSet, spec: McSpec) -> Tuple[float, float]:
    """End-to-end average secondary rate over all channels.

    ``designer`` is either a fixed design or a callable producing the
    per-draw design from the direct channel (the per-frame optimization).
    The returned standard error is over the outer channel draws.
    """
    root_ss = matrix_sqrt(corr.R_ss)
    values = np.empty(spec.n_realizations)
    for i in range(spec.n_realizations):
        rng = seeded_rng(spec.seed, i)
        h_ss = root_ss @ complex_normal(rng, corr.M)
        if callable(designer):
            design = designer(h_ss, seeded_rng(spec.seed, i, 7))
        else:
            design = designer
        if design.mode != system_mode:
            raise ValueError(f"designer produced mode {design.mode!r}, "
                             f"expected {system_mode!r}")
        values[i], _ = mc_conditional_rate(design, h_ss, cfg, corr,
                                           spec.n_inner, seeded_rng(spec.seed, i, 8))
    mean = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(spec.n_realizations)) \
        if spec.n_realizations > 1 else 0.0
    return mean, se
