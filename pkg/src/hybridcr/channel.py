"""Covariance construction and correlated Rayleigh channel sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-12
PSD_TOL = -1e-9


def exp_correlation(rho: float, m: int) -> np.ndarray:
    """Exponential antenna correlation matrix with entries rho^|p-q|.

    Parameters
    ----------
    rho : correlation factor in [0, 1].
    m : number of antennas (matrix dimension).
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"correlation factor must lie in [0, 1], got {rho}")
    if m < 1:
        raise ValueError(f"matrix dimension must be >= 1, got {m}")
    idx = np.arange(m)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def matrix_sqrt(r: np.ndarray) -> np.ndarray:
    """Symmetric (Hermitian) PSD square root via eigendecomposition.

    Eigenvalues in [-1e-9, 0) are clamped to zero; anything more negative is
    rejected as not positive semidefinite.
    """
    r = np.asarray(r)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {r.shape}")
    scale = max(1.0, float(np.abs(r).max()))
    if np.abs(r - r.conj().T).max() > HERMITIAN_TOL * scale:
        raise ValueError("matrix is not Hermitian")
    eigvals, eigvecs = np.linalg.eigh(r)
    if eigvals.min() < PSD_TOL * scale:
        raise ValueError(f"matrix is not PSD, min eigenvalue {eigvals.min():.3e}")
    eigvals = np.clip(eigvals, 0.0, None)
    root = (eigvecs * np.sqrt(eigvals)) @ eigvecs.conj().T
    return 0.5 * (root + root.conj().T)


@dataclass(frozen=True)
class CorrelationSet:
    """Covariance matrices of the four SIMO links (TX m -> RX n)."""

    R_pp: np.ndarray
    R_ps: np.ndarray
    R_sp: np.ndarray
    R_ss: np.ndarray

    def __post_init__(self) -> None:
        m = None
        for name in ("R_pp", "R_ps", "R_sp", "R_ss"):
            r = np.asarray(getattr(self, name))
            object.__setattr__(self, name, r)
            if r.ndim != 2 or r.shape[0] != r.shape[1]:
                raise ValueError(f"{name} must be square, got shape {r.shape}")
            if m is None:
                m = r.shape[0]
            elif r.shape[0] != m:
                raise ValueError("all link covariances must share one dimension")
            scale = max(1.0, float(np.abs(r).max()))
            if np.abs(r - r.conj().T).max() > HERMITIAN_TOL * scale:
                raise ValueError(f"{name} is not Hermitian")
            if np.linalg.eigvalsh(r).min() < PSD_TOL * scale:
                raise ValueError(f"{name} is not PSD")

    @property
    def M(self) -> int:
        return self.R_pp.shape[0]


def uniform_correlation_set(rho: float, m: int) -> CorrelationSet:
    """One exponential correlation factor applied to all four links."""
    r = exp_correlation(rho, m)
    return CorrelationSet(R_pp=r, R_ps=r.copy(), R_sp=r.copy(), R_ss=r.copy())


@dataclass(frozen=True)
class ChannelDraw:
    """One joint realization of the four SIMO links and the sensing channel."""

    h_pp: np.ndarray
    h_ps: np.ndarray
    h_sp: np.ndarray
    h_ss: np.ndarray
    h0: complex


def seeded_rng(seed, *indices) -> np.random.Generator:
    """Generator derived from a master seed plus realization indices.

    The (seed, index, ...) entropy tuple makes parallel and serial sweeps
    produce identical streams for the same logical realization.
    """
    if isinstance(seed, np.random.Generator):
        if indices:
            raise ValueError("cannot re-index an existing Generator")
        return seed
    if isinstance(seed, (tuple, list)):
        entropy = list(seed) + list(indices)
    else:
        entropy = [seed, *indices]
    return np.random.default_rng(entropy)


def complex_normal(rng: np.random.Generator, *shape) -> np.ndarray:
    """CN(0, 1) samples: real and imaginary parts each of variance 1/2."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(corr: CorrelationSet, sigma0_sq: float, rng_seed) -> ChannelDraw:
    """Draw one ChannelDraw with the declared covariances.

    ``rng_seed`` may be an integer seed, a (seed, index, ...) sequence or a
    Generator. A fixed seed gives a deterministic draw.
    """
    rng = seeded_rng(rng_seed)
    roots = {name: matrix_sqrt(getattr(corr, name))
             for name in ("R_pp", "R_ps", "R_sp", "R_ss")}
    m = corr.M
    vecs = {}
    for name in ("R_pp", "R_ps", "R_sp", "R_ss"):
        vecs[name] = roots[name] @ complex_normal(rng, m)
    h0 = complex(np.sqrt(sigma0_sq) * complex_normal(rng))
    return ChannelDraw(h_pp=vecs["R_pp"], h_ps=vecs["R_ps"],
                       h_sp=vecs["R_sp"], h_ss=vecs["R_ss"], h0=h0)
