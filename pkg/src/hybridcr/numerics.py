"""Special functions and generic solver primitives.

Everything here is a pure function of its arguments, safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy import integrate
from scipy.linalg import eigh as generalized_eigh
from scipy.special import erfc, erfcinv

EULER_GAMMA = 0.5772156649015329

_SQRT2 = math.sqrt(2.0)
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def q_function(x: float) -> float:
    """Gaussian tail probability Q(x) = P(Z > x) for Z ~ N(0, 1)."""
    if np.isnan(x):
        raise ValueError("q_function requires a finite argument")
    return 0.5 * erfc(x / _SQRT2)


def q_inverse(p: float) -> float:
    """Inverse of q_function on (0, 1); negative for p > 1/2."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"q_inverse requires p in (0, 1), got {p}")
    return _SQRT2 * erfcinv(2.0 * p)


def exp_e1(x: float) -> float:
    """Overflow-safe product exp(x) * E1(x) for x > 0.

    The two factors overflow/underflow separately for x beyond ~700, while
    the product stays in (1/(x+1), 1/x). A power series around zero is used
    for x < 1 and a modified Lentz continued fraction evaluates the product
    directly for x >= 1.
    """
    if not x > 0.0:
        raise ValueError(f"exp_e1 requires x > 0, got {x}")
    if x < 1.0:
        # E1(x) = -gamma - ln(x) + sum_{k>=1} (-1)^(k+1) x^k / (k * k!)
        total = 0.0
        term = 1.0
        for k in range(1, 40):
            term *= -x / k
            contribution = -term / k
            total += contribution
            if abs(contribution) < 1e-18 * max(abs(total), 1e-300):
                break
        return math.exp(x) * (-EULER_GAMMA - math.log(x) + total)
    # continued fraction e^x E1(x) = 1/(x+1 - 1/(x+3 - 4/(x+5 - 9/(...))))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 200):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        if c == 0.0:
            c = tiny
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


def bisect_root(f: Callable[[float], float], lo: float, hi: float,
                tol: float = 1e-12) -> float:
    """Root of a sign-changing scalar function by bisection.

    Stops when |f| <= tol or the bracket width falls below
    tol * max(1, |midpoint|).
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise ValueError(f"endpoints do not bracket a root: f({lo})={flo}, f({hi})={fhi}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) <= tol or (hi - lo) <= tol * max(1.0, abs(mid)):
            return mid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    return 0.5 * (lo + hi)


def maximize_concave_1d(g: Callable[[float], float], lo: float, hi: float,
                        tol: float = 1e-10) -> Tuple[float, float]:
    """Golden-section maximizer of a unimodal function on [lo, hi].

    Returns (argmax, max). The argmax is within tol of the true maximizer
    for concave (or otherwise unimodal) g.
    """
    if lo >= hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    gc, gd = g(c), g(d)
    while (b - a) > tol:
        if gc > gd:
            b, d = d, c
            gd = gc
            c = b - _INV_PHI * (b - a)
            gc = g(c)
        else:
            a, c = c, d
            gc = gd
            d = a + _INV_PHI * (b - a)
            gd = g(d)
    x = 0.5 * (a + b)
    return x, g(x)


def fix_phase(w: np.ndarray) -> np.ndarray:
    """Rotate a complex vector so its largest-magnitude entry is real positive."""
    k = int(np.argmax(np.abs(w)))
    phase = w[k] / abs(w[k]) if w[k] != 0 else 1.0
    return w / phase


def dominant_generalized_eigvec(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Unit vector maximizing the generalized Rayleigh quotient w^H a w / w^H b w.

    ``b`` must be Hermitian positive definite.
    """
    b = np.asarray(b)
    if np.linalg.eigvalsh(b).min() <= 0.0:
        raise ValueError("second matrix of the pencil must be positive definite")
    _, vecs = generalized_eigh(np.asarray(a), b)
    w = vecs[:, -1]
    w = w / np.linalg.norm(w)
    return fix_phase(w)


@dataclass(frozen=True)
class QuadratureSpec:
    """Adaptive quadrature settings for the quadratic-form ratio integral."""

    scheme: str = "adaptive-interval"
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self) -> None:
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("quadrature tolerances must be strictly positive")


def ratio_quadform_mean(a: np.ndarray, b: np.ndarray,
                        quad: QuadratureSpec | None = None) -> float:
    """Mean of (w^H b w) / (w^H a w) over standard complex Gaussian w.

    Evaluates the exact one-dimensional integral
    ``int_0^inf trace(b (I + t a)^-1) / det(I + t a) dt``
    by adaptive quadrature; ``a`` must be Hermitian PD, ``b`` Hermitian PSD.
    """
    quad = quad or QuadratureSpec()
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrices must be square and of equal shape")
    eigs_a = np.linalg.eigvalsh(a)
    if eigs_a.min() <= 0.0:
        raise ValueError("first matrix must be positive definite")
    m = a.shape[0]
    eye = np.eye(m)

    def integrand(t: float) -> float:
        resolvent = np.linalg.inv(eye + t * a)
        det = np.linalg.det(eye + t * a).real
        return float(np.trace(b @ resolvent).real / det)

    value, err = integrate.quad(integrand, 0.0, np.inf,
                                epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                                limit=quad.max_subdivisions)
    if not np.isfinite(value) or err > max(quad.abs_tol, 1e-6 * max(abs(value), 1.0)):
        raise RuntimeError(
            f"quadrature did not converge: value={value}, error estimate={err}")
    return value
