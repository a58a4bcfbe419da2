import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
import pandas as pd
from scipy.linalg import toeplitz
from scipy.special import gamma, roots_jacobi

from graphs import FracDNLError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

_JACOBI_NODES = 32
_HISTORY_BLOCK = 64


class KernelParameterError(FracDNLError):
    pass


class ShapeError(FracDNLError):
    pass


@dataclass(frozen=True)
class SoninePair:
    """Power-law kernels ell(t) = c_l t^a_l and kappa(t) = c_k t^a_k."""
    theta: float
    ell_coef: float
    ell_exp: float
    kappa_coef: float
    kappa_exp: float
    kind: str = "riemann_liouville"

    def ell(self, t: ArrayLike) -> ArrayLike:
        return self.ell_coef * np.asarray(t, dtype=float) ** self.ell_exp

    def kappa(self, t: ArrayLike) -> ArrayLike:
        return self.kappa_coef * np.asarray(t, dtype=float) ** self.kappa_exp

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "theta": self.theta,
            "ell": [self.ell_coef, self.ell_exp],
            "kappa": [self.kappa_coef, self.kappa_exp],
        }


@dataclass(frozen=True, eq=False)
class FracWeights:
    """L1 coefficients a_k and diagonal factor b0 on a uniform grid."""
    theta: float
    h: float
    M: int
    a: np.ndarray = field(repr=False)
    b0: float

    @property
    def coefficients(self) -> np.ndarray:
        """b_k = b0 * a_k."""
        return self.b0 * self.a


def rl_pair(theta: float) -> SoninePair:
    """Riemann-Liouville pair of order theta."""
    if not 0.0 < theta < 1.0:
        raise KernelParameterError(f"theta must lie in (0, 1), got {theta}")
    return SoninePair(
        theta=theta,
        ell_coef=1.0 / gamma(theta),
        ell_exp=theta - 1.0,
        kappa_coef=1.0 / gamma(1.0 - theta),
        kappa_exp=-theta,
    )


def power_pair(ell_coef: float, ell_exp: float, kappa_coef: float, kappa_exp: float) -> SoninePair:
    """Custom power-law pair; whether it is Sonine is left to verify_sonine."""
    for name, e in (("ell_exp", ell_exp), ("kappa_exp", kappa_exp)):
        if not -1.0 < e < 0.0:
            raise KernelParameterError(f"{name} must lie in (-1, 0), got {e}")
    if ell_coef <= 0 or kappa_coef <= 0:
        raise KernelParameterError("kernel coefficients must be positive")
    return SoninePair(theta=-kappa_exp, ell_coef=ell_coef, ell_exp=ell_exp,
                      kappa_coef=kappa_coef, kappa_exp=kappa_exp, kind="custom")


def verify_sonine(pair: SoninePair, grid: Sequence[float]) -> float:
    """Max |(ell * kappa)(t) - 1| over grid, by Gauss-Jacobi after s = t*sigma."""
    t = np.asarray(grid, dtype=float)
    if np.any(t <= 0):
        raise KernelParameterError("grid points must be positive")
    al, ak = pair.ell_exp, pair.kappa_exp
    x, w = roots_jacobi(_JACOBI_NODES, al, ak)
    sigma = 0.5 * (1.0 + x)
    scale = 2.0 ** (-(al + ak + 1.0))
    dev = 0.0
    for ti in t:
        # smooth factor left after dividing out the endpoint singularities
        smooth = (pair.ell(ti * (1.0 - sigma)) * pair.kappa(ti * sigma)
                  / ((ti * (1.0 - sigma)) ** al * (ti * sigma) ** ak))
        conv = ti ** (al + ak + 1.0) * scale * float(w @ smooth)
        dev = max(dev, abs(conv - 1.0))
    return dev


def check_pair(pair: SoninePair, T: float = 1.0, points: int = 1000) -> List[str]:
    """Sampled nonnegativity and monotonicity of both kernels on (0, T]."""
    t = np.linspace(T / points, T, points)
    problems = []
    for name, fn in (("ell", pair.ell), ("kappa", pair.kappa)):
        v = np.asarray(fn(t))
        if np.any(v < 0):
            problems.append(f"{name} takes negative values")
        if np.any(np.diff(v) > 1e-14 * np.abs(v[:-1])):
            problems.append(f"{name} is not nonincreasing")
    return problems


def l1_weights(theta: float, h: float, M: int) -> FracWeights:
    """L1 weights a_k = (k+1)^(1-theta) - k^(1-theta), b0 = h^-theta / Gamma(2-theta)."""
    if not 0.0 < theta < 1.0:
        raise KernelParameterError(f"theta must lie in (0, 1), got {theta}")
    if h <= 0 or M < 1:
        raise KernelParameterError(f"need h > 0 and M >= 1 (h={h}, M={M})")
    k = np.arange(M, dtype=float)
    a = (k + 1.0) ** (1.0 - theta) - k ** (1.0 - theta)
    return FracWeights(theta=theta, h=h, M=M, a=a, b0=h ** (-theta) / gamma(2.0 - theta))


def pair_weights(pair: SoninePair, h: float, M: int) -> FracWeights:
    """L1 weights for an arbitrary power kappa; reduces to l1_weights for the RL pair."""
    if h <= 0 or M < 1:
        raise KernelParameterError(f"need h > 0 and M >= 1 (h={h}, M={M})")
    p = pair.kappa_exp + 1.0
    k = np.arange(M, dtype=float)
    a = (k + 1.0) ** p - k ** p
    return FracWeights(theta=pair.theta, h=h, M=M, a=a, b0=pair.kappa_coef * h ** (p - 1.0) / p)


def _as_history(history) -> np.ndarray:
    z = np.asarray(history, dtype=float)
    if z.ndim not in (1, 2):
        raise ShapeError(f"history must be a sequence of scalars or vectors, got shape {z.shape}")
    return z


def frac_derivative_apply(weights: FracWeights, history) -> ArrayLike:
    """D_m(z) = b0 * sum_{j=1}^m a_{m-j} (z_j - z_{j-1}) for history z_0..z_m."""
    z = _as_history(history)
    m = z.shape[0] - 1
    if m < 1 or m > weights.M:
        raise ShapeError(f"history length {m + 1} incompatible with M={weights.M}")
    coeffs = weights.a[:m][::-1]
    out = weights.b0 * np.tensordot(coeffs, np.diff(z, axis=0), axes=(0, 0))
    return float(out) if z.ndim == 1 else out


def history_term(weights: FracWeights, history) -> ArrayLike:
    """Lagged part H_m = b0 * sum_{j=1}^{m-1} a_{m-j} dz_j, given z_0..z_{m-1}."""
    z = _as_history(history)
    m = z.shape[0]
    if m < 1 or m > weights.M:
        raise ShapeError(f"history length {m} incompatible with M={weights.M}")
    if m == 1:
        return 0.0 if z.ndim == 1 else np.zeros(z.shape[1])
    coeffs = weights.a[1:m][::-1]
    out = weights.b0 * np.tensordot(coeffs, np.diff(z, axis=0), axes=(0, 0))
    return float(out) if z.ndim == 1 else out


def fast_history(weights: FracWeights, history, block: int = _HISTORY_BLOCK) -> np.ndarray:
    """D_1..D_m of one history z_0..z_m at once; row k-1 equals frac_derivative_apply on z_0..z_k.

    Rows are built in blocks of the lower-triangular Toeplitz matrix a_{k-j}.
    """
    z = _as_history(history)
    m = z.shape[0] - 1
    if m < 1 or m > weights.M:
        raise ShapeError(f"history length {m + 1} incompatible with M={weights.M}")
    dz = np.diff(z, axis=0)
    out = np.empty_like(dz)
    for start in range(0, m, block):
        stop = min(start + block, m)
        lag = np.arange(start, stop)[:, None] - np.arange(stop)[None, :]
        T = np.where(lag >= 0, weights.a[np.maximum(lag, 0)], 0.0)
        out[start:stop] = T @ dz[:stop]
    return weights.b0 * out



def ell_cell_weights(pair: SoninePair, h: float, M: int) -> np.ndarray:
    """w_j = integral of ell over [j h, (j+1) h], j = 0..M-1."""
    p = pair.ell_exp + 1.0
    j = np.arange(M, dtype=float)
    return pair.ell_coef * h ** p / p * ((j + 1.0) ** p - j ** p)


def ell_convolve(pair: SoninePair, h: float, values) -> np.ndarray:
    """(ell * f)(t_m) by product integration with f piecewise constant (right endpoint)."""
    f = np.asarray(values, dtype=float)
    M = f.shape[0] - 1
    out = np.zeros_like(f)
    if M < 1:
        return out
    w = ell_cell_weights(pair, h, M)
    T = toeplitz(w, np.zeros(M))
    out[1:] = T @ f[1:]
    return out


def ell_l1(pair: SoninePair, t: ArrayLike) -> ArrayLike:
    """||ell||_{L1(0,t)}."""
    p = pair.ell_exp + 1.0
    return pair.ell_coef * np.asarray(t, dtype=float) ** p / p


def positive_type_form(pair: SoninePair, h: float, u) -> float:
    """h * sum_m <(ell * u)_m, u_m>; nonnegative for positive-type ell."""
    uu = np.asarray(u, dtype=float)
    conv = ell_convolve(pair, h, uu)
    return float(h * np.sum(conv[1:] * uu[1:]))


def young_check(a, b, h: float) -> Tuple[float, float]:
    """(||a*b||_{L2}, ||a||_{L1} ||b||_{L2}) for truncated discrete convolution."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = h * np.convolve(a, b)[: len(b)]
    lhs = math.sqrt(h * float(np.sum(c ** 2)))
    rhs = h * float(np.sum(np.abs(a))) * math.sqrt(h * float(np.sum(b ** 2)))
    return lhs, rhs


def mittag_leffler(z: float, theta: float, tol: float = 1e-12) -> float:
    """E_theta(z) = sum_k z^k / Gamma(theta k + 1), summed in extended precision."""
    if not 0.0 < theta <= 1.0:
        raise KernelParameterError(f"theta must lie in (0, 1], got {theta}")
    z = float(z)
    if z == 0.0:
        return 1.0
    logz = math.log(abs(z))
    # largest term fixes the working precision
    peak, k = 0.0, 0
    while True:
        lt = k * logz - math.lgamma(theta * k + 1.0)
        peak = max(peak, lt)
        if k > 2 and lt < peak and lt < math.log(tol) - 40.0:
            break
        k += 1
    dps = int(peak / math.log(10.0)) + 30
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        total = mpmath.mpf(0)
        for j in range(k + 1):
            total += zz ** j / mpmath.gamma(mpmath.mpf(theta) * j + 1)
        value = float(total)
    logger.debug("mittag_leffler(%g, %g): %d terms at %d digits", z, theta, k + 1, dps)
    return value


def weights_frame(weights: FracWeights) -> pd.DataFrame:
    return pd.DataFrame({"k": np.arange(weights.M), "a_k": weights.a})
