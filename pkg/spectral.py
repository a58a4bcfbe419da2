import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from graphs import FracDNLError, ScalarGraph, regularized, regularized_slope

logger = logging.getLogger(__name__)

_ARMIJO = 1e-4
_MAX_HALVINGS = 30
# Newton steps below this many ulps of |x| cannot move the iterate
_STALL_ULPS = 64
_RELAX_FACTOR = 50


class BasisParameterError(FracDNLError):
    pass


class EtaSolveError(FracDNLError):
    """Inverse of pi_n o alpha_{nu eps} not found within budget."""

    def __init__(self, residuals: List[float]):
        self.residuals = residuals
        last = residuals[-1] if residuals else float("nan")
        super().__init__(f"eta_solve did not converge after {len(residuals)} iterations (residual {last:.3e})")


@dataclass(frozen=True)
class Domain:
    """(0, L) or (0, Lx) x (0, Ly)."""
    lengths: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lengths) not in (1, 2):
            raise BasisParameterError("only intervals and rectangles are supported")
        if any(not L > 0 for L in self.lengths):
            raise BasisParameterError(f"side lengths must be positive, got {self.lengths}")

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))

    def describe(self) -> dict:
        return {"kind": "interval" if self.dim == 1 else "rectangle", "lengths": list(self.lengths)}


def interval(L: float = 1.0) -> Domain:
    return Domain((float(L),))


def rectangle(Lx: float = 1.0, Ly: float = 1.0) -> Domain:
    return Domain((float(Lx), float(Ly)))


@dataclass(frozen=True, eq=False)
class Eigenbasis:
    """H-orthonormal Dirichlet sine modes sampled on a midpoint grid."""
    domain: Domain
    n: int
    lambdas: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    E: np.ndarray = field(repr=False)
    oversample: int = 2

    @property
    def c_V(self) -> float:
        return float(self.lambdas[0] ** -0.5)

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    def describe(self) -> dict:
        return {
            "domain": self.domain.describe(),
            "n": self.n,
            "oversample": self.oversample,
            "nodes": self.node_count,
            "lambda_1": float(self.lambdas[0]),
            "lambda_n": float(self.lambdas[-1]),
        }


def _midpoints(L: float, N: int) -> np.ndarray:
    return (np.arange(N) + 0.5) * L / N


def _sine(L: float, i: np.ndarray, x: np.ndarray) -> np.ndarray:
    return math.sqrt(2.0 / L) * np.sin(np.outer(x, i) * math.pi / L)


def eigenpairs(domain: Domain, n: int, oversample: int = 2) -> Eigenbasis:
    """First n Dirichlet eigenpairs, sorted by (lambda, i, j)."""
    if n < 1:
        raise BasisParameterError(f"n must be >= 1, got {n}")
    if oversample < 1:
        raise BasisParameterError(f"oversample must be >= 1, got {oversample}")

    if domain.dim == 1:
        (L,) = domain.lengths
        idx = np.arange(1, n + 1)
        lambdas = (idx * math.pi / L) ** 2
        N = max(oversample * n, n + 1)
        x = _midpoints(L, N)
        E = _sine(L, idx, x)
        return Eigenbasis(domain, n, lambdas, idx.reshape(-1, 1), x.reshape(-1, 1),
                          np.full(N, L / N), E, oversample)

    Lx, Ly = domain.lengths
    cand = [((i / Lx) ** 2 + (j / Ly) ** 2, i, j) for i in range(1, n + 1) for j in range(1, n + 1)]
    cand.sort()
    chosen = np.array([(i, j) for _, i, j in cand[:n]], dtype=int)
    lambdas = math.pi ** 2 * ((chosen[:, 0] / Lx) ** 2 + (chosen[:, 1] / Ly) ** 2)
    Nx = max(oversample * chosen[:, 0].max(), chosen[:, 0].max() + 1)
    Ny = max(oversample * chosen[:, 1].max(), chosen[:, 1].max() + 1)
    x, y = _midpoints(Lx, Nx), _midpoints(Ly, Ny)
    ex = _sine(Lx, chosen[:, 0], x)
    ey = _sine(Ly, chosen[:, 1], y)
    # node (a, b) -> row a*Ny + b
    E = (ex[:, None, :] * ey[None, :, :]).reshape(Nx * Ny, n)
    X, Y = np.meshgrid(x, y, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    weights = np.full(Nx * Ny, (Lx / Nx) * (Ly / Ny))
    return Eigenbasis(domain, n, lambdas, chosen, nodes, weights, E, oversample)


# --- Transforms ---

def project(basis: Eigenbasis, f) -> np.ndarray:
    """Modal coefficients of pi_n f from nodal values."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != basis.node_count:
        raise BasisParameterError(f"expected {basis.node_count} nodal values, got {f.shape[0]}")
    return basis.E.T @ (basis.weights * f if f.ndim == 1 else basis.weights[:, None] * f)


def synth(basis: Eigenbasis, coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    if c.shape[0] != basis.n:
        raise BasisParameterError(f"expected {basis.n} coefficients, got {c.shape[0]}")
    return basis.E @ c


def apply_A(basis: Eigenbasis, u) -> np.ndarray:
    return basis.lambdas * np.asarray(u, dtype=float)


def nodal_map(basis: Eigenbasis, u, phi: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """pi_n(phi(u)) with phi applied at the quadrature nodes."""
    return project(basis, phi(synth(basis, u)))


def pad(u, n: int) -> np.ndarray:
    """Zero-extend a modal vector to n entries."""
    u = np.asarray(u, dtype=float)
    out = np.zeros(n)
    out[: min(n, u.size)] = u[:n]
    return out


# --- Norms ---

def h_norm(basis: Eigenbasis, u) -> float:
    return float(np.linalg.norm(np.asarray(u, dtype=float)))


def v_norm(basis: Eigenbasis, u) -> float:
    u = np.asarray(u, dtype=float)
    return float(math.sqrt(np.sum(basis.lambdas * u ** 2)))


def vstar_norm(basis: Eigenbasis, u) -> float:
    u = np.asarray(u, dtype=float)
    return float(math.sqrt(np.sum(u ** 2 / basis.lambdas)))


def lp_norm(basis: Eigenbasis, f, p: float = 2.0) -> float:
    """Discrete L^p(Omega) norm of nodal values."""
    f = np.abs(np.asarray(f, dtype=float))
    if math.isinf(p):
        return float(f.max()) if f.size else 0.0
    return float(np.sum(basis.weights * f ** p) ** (1.0 / p))


def inner(basis: Eigenbasis, f, g) -> float:
    return float(np.sum(basis.weights * np.asarray(f, dtype=float) * np.asarray(g, dtype=float)))


# --- Nonlinear solves ---

def damped_newton(fun: Callable[[np.ndarray], np.ndarray],
                  jac: Callable[[np.ndarray], np.ndarray],
                  x0: np.ndarray, tol: float, budget: int) -> Tuple[np.ndarray, List[float], bool]:
    """Newton with Armijo backtracking on the Euclidean residual norm.

    Succeeds when the residual drops below tol, or when the Newton correction is
    already at rounding level of x, so the residual cannot be reduced further.
    """
    x = np.array(x0, dtype=float)
    r = fun(x)
    norm = float(np.linalg.norm(r))
    history = [norm]
    for _ in range(budget):
        if norm <= tol:
            return x, history, True
        try:
            d = np.linalg.solve(jac(x), -r)
        except np.linalg.LinAlgError:
            return x, history, False
        if np.linalg.norm(d) <= _STALL_ULPS * np.finfo(float).eps * (1.0 + np.linalg.norm(x)):
            logger.debug("Newton at rounding level: residual %.3e, step %.3e", norm, np.linalg.norm(d))
            return x, history, True
        s = 1.0
        for _ in range(_MAX_HALVINGS):
            x_new = x + s * d
            r_new = fun(x_new)
            n_new = float(np.linalg.norm(r_new))
            if n_new <= (1.0 - _ARMIJO * s) * norm:
                break
            s *= 0.5
        else:
            return x, history, False
        x, r, norm = x_new, r_new, n_new
        history.append(norm)
    return x, history, norm <= tol


def relaxed_iteration(fun: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, step: float,
                      tol: float, budget: int) -> Tuple[np.ndarray, List[float], bool]:
    """x <- x - step * fun(x); contracts for strongly monotone Lipschitz fun and small step."""
    x = np.array(x0, dtype=float)
    r = fun(x)
    history = [float(np.linalg.norm(r))]
    for _ in range(budget):
        if history[-1] <= tol:
            return x, history, True
        x = x - step * r
        r = fun(x)
        history.append(float(np.linalg.norm(r)))
    return x, history, history[-1] <= tol


def eta_solve(basis: Eigenbasis, z, nu: float, eps: float, alpha: ScalarGraph,
              tol: float = 1e-10, budget: int = 100, guess=None) -> np.ndarray:
    """Modal u with pi_n(alpha_{nu eps}(u)) = z."""
    z = np.asarray(z, dtype=float)
    if not (nu > 0 and eps > 0):
        raise BasisParameterError(f"nu and eps must be positive (nu={nu}, eps={eps})")

    def fun(u):
        return nodal_map(basis, u, lambda r: regularized(alpha, nu, eps, r)) - z

    def jac(u):
        d = regularized_slope(alpha, nu, eps, synth(basis, u))
        return basis.E.T @ ((basis.weights * d)[:, None] * basis.E)

    u0 = np.zeros(basis.n) if guess is None else np.asarray(guess, dtype=float)
    u, history, ok = damped_newton(fun, jac, u0, tol, budget)
    if ok:
        return u
    logger.warning("eta_solve: Newton stalled at %.3e, switching to relaxation", history[-1])
    step = nu / (nu + 1.0 / eps) ** 2
    u, more, ok = relaxed_iteration(fun, u, step, tol, _RELAX_FACTOR * budget)
    history.extend(more[1:])
    if not ok:
        raise EtaSolveError(history)
    return u


def nodal_frame(basis: Eigenbasis, values, name: str = "value") -> pd.DataFrame:
    """Nodal field as a table with x (and y) columns."""
    cols = ["x", "y"][: basis.domain.dim]
    df = pd.DataFrame(basis.nodes, columns=cols)
    df[name] = np.asarray(values, dtype=float)
    return df
