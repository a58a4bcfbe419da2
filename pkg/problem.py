import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import roots_legendre

from graphs import (FracDNLError, ScalarGraph, beta_q, check_graph, minimal_section,
                    regularized_potential, regularized_slope, yosida)
from kernels import SoninePair, check_pair, verify_sonine
from spectral import Domain, Eigenbasis, eigenpairs, inner, lp_norm, project

logger = logging.getLogger(__name__)

NodalField = Callable[[np.ndarray], np.ndarray]
Forcing = Callable[[np.ndarray, float, np.ndarray], np.ndarray]

JUMP_TOL = 1e-12
MEMBERSHIP_TOL = 1e-10
_SAMPLES = 64
_MAX_NODE_SAMPLES = 16
_LEGENDRE_ORDER = 64


class ProblemSpecError(FracDNLError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """d_t^theta(alpha(u) - alpha(u0)) - Laplace u + beta(u) contains g(x, t, u)."""
    name: str
    domain: Domain
    T: float
    pair: SoninePair
    alpha: ScalarGraph
    beta: ScalarGraph
    g: Forcing = field(repr=False)
    lambda_g: float
    q: float
    u0: NodalField = field(repr=False)
    v0: Optional[NodalField] = field(default=None, repr=False)
    g_slope: Optional[Forcing] = field(default=None, repr=False)
    labels: Tuple[Tuple[str, str], ...] = ()

    @property
    def theta(self) -> float:
        return self.pair.theta

    def initial_fields(self, nodes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u0 = np.asarray(self.u0(nodes), dtype=float)
        if self.v0 is None:
            v0 = np.asarray(minimal_section(self.alpha, u0), dtype=float)
        else:
            v0 = np.asarray(self.v0(nodes), dtype=float)
        return u0, v0

    def describe(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "domain": self.domain.describe(),
            "T": self.T,
            "pair": self.pair.describe(),
            "alpha": self.alpha.describe(),
            "beta": self.beta.describe(),
            "lambda_g": self.lambda_g,
            "q": self.q,
            **{k: v for k, v in self.labels},
        }


@dataclass(frozen=True)
class Violation:
    severity: str  # "error" | "warning"
    code: str
    message: str

    def to_dict(self) -> Dict[str, str]:
        return {"severity": self.severity, "code": self.code, "message": self.message}


def has_errors(violations: List[Violation]) -> bool:
    return any(v.severity == "error" for v in violations)


def _sample_forcing(spec: ProblemSpec, nodes: np.ndarray, R: float) -> List[Violation]:
    out: List[Violation] = []
    pick = np.unique(np.linspace(0, nodes.shape[0] - 1, min(_MAX_NODE_SAMPLES, nodes.shape[0])).astype(int))
    xs = nodes[pick]
    u = np.linspace(-R, R, _SAMPLES)
    du = u[1] - u[0]
    x_rep = np.repeat(xs, _SAMPLES, axis=0)
    u_rep = np.tile(u, len(pick))
    lip_slack = spec.lambda_g * (1.0 + 1e-6) + 1e-12
    worst_lip, worst_growth = 0.0, 0.0
    for t in np.linspace(0.0, spec.T, _SAMPLES):
        vals = np.asarray(spec.g(x_rep, float(t), u_rep), dtype=float).reshape(len(pick), _SAMPLES)
        if not np.all(np.isfinite(vals)):
            out.append(Violation("error", "g_not_finite", f"g is not finite at t={t:g}"))
            return out
        worst_lip = max(worst_lip, float(np.max(np.abs(np.diff(vals, axis=1)))) / du)
        growth = np.abs(vals) / (1.0 + np.abs(u)[None, :] ** (2.0 / spec.q))
        worst_growth = max(worst_growth, float(growth.max()))
    if worst_lip > lip_slack:
        out.append(Violation("error", "g_lipschitz",
                             f"sampled Lipschitz constant {worst_lip:.6g} exceeds declared {spec.lambda_g:g}"))
    if worst_growth > lip_slack:
        out.append(Violation("error", "g_growth",
                             f"|g| / (1 + |u|^(2/q)) reaches {worst_growth:.6g} > {spec.lambda_g:g}"))
    return out


def validate(spec: ProblemSpec, basis: Optional[Eigenbasis] = None) -> List[Violation]:
    """Sampled assumption checks; returns violations and never raises."""
    out: List[Violation] = []
    if not spec.T > 0:
        out.append(Violation("error", "horizon", f"T must be positive, got {spec.T}"))
    if not spec.q > 2:
        out.append(Violation("error", "q_range", f"q must exceed 2, got {spec.q}"))
    if spec.lambda_g < 0:
        out.append(Violation("error", "lambda_g", f"Lambda_g must be nonnegative, got {spec.lambda_g}"))
    if out:
        return out

    grid = np.linspace(spec.T / 64, spec.T, 64)
    dev = verify_sonine(spec.pair, grid)
    if dev > 1e-8:
        out.append(Violation("error", "sonine", f"ell * kappa deviates from 1 by {dev:.3e}"))
    for p in check_pair(spec.pair, spec.T):
        out.append(Violation("error", "kernel", p))

    for label, graph in (("alpha", spec.alpha), ("beta", spec.beta)):
        for p in check_graph(graph):
            out.append(Violation("error", f"{label}_graph", p))
    if not spec.alpha.strictly_convex:
        out.append(Violation("warning", "alpha_not_strictly_convex",
                             f"potential of alpha ({spec.alpha.name}) is not strictly convex"))

    basis = basis if basis is not None else eigenpairs(spec.domain, 8)
    try:
        u0, v0 = spec.initial_fields(basis.nodes)
    except FracDNLError as exc:
        out.append(Violation("error", "initial_data", str(exc)))
        return out

    lo, hi = spec.alpha.bounds(u0)
    bad = np.isnan(lo) | (v0 < lo - MEMBERSHIP_TOL) | (v0 > hi + MEMBERSHIP_TOL)
    if bad.any():
        out.append(Violation("error", "v0_not_in_alpha",
                             f"v0 not in alpha(u0) at {int(bad.sum())} of {bad.size} nodes"))

    p = 2.0 * spec.q - 2.0
    try:
        b0 = np.asarray(minimal_section(spec.beta, u0))
        for name, f in (("beta0_u0", b0), ("v0", v0)):
            if not math.isfinite(lp_norm(basis, f, p)):
                out.append(Violation("error", f"{name}_norm", f"{name} has no finite L^{p:g} norm"))
    except FracDNLError as exc:
        out.append(Violation("error", "u0_domain", str(exc)))

    R = max(10.0, 2.0 * float(np.max(np.abs(u0))) if u0.size else 10.0)
    out.extend(_sample_forcing(spec, basis.nodes, R))

    for v in out:
        log = logger.warning if v.severity == "warning" else logger.error
        log("%s: %s", v.code, v.message)
    return out


# --- Initial data ---

def regularize_initial(spec: ProblemSpec, eps: float, nodes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """u0e = u0 + eps*v0 on jump nodes of alpha, else u0; v0e = alpha_eps(u0e)."""
    if not 0.0 < eps < 1.0:
        raise ProblemSpecError(f"eps must lie in (0, 1), got {eps}")
    u0, v0 = spec.initial_fields(nodes)
    lo, _ = spec.alpha.bounds(u0)
    if np.isnan(lo).any():
        raise ProblemSpecError("u0 leaves D(alpha)")
    on_jump = np.zeros(u0.shape, dtype=bool)
    for s in spec.alpha.jump_points:
        on_jump |= np.abs(u0 - s) <= JUMP_TOL
    u0e = np.where(on_jump, u0 + eps * v0, u0)
    v0e = np.asarray(yosida(spec.alpha, eps, u0e), dtype=float)
    return u0e, v0e


@dataclass(frozen=True, eq=False)
class RegularizedInit:
    eps: float
    nu: float
    u0: np.ndarray = field(repr=False)
    v0: np.ndarray = field(repr=False)
    u0e: np.ndarray = field(repr=False)
    v0e: np.ndarray = field(repr=False)
    v0ne: np.ndarray = field(repr=False)
    z0: np.ndarray = field(repr=False)
    initial_potential: float = 0.0
    pairing_bound: float = 0.0
    pairing_uniform: float = 0.0
    beta_q_energy: float = 0.0
    beta_q_bound: float = 0.0

    def records(self) -> Dict[str, float]:
        return {
            "initial_potential": self.initial_potential,
            "pairing_bound": self.pairing_bound,
            "pairing_uniform": self.pairing_uniform,
            "beta_q_energy": self.beta_q_energy,
            "beta_q_bound": self.beta_q_bound,
        }


def _beta_q_eta_potential(spec: ProblemSpec, eps: float, nu: float, u0e: np.ndarray) -> np.ndarray:
    """Nodal values of int_0^{v0ne} beta_eq(eta(s)) ds = int_0^{u0e} beta_eq(r) alpha'(r) dr."""
    x, w = roots_legendre(_LEGENDRE_ORDER)
    r = 0.5 * (x[None, :] + 1.0) * u0e[:, None]
    vals = (np.asarray(beta_q(spec.beta, eps, spec.q, r))
            * np.asarray(regularized_slope(spec.alpha, nu, eps, r)))
    return 0.5 * u0e * (vals @ w)


def build_regularized(spec: ProblemSpec, eps: float, nu: float, basis: Eigenbasis) -> RegularizedInit:
    """Regularised initial data, its Galerkin projection and the initial-data bounds."""
    if nu < 0:
        raise ProblemSpecError(f"nu must be nonnegative, got {nu}")
    u0, v0 = spec.initial_fields(basis.nodes)
    u0e, v0e = regularize_initial(spec, eps, basis.nodes)
    v0ne = nu * u0e + v0e
    z0 = project(basis, v0ne)

    # Fenchel identity at (u0e, v0ne)
    eta_hat = v0ne * u0e - np.asarray(regularized_potential(spec.alpha, nu, eps, u0e))
    initial_potential = float(np.sum(basis.weights * eta_hat))

    nu0e, nv0e = h_norm_nodal(basis, u0e), h_norm_nodal(basis, v0e)
    nu0, nv0 = h_norm_nodal(basis, u0), h_norm_nodal(basis, v0)
    pairing = nu * nu0e ** 2 + abs(inner(basis, u0e, v0e))
    pairing_uniform = 2.0 * nu * nu0 ** 2 + nu0 * nv0 + (2.0 * nu * eps + 1.0) * eps * nv0 ** 2

    p = 2.0 * spec.q - 2.0
    beta0 = np.asarray(minimal_section(spec.beta, u0))
    c_tilde = 2.0 ** (spec.q - 1.5) * (lp_norm(basis, beta0, p) ** (spec.q - 1.0)
                                        + lp_norm(basis, v0, p) ** (spec.q - 1.0))
    beta_energy = float(np.sum(basis.weights * _beta_q_eta_potential(spec, eps, nu, u0e)))

    init = RegularizedInit(
        eps=eps, nu=nu, u0=u0, v0=v0, u0e=u0e, v0e=v0e, v0ne=v0ne, z0=z0,
        initial_potential=initial_potential,
        pairing_bound=pairing,
        pairing_uniform=pairing_uniform,
        beta_q_energy=beta_energy,
        beta_q_bound=c_tilde * (nu * nu0e + nv0e),
    )
    logger.debug("regularised initial data: %s", init.records())
    return init


def h_norm_nodal(basis: Eigenbasis, f) -> float:
    return lp_norm(basis, f, 2.0)


# --- Constants ---

@dataclass(frozen=True)
class Constants:
    c_V: float
    C_G: float
    measure: float
    tau_window: Optional[float] = None
    windows: Optional[int] = None
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, object]:
        return {
            "c_V": self.c_V,
            "C_G": self.C_G,
            "measure": self.measure,
            "tau_window": self.tau_window,
            "windows": self.windows,
            "notes": list(self.notes),
        }


def growth_constant(c_V: float, lambda_g: float, q: float, measure: float) -> float:
    """C_G in (G(u), u) <= |u|^2 / (2 c_V^2) + C_G."""
    if lambda_g == 0.0:
        return 0.0
    first = c_V ** 2 * lambda_g ** 2 * measure
    second = ((q - 2.0) / (2.0 * q) * lambda_g ** (2.0 * q / (q - 2.0))
              * (q / (2.0 * (2.0 + q) * c_V ** 2)) ** (-(q + 2.0) / (q - 2.0)) * measure)
    return first + second


def window_length(pair: SoninePair, target: float) -> float:
    """Largest tau with ||ell||_{L1(0, tau)} = target."""
    p = pair.ell_exp + 1.0
    return (p * target / pair.ell_coef) ** (1.0 / p)


def constants(spec: ProblemSpec, basis: Eigenbasis) -> Constants:
    c_V = basis.c_V
    measure = spec.domain.measure
    C_G = growth_constant(c_V, spec.lambda_g, spec.q, measure)
    C_alpha = spec.alpha.strong_monotonicity
    L_beta = spec.beta.lipschitz
    notes: List[str] = []
    if not C_alpha or L_beta is None:
        notes.append("uniqueness window needs strongly monotone alpha and Lipschitz beta")
        return Constants(c_V, C_G, measure, notes=tuple(notes))
    denom = math.sqrt(2.0) * (L_beta + spec.lambda_g)
    if denom == 0.0:
        notes.append("Lambda_beta + Lambda_g = 0: a single window covers (0, T)")
        return Constants(c_V, C_G, measure, math.inf, 1, tuple(notes))
    tau = window_length(spec.pair, C_alpha / denom)
    windows = max(1, math.ceil(spec.T / tau - 1e-12))
    return Constants(c_V, C_G, measure, tau, windows, tuple(notes))
