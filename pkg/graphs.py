import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import integrate, optimize
from scipy.special import roots_legendre

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Explicit marker for conjugates that are +inf
INFINITE = math.inf

_ROOT_TOL = 1e-12
_ROOT_BUDGET = 200
_MAX_EXPANSIONS = 64
_JUMP_TOL = 1e-9
_CONJ_R_MAX = 1e8


class FracDNLError(Exception):
    """Base class for every error raised by this package."""


class GraphError(FracDNLError):
    pass


class GraphConstructionError(GraphError):
    pass


class GraphDomainError(GraphError):
    pass


class InvalidAnchorError(GraphError):
    pass


class ResolventError(GraphError):
    """Scalar root solve for (id + eps*gamma)^-1 did not converge."""

    def __init__(self, r: ArrayLike, eps: float, residual: float):
        self.r = r
        self.eps = eps
        self.residual = residual
        super().__init__(f"resolvent did not converge (eps={eps}, residual={residual:.3e})")


@dataclass(frozen=True)
class Branch:
    """Smooth monotone piece of a graph on the closed interval [lo, hi]."""
    lo: float
    hi: float
    value: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    slope: Callable[[np.ndarray], np.ndarray] = field(repr=False)


@dataclass(frozen=True)
class Jump:
    """Multivalued point: gamma(s) = [lower, upper]."""
    s: float
    lower: float
    upper: float


@dataclass(frozen=True)
class ScalarGraph:
    """Maximal monotone graph in R x R stored as explicit branches and jumps."""
    name: str
    branches: Tuple[Branch, ...]
    jumps: Tuple[Jump, ...] = ()
    strong_monotonicity: Optional[float] = None
    lipschitz: Optional[float] = None
    strictly_convex: bool = True
    params: Tuple[Tuple[str, float], ...] = ()
    closed_resolvent: Optional[Callable[[float, np.ndarray], np.ndarray]] = field(default=None, repr=False, compare=False)
    closed_potential: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False, compare=False)
    closed_conjugate: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False, compare=False)

    def bounds(self, r: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """Return the interval gamma(r) as (lower, upper); NaN outside D(gamma)."""
        x = np.asarray(r, dtype=float)
        lower = np.full(x.shape, np.nan)
        upper = np.full(x.shape, np.nan)
        for b in self.branches:
            mask = (x >= b.lo) & (x <= b.hi) & np.isnan(lower)
            if mask.any():
                vals = b.value(x[mask])
                lower[mask] = vals
                upper[mask] = vals
        for j in self.jumps:
            mask = x == j.s
            lower[mask] = j.lower
            upper[mask] = j.upper
        return lower, upper

    def slope_at(self, r: ArrayLike) -> np.ndarray:
        x = np.asarray(r, dtype=float)
        out = np.full(x.shape, np.nan)
        for b in self.branches:
            mask = (x >= b.lo) & (x <= b.hi) & np.isnan(out)
            if mask.any():
                out[mask] = b.slope(x[mask])
        out[_on_jump(self, x)] = np.inf
        return out

    def __call__(self, r: ArrayLike) -> ArrayLike:
        return minimal_section(self, r)

    @property
    def jump_points(self) -> np.ndarray:
        return np.array([j.s for j in self.jumps], dtype=float)

    @property
    def is_normalized(self) -> bool:
        lo, hi = self.bounds(0.0)
        return bool(lo <= 0.0 <= hi)

    def describe(self) -> Dict[str, object]:
        return {"name": self.name, **{k: v for k, v in self.params}}


# --- Helpers ---

def _like(r: ArrayLike, out: np.ndarray) -> ArrayLike:
    if np.ndim(r) == 0:
        return float(out)
    return out


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise GraphError(f"eps must be positive, got {eps}")


def _monotone_root(side: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray,
                   tol: float = _ROOT_TOL, budget: int = _ROOT_BUDGET) -> Tuple[np.ndarray, bool]:
    """Vectorised bisection: side(x) < 0 means x too small, > 0 too big, 0 solved."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(_MAX_EXPANSIONS):
        bad = side(lo) > 0
        if not bad.any():
            break
        lo = np.where(bad, lo - 2.0 * (hi - lo) - 1.0, lo)
    for _ in range(_MAX_EXPANSIONS):
        bad = side(hi) < 0
        if not bad.any():
            break
        hi = np.where(bad, hi + 2.0 * (hi - lo) + 1.0, hi)
    for _ in range(budget):
        mid = 0.5 * (lo + hi)
        s = side(mid)
        lo = np.where(s < 0, mid, lo)
        hi = np.where(s > 0, mid, hi)
        hit = s == 0
        lo = np.where(hit, mid, lo)
        hi = np.where(hit, mid, hi)
        width = hi - lo
        if np.all(width <= np.maximum(tol, 4.0 * np.finfo(float).eps * np.abs(mid))):
            return 0.5 * (lo + hi), True
    return 0.5 * (lo + hi), False


def _generic_resolvent(graph: ScalarGraph, eps: float, r: np.ndarray) -> np.ndarray:
    def side(x: np.ndarray) -> np.ndarray:
        lower, upper = graph.bounds(x)
        if np.isnan(lower).any():
            raise GraphDomainError(f"graph '{graph.name}' must have D = R for resolvents")
        return np.where(x + eps * lower > r, 1, np.where(x + eps * upper < r, -1, 0))

    x, ok = _monotone_root(side, np.minimum(r, 0.0), np.maximum(r, 0.0))
    if not ok:
        res = float(np.max(np.abs(r - x - eps * np.asarray(minimal_section(graph, x)))))
        raise ResolventError(r, eps, res)
    return x


# --- Core operations ---

def resolvent(graph: ScalarGraph, eps: float, r: ArrayLike) -> ArrayLike:
    """Unique x with x + eps*gamma(x) containing r."""
    _check_eps(eps)
    x = np.asarray(r, dtype=float)
    if graph.closed_resolvent is not None:
        out = graph.closed_resolvent(eps, x)
    else:
        out = _generic_resolvent(graph, eps, x)
    return _like(r, np.asarray(out, dtype=float))


def _on_jump(graph: ScalarGraph, x: np.ndarray) -> np.ndarray:
    hit = np.zeros(x.shape, dtype=bool)
    for j in graph.jumps:
        hit |= np.abs(x - j.s) <= _JUMP_TOL * max(1.0, abs(j.s))
    return hit


def yosida(graph: ScalarGraph, eps: float, r: ArrayLike) -> ArrayLike:
    """gamma_eps(r) = (r - J_eps r)/eps, read off gamma(J_eps r) away from jumps."""
    x = np.asarray(r, dtype=float)
    j = np.asarray(resolvent(graph, eps, x), dtype=float)
    lower, upper = graph.bounds(j)
    smooth = (lower == upper) & ~_on_jump(graph, j)
    with np.errstate(invalid="ignore"):
        out = np.where(smooth, lower, (x - j) / eps)
    return _like(r, out)



def yosida_truncated(graph: ScalarGraph, eps: float, r: ArrayLike) -> ArrayLike:
    out = np.clip(np.asarray(yosida(graph, eps, r)), -1.0 / eps, 1.0 / eps)
    return _like(r, out)


def yosida_slope(graph: ScalarGraph, eps: float, r: ArrayLike) -> ArrayLike:
    """Derivative (a semismooth selection at kinks) of the Yosida approximation."""
    x = np.asarray(resolvent(graph, eps, np.asarray(r, dtype=float)))
    s = graph.slope_at(x)
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.where(np.isinf(s), 1.0 / eps, s / (1.0 + eps * np.where(np.isinf(s), 0.0, s)))
    return _like(r, out)


def yosida_truncated_slope(graph: ScalarGraph, eps: float, r: ArrayLike) -> ArrayLike:
    y = np.asarray(yosida(graph, eps, r))
    d = np.asarray(yosida_slope(graph, eps, r))
    return _like(r, np.where(np.abs(y) >= 1.0 / eps, 0.0, d))


def minimal_section(graph: ScalarGraph, r: ArrayLike) -> ArrayLike:
    """Element of gamma(r) closest to zero."""
    lower, upper = graph.bounds(r)
    if np.isnan(lower).any():
        raise GraphDomainError(f"point outside D({graph.name})")
    out = np.where(lower > 0.0, lower, np.where(upper < 0.0, upper, 0.0))
    return _like(r, out)


def potential(graph: ScalarGraph, r: ArrayLike) -> ArrayLike:
    """Convex primitive gamma-hat with gamma-hat(0) = 0."""
    x = np.asarray(r, dtype=float)
    if graph.closed_potential is not None:
        return _like(r, np.asarray(graph.closed_potential(x), dtype=float))
    flat = np.array([_integrate_section(graph, float(v)) for v in x.ravel()])
    return _like(r, flat.reshape(x.shape))


def _integrate_section(graph: ScalarGraph, r: float) -> float:
    if r == 0.0:
        return 0.0
    a, b = min(0.0, r), max(0.0, r)
    kinks = [p for p in _breakpoints(graph) if a < p < b]
    val, _ = integrate.quad(lambda s: float(minimal_section(graph, s)), a, b,
                            points=kinks or None, epsabs=1e-10, epsrel=1e-10, limit=200)
    return val if r > 0 else -val


def _breakpoints(graph: ScalarGraph) -> List[float]:
    pts = {b.lo for b in graph.branches if np.isfinite(b.lo)}
    pts |= {j.s for j in graph.jumps}
    return sorted(pts)


def conjugate(graph: ScalarGraph, y: ArrayLike) -> ArrayLike:
    """Fenchel conjugate sup_s (y s - gamma-hat(s)); INFINITE when unbounded."""
    yy = np.asarray(y, dtype=float)
    if graph.closed_conjugate is not None:
        return _like(y, np.asarray(graph.closed_conjugate(yy), dtype=float))
    flat = np.array([_numeric_conjugate(graph, float(v)) for v in yy.ravel()])
    return _like(y, flat.reshape(yy.shape))


def _numeric_conjugate(graph: ScalarGraph, y: float) -> float:
    def phi(s: float) -> float:
        return y * s - float(potential(graph, s))

    R = 1.0
    while True:
        grow_right = phi(R) > phi(R / 2) + 1e-12 * (1.0 + abs(phi(R / 2)))
        grow_left = phi(-R) > phi(-R / 2) + 1e-12 * (1.0 + abs(phi(-R / 2)))
        if not (grow_right or grow_left):
            break
        R *= 2.0
        if R > _CONJ_R_MAX:
            return INFINITE
    res = optimize.minimize_scalar(lambda s: -phi(s), bounds=(-R, R), method="bounded",
                                   options={"xatol": 1e-10})
    best = max(-float(res.fun), phi(0.0), phi(R), phi(-R))
    return max(best, 0.0)


def yosida_potential(graph: ScalarGraph, eps: float, r: ArrayLike) -> ArrayLike:
    """Potential of the Yosida approximation (Moreau envelope of gamma-hat)."""
    x = np.asarray(r, dtype=float)
    j = np.asarray(resolvent(graph, eps, x))
    y = np.asarray(yosida(graph, eps, x))
    out = np.asarray(potential(graph, j)) + 0.5 * eps * y ** 2
    return _like(r, out)


def shift_normalize(graph: ScalarGraph, r0: float, y0: float) -> ScalarGraph:
    """Shifted graph r -> gamma(r + r0) - y0, which contains (0, 0)."""
    lo, hi = graph.bounds(r0)
    if np.isnan(lo) or not (lo - 1e-12 <= y0 <= hi + 1e-12):
        raise InvalidAnchorError(f"{y0} is not in {graph.name}({r0})")

    branches = tuple(
        Branch(b.lo - r0, b.hi - r0,
               (lambda x, f=b.value: f(x + r0) - y0),
               (lambda x, f=b.slope: f(x + r0)))
        for b in graph.branches
    )
    jumps = tuple(Jump(j.s - r0, j.lower - y0, j.upper - y0) for j in graph.jumps)

    closed_res = None
    if graph.closed_resolvent is not None:
        base_res = graph.closed_resolvent
        closed_res = lambda eps, r: base_res(eps, r + r0 + eps * y0) - r0
    p0 = float(potential(graph, r0))
    closed_pot = None
    if graph.closed_potential is not None:
        base_pot = graph.closed_potential
        closed_pot = lambda r: base_pot(r + r0) - p0 - y0 * r
    closed_conj = None
    if graph.closed_conjugate is not None:
        base_conj = graph.closed_conjugate
        closed_conj = lambda y: base_conj(y + y0) - (y + y0) * r0 + p0

    return ScalarGraph(
        name=f"{graph.name}~",
        branches=branches,
        jumps=jumps,
        strong_monotonicity=graph.strong_monotonicity,
        lipschitz=graph.lipschitz,
        strictly_convex=graph.strictly_convex,
        params=graph.params + (("r0", r0), ("y0", y0)),
        closed_resolvent=closed_res,
        closed_potential=closed_pot,
        closed_conjugate=closed_conj,
    )


# --- Regularised operators used by the approximation scheme ---

def regularized(alpha: ScalarGraph, nu: float, eps: float, r: ArrayLike) -> ArrayLike:
    """alpha_{nu eps} = nu*id + alpha_eps."""
    x = np.asarray(r, dtype=float)
    return _like(r, nu * x + np.asarray(yosida(alpha, eps, x)))


def regularized_slope(alpha: ScalarGraph, nu: float, eps: float, r: ArrayLike) -> ArrayLike:
    return _like(r, nu + np.asarray(yosida_slope(alpha, eps, r)))


def regularized_potential(alpha: ScalarGraph, nu: float, eps: float, r: ArrayLike) -> ArrayLike:
    x = np.asarray(r, dtype=float)
    return _like(r, 0.5 * nu * x ** 2 + np.asarray(yosida_potential(alpha, eps, x)))


def eta_scalar(alpha: ScalarGraph, nu: float, eps: float, y: ArrayLike) -> ArrayLike:
    """Pointwise inverse eta_{nu eps} of alpha_{nu eps}."""
    yy = np.asarray(y, dtype=float)

    def side(x: np.ndarray) -> np.ndarray:
        return np.sign(np.asarray(regularized(alpha, nu, eps, x)) - yy)

    x, ok = _monotone_root(side, np.minimum(yy, 0.0) / nu, np.maximum(yy, 0.0) / nu)
    if not ok:
        gap = np.asarray(regularized(alpha, nu, eps, x)) - yy
        raise ResolventError(y, eps, float(np.max(np.abs(gap))))
    return _like(y, x)


def regularized_conjugate(alpha: ScalarGraph, nu: float, eps: float, y: ArrayLike) -> ArrayLike:
    """eta-hat_{nu eps} = conjugate of alpha-hat_{nu eps}, via the Fenchel identity."""
    x = np.asarray(eta_scalar(alpha, nu, eps, y))
    yy = np.asarray(y, dtype=float)
    return _like(y, yy * x - np.asarray(regularized_potential(alpha, nu, eps, x)))


def beta_q(beta: ScalarGraph, eps: float, q: float, r: ArrayLike) -> ArrayLike:
    """|beta_eps|^{q-2} beta_eps with the truncated Yosida map."""
    w = np.asarray(yosida_truncated(beta, eps, r))
    return _like(r, np.abs(w) ** (q - 2.0) * w)


def beta_q_potential(beta: ScalarGraph, eps: float, q: float, r: ArrayLike, order: int = 64) -> ArrayLike:
    x = np.asarray(r, dtype=float)
    nodes, weights = roots_legendre(order)
    s = 0.5 * (nodes[None, :] + 1.0) * x.reshape(-1, 1)
    vals = np.asarray(beta_q(beta, eps, q, s))
    out = 0.5 * x.reshape(-1) * (vals @ weights)
    return _like(r, out.reshape(x.shape))


def check_graph(graph: ScalarGraph, grid: Optional[np.ndarray] = None, tol: float = 1e-10) -> List[str]:
    """Sampled monotonicity, normalisation and convexity checks."""
    problems: List[str] = []
    grid = np.linspace(-5.0, 5.0, 1001) if grid is None else np.sort(np.asarray(grid, dtype=float))
    if not graph.is_normalized:
        problems.append(f"{graph.name}: 0 not in gamma(0)")
    lo, hi = graph.bounds(grid)
    if np.isnan(lo).any():
        problems.append(f"{graph.name}: sample grid leaves D(gamma)")
        return problems
    if np.any(hi[:-1] > lo[1:] + tol):
        problems.append(f"{graph.name}: not monotone on sample grid")
    pot = np.asarray(potential(graph, grid))
    mid = np.asarray(potential(graph, 0.5 * (grid[:-2] + grid[2:])))
    if np.any(mid > 0.5 * (pot[:-2] + pot[2:]) + 1e-8 * (1.0 + np.abs(pot[1:-1]))):
        problems.append(f"{graph.name}: potential fails midpoint convexity")
    if abs(float(potential(graph, 0.0))) > tol:
        problems.append(f"{graph.name}: potential(0) != 0")
    return problems


# --- Built-in graphs ---

def _identity() -> ScalarGraph:
    return ScalarGraph(
        name="identity",
        branches=(Branch(-np.inf, np.inf, lambda x: x, lambda x: np.ones_like(x)),),
        strong_monotonicity=1.0,
        lipschitz=1.0,
        closed_resolvent=lambda eps, r: r / (1.0 + eps),
        closed_potential=lambda r: 0.5 * r ** 2,
        closed_conjugate=lambda y: 0.5 * y ** 2,
    )


def _zero() -> ScalarGraph:
    return ScalarGraph(
        name="zero",
        branches=(Branch(-np.inf, np.inf, lambda x: np.zeros_like(x), lambda x: np.zeros_like(x)),),
        strong_monotonicity=0.0,
        lipschitz=0.0,
        strictly_convex=False,
        closed_resolvent=lambda eps, r: np.asarray(r, dtype=float) + 0.0,
        closed_potential=lambda r: np.zeros_like(r),
        closed_conjugate=lambda y: np.where(y == 0.0, 0.0, INFINITE),
    )


def _heaviside() -> ScalarGraph:
    return ScalarGraph(
        name="heaviside",
        branches=(
            Branch(-np.inf, 0.0, lambda x: np.zeros_like(x), lambda x: np.zeros_like(x)),
            Branch(0.0, np.inf, lambda x: np.ones_like(x), lambda x: np.zeros_like(x)),
        ),
        jumps=(Jump(0.0, 0.0, 1.0),),
        strictly_convex=False,
        closed_resolvent=lambda eps, r: np.where(r < 0.0, r, np.where(r <= eps, 0.0, r - eps)),
        closed_potential=lambda r: np.maximum(r, 0.0),
        closed_conjugate=lambda y: np.where((y >= 0.0) & (y <= 1.0), 0.0, INFINITE),
    )


def _stefan() -> ScalarGraph:
    return ScalarGraph(
        name="stefan",
        branches=(
            Branch(-np.inf, 0.0, lambda x: x, lambda x: np.ones_like(x)),
            Branch(0.0, np.inf, lambda x: x + 1.0, lambda x: np.ones_like(x)),
        ),
        jumps=(Jump(0.0, 0.0, 1.0),),
        strong_monotonicity=1.0,
        closed_resolvent=lambda eps, r: np.where(
            r < 0.0, r / (1.0 + eps), np.where(r <= eps, 0.0, (r - eps) / (1.0 + eps))),
        closed_potential=lambda r: 0.5 * r ** 2 + np.maximum(r, 0.0),
        closed_conjugate=lambda y: 0.5 * np.minimum(y, 0.0) ** 2 + 0.5 * np.maximum(y - 1.0, 0.0) ** 2,
    )


def _power(p: float) -> ScalarGraph:
    if not 1.0 < p < 2.0:
        raise GraphConstructionError(f"power graph needs p in (1, 2), got {p}")
    pstar = p / (p - 1.0)

    def value(x):
        return np.sign(x) * np.abs(x) ** (p - 1.0)

    def slope(x):
        with np.errstate(divide="ignore"):
            return (p - 1.0) * np.abs(x) ** (p - 2.0)

    def res(eps, r):
        a = np.abs(r)

        def side(t):
            return np.sign(t + eps * t ** (p - 1.0) - a)

        t, ok = _monotone_root(side, np.zeros_like(a), a)
        if not ok:
            raise ResolventError(r, eps, float(np.max(np.abs(t + eps * t ** (p - 1.0) - a))))
        return np.sign(r) * t

    return ScalarGraph(
        name="power",
        branches=(Branch(-np.inf, np.inf, value, slope),),
        params=(("p", p),),
        closed_resolvent=res,
        closed_potential=lambda r: np.abs(r) ** p / p,
        closed_conjugate=lambda y: np.abs(y) ** pstar / pstar,
    )


def _arctan() -> ScalarGraph:
    def res(eps, r):
        def side(x):
            return np.sign(x + eps * np.arctan(x) - r)

        x, ok = _monotone_root(side, np.minimum(r, 0.0), np.maximum(r, 0.0))
        if not ok:
            raise ResolventError(r, eps, float(np.max(np.abs(x + eps * np.arctan(x) - r))))
        return x

    def conj(y):
        inside = np.abs(y) < 0.5 * np.pi
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = -np.log(np.cos(np.where(inside, y, 0.0)))
        return np.where(inside, vals, INFINITE)

    return ScalarGraph(
        name="arctan",
        branches=(Branch(-np.inf, np.inf, np.arctan, lambda x: 1.0 / (1.0 + x ** 2)),),
        lipschitz=1.0,
        closed_resolvent=res,
        closed_potential=lambda r: r * np.arctan(r) - 0.5 * np.log1p(r ** 2),
        closed_conjugate=conj,
    )


def piecewise_linear(breakpoints: Sequence[Tuple[float, float]], normalize: bool = True,
                     name: str = "piecewise_linear") -> ScalarGraph:
    """Graph through (r, gamma(r)) points; a repeated r encodes a jump."""
    pts = sorted(((float(r), float(y)) for r, y in breakpoints), key=lambda p: p[0])
    if len(pts) < 2:
        raise GraphConstructionError("piecewise-linear graph needs at least two breakpoints")
    ys = [y for _, y in pts]
    if any(b < a for a, b in zip(ys, ys[1:])):
        raise GraphConstructionError("breakpoint values must be nondecreasing")

    # distinct abscissae with (lower, upper) values
    knots: List[Tuple[float, float, float]] = []
    for r, y in pts:
        if knots and knots[-1][0] == r:
            knots[-1] = (r, knots[-1][1], y)
        else:
            knots.append((r, y, y))
    if len(knots) < 2:
        raise GraphConstructionError("piecewise-linear graph needs two distinct abscissae")

    def line(r0, y0, k):
        return (lambda x: y0 + k * (x - r0)), (lambda x: np.full_like(x, k))

    slopes = [(b[1] - a[2]) / (b[0] - a[0]) for a, b in zip(knots, knots[1:])]
    branches = []
    v, s = line(knots[0][0], knots[0][1], slopes[0])
    branches.append(Branch(-np.inf, knots[0][0], v, s))
    for (a, b), k in zip(zip(knots, knots[1:]), slopes):
        v, s = line(a[0], a[2], k)
        branches.append(Branch(a[0], b[0], v, s))
    v, s = line(knots[-1][0], knots[-1][2], slopes[-1])
    branches.append(Branch(knots[-1][0], np.inf, v, s))
    jumps = tuple(Jump(r, lo, hi) for r, lo, hi in knots if hi > lo)

    kmin = min(slopes)
    graph = ScalarGraph(
        name=name,
        branches=tuple(branches),
        jumps=jumps,
        strong_monotonicity=kmin if kmin > 0 else 0.0,
        lipschitz=None if jumps else max(slopes),
        strictly_convex=kmin > 0,
        params=(("breakpoints", float(len(pts))),),
    )
    if normalize and not graph.is_normalized:
        y0 = float(minimal_section(graph, 0.0))
        logger.info("normalising %s with anchor (0, %g)", name, y0)
        graph = shift_normalize(graph, 0.0, y0)
    return graph


def load_breakpoints(path: Union[str, Path], normalize: bool = True) -> ScalarGraph:
    """Two-column (r, gamma(r)) text file; '#' starts a comment."""
    df = pd.read_csv(path, sep=r"[,\s]+", comment="#", header=None, engine="python")
    if df.shape[1] != 2:
        raise GraphConstructionError(f"{path}: expected two columns, found {df.shape[1]}")
    return piecewise_linear(df.itertuples(index=False, name=None), normalize=normalize,
                            name=Path(path).stem)


_BUILT_INS: Dict[str, Callable[..., ScalarGraph]] = {
    "identity": _identity,
    "zero": _zero,
    "heaviside": _heaviside,
    "stefan": _stefan,
    "power": _power,
    "arctan": _arctan,
    "piecewise_linear": piecewise_linear,
}


def built_in(name: str, **params) -> ScalarGraph:
    """Construct a registered graph by name."""
    key = name.lower()
    if key not in _BUILT_INS:
        raise GraphConstructionError(f"unknown graph '{name}' (known: {', '.join(sorted(_BUILT_INS))})")
    try:
        graph = _BUILT_INS[key](**params)
    except TypeError as exc:
        raise GraphConstructionError(f"bad parameters for '{name}': {exc}") from exc
    return graph


def available_graphs() -> List[str]:
    return sorted(_BUILT_INS)
