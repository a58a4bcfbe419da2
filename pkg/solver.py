import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from graphs import (FracDNLError, regularized, regularized_slope, yosida_truncated,
                    yosida_truncated_slope)
from kernels import FracWeights, history_term, l1_weights, pair_weights
from problem import (ProblemSpec, ProblemSpecError, RegularizedInit, build_regularized,
                     has_errors, validate)
from spectral import (Eigenbasis, damped_newton, eigenpairs, eta_solve, nodal_map, project,
                      relaxed_iteration, synth)

logger = logging.getLogger(__name__)

_RELAX_FACTOR = 50
_FD_STEP = 1e-7


class SolverParameterError(FracDNLError):
    pass


class StepError(FracDNLError):
    """Nonlinear solve failed at step m; the partial trajectory is kept."""

    def __init__(self, m: int, residuals: List[float], remedy: str, trajectory: Optional["Trajectory"] = None):
        self.m = m
        self.residuals = residuals
        self.remedy = remedy
        self.trajectory = trajectory
        last = residuals[-1] if residuals else float("nan")
        super().__init__(f"step {m} did not converge (residual {last:.3e}); {remedy}")


@dataclass(frozen=True)
class SolverParams:
    eps: float
    nu: float
    n: int
    M: int
    tol: float = 1e-10
    budget: int = 100
    kind: str = "newton"
    oversample: int = 2

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise SolverParameterError(f"eps must lie in (0, 1), got {self.eps}")
        if not 0.0 < self.nu < 1.0:
            raise SolverParameterError(f"nu must lie in (0, 1), got {self.nu}")
        if self.n < 1 or self.M < 1:
            raise SolverParameterError(f"n and M must be positive (n={self.n}, M={self.M})")
        if not self.tol > 0 or self.budget < 1:
            raise SolverParameterError("tol must be positive and budget at least 1")
        if self.kind not in ("newton", "relaxed"):
            raise SolverParameterError(f"unknown solver kind '{self.kind}'")
        if self.oversample < 1:
            raise SolverParameterError("oversample must be at least 1")

    def describe(self) -> dict:
        return {"eps": self.eps, "nu": self.nu, "n": self.n, "M": self.M, "tol": self.tol,
                "budget": self.budget, "kind": self.kind, "oversample": self.oversample}


@dataclass
class StepStats:
    m: int
    iterations: int
    residual: float
    method: str
    coercivity: float
    stable: bool

    def to_dict(self) -> dict:
        return {"m": self.m, "iterations": self.iterations, "residual": self.residual,
                "method": self.method, "coercivity": self.coercivity, "stable": self.stable}


@dataclass(eq=False)
class Trajectory:
    """Modal z and u on the time grid, with per-step solve statistics."""
    spec: ProblemSpec
    params: SolverParams
    basis: Eigenbasis
    weights: FracWeights
    init: RegularizedInit
    times: np.ndarray
    z: np.ndarray
    u: np.ndarray
    stats: List[StepStats] = field(default_factory=list)
    completed: int = 0

    @property
    def h(self) -> float:
        return self.weights.h

    def nodal_u(self, m: int) -> np.ndarray:
        return synth(self.basis, self.u[m])

    def nodal_v(self, m: int) -> np.ndarray:
        return np.asarray(regularized(self.spec.alpha, self.params.nu, self.params.eps, self.nodal_u(m)))

    def nodal_w(self, m: int) -> np.ndarray:
        return np.asarray(yosida_truncated(self.spec.beta, self.params.eps, self.nodal_u(m)))

    def to_frame(self) -> pd.DataFrame:
        rows = slice(0, self.completed + 1)
        data = {"m": np.arange(self.completed + 1), "t": self.times[rows]}
        for i in range(self.basis.n):
            data[f"z_{i + 1}"] = self.z[rows, i]
        for i in range(self.basis.n):
            data[f"u_{i + 1}"] = self.u[rows, i]
        return pd.DataFrame(data)

    def summary(self) -> dict:
        return {
            "completed": self.completed,
            "M": self.params.M,
            "iterations": [s.iterations for s in self.stats],
            "max_residual": max((s.residual for s in self.stats), default=0.0),
            "fallback_steps": sum(1 for s in self.stats if s.method != "newton"),
            "unstable_steps": sum(1 for s in self.stats if not s.stable),
        }


class GalerkinSolver:
    """Implicit L1 stepping of the regularised Galerkin system."""

    def __init__(self, spec: ProblemSpec, params: SolverParams, basis: Optional[Eigenbasis] = None):
        self.spec = spec
        self.params = params
        self.basis = basis if basis is not None else eigenpairs(spec.domain, params.n, params.oversample)
        if self.basis.n != params.n:
            raise SolverParameterError(f"basis has {self.basis.n} modes, params ask for {params.n}")
        self.h = spec.T / params.M
        if spec.pair.kind == "riemann_liouville":
            self.weights = l1_weights(spec.theta, self.h, params.M)
        else:
            self.weights = pair_weights(spec.pair, self.h, params.M)
        self.init = build_regularized(spec, params.eps, params.nu, self.basis)
        self.times = self.h * np.arange(params.M + 1)
        self.z = np.zeros((params.M + 1, params.n))
        self.u = np.zeros((params.M + 1, params.n))
        self.stats: List[StepStats] = []
        self.completed = -1

        lam = self.basis.lambdas
        b0, nu, eps, Lg = self.weights.b0, params.nu, params.eps, spec.lambda_g
        self.mu = b0 * nu + lam[0] - Lg
        self.lipschitz = b0 * (nu + 1.0 / eps) + lam[-1] + 1.0 / eps + Lg
        self.coercivity = b0 * nu / self.lipschitz

    # --- nodal pieces ---

    def _alpha(self, r):
        return regularized(self.spec.alpha, self.params.nu, self.params.eps, r)

    def _beta(self, r):
        return yosida_truncated(self.spec.beta, self.params.eps, r)

    def _g(self, t: float, r):
        return np.asarray(self.spec.g(self.basis.nodes, t, r), dtype=float)

    def _g_slope(self, t: float, r):
        if self.spec.g_slope is not None:
            return np.asarray(self.spec.g_slope(self.basis.nodes, t, r), dtype=float)
        d = _FD_STEP * (1.0 + np.abs(r))
        return (self._g(t, r + d) - self._g(t, r - d)) / (2.0 * d)

    def delta_from_u(self, t: float, u) -> np.ndarray:
        """lambda_i u_i + pi_n beta_eps(u) - pi_n g(t, u)."""
        r = synth(self.basis, u)
        return self.basis.lambdas * u + project(self.basis, np.asarray(self._beta(r)) - self._g(t, r))

    def assemble_delta(self, t: float, z) -> np.ndarray:
        p = self.params
        u = eta_solve(self.basis, z, p.nu, p.eps, self.spec.alpha, p.tol, p.budget)
        return self.delta_from_u(t, u)

    def step_residual(self, m: int, u, z_hist: np.ndarray) -> np.ndarray:
        """b0 (pi_n alpha(u) - z_{m-1}) + H_m + delta(t_m, u), given z_0..z_{m-1}."""
        zm = nodal_map(self.basis, u, self._alpha)
        lag = history_term(self.weights, z_hist[:m])
        return self.weights.b0 * (zm - z_hist[m - 1]) + lag + self.delta_from_u(self.times[m], u)

    def residual_scale(self, m: int) -> float:
        """Size of the data entering step m; the step tolerance is tol times this."""
        lag = history_term(self.weights, self.z[:m])
        return max(1.0, float(np.linalg.norm(self.weights.b0 * self.z[m - 1])), float(np.linalg.norm(lag)))

    def _jacobian(self, t: float, u) -> np.ndarray:
        r = synth(self.basis, u)
        p = self.params
        d = (self.weights.b0 * np.asarray(regularized_slope(self.spec.alpha, p.nu, p.eps, r))
             + np.asarray(yosida_truncated_slope(self.spec.beta, p.eps, r))
             - self._g_slope(t, r))
        E = self.basis.E
        return E.T @ ((self.basis.weights * d)[:, None] * E) + np.diag(self.basis.lambdas)

    # --- stepping ---

    def start(self) -> None:
        p = self.params
        self.z[0] = self.init.z0
        self.u[0] = eta_solve(self.basis, self.init.z0, p.nu, p.eps, self.spec.alpha, p.tol, p.budget)
        self.completed = 0
        if self.mu <= 0:
            logger.warning("coercivity estimate b0*nu + lambda_1 - Lambda_g = %.3g <= 0; "
                           "step uniqueness is not guaranteed, consider a smaller h", self.mu)

    def step(self, m: int, guess=None) -> Tuple[np.ndarray, np.ndarray, StepStats]:
        if self.completed < m - 1 or m < 1 or m > self.params.M:
            raise SolverParameterError(f"step {m} requested with {self.completed} steps complete")
        p = self.params
        t = self.times[m]
        u0 = self.u[m - 1] if guess is None else np.asarray(guess, dtype=float)

        def fun(u):
            return self.step_residual(m, u, self.z)

        tol = p.tol * self.residual_scale(m)
        method = p.kind
        history: List[float] = []
        ok = False
        u = u0
        if p.kind == "newton":
            u, history, ok = damped_newton(fun, lambda v: self._jacobian(t, v), u0, tol, p.budget)
        if not ok:
            if p.kind == "newton":
                logger.warning("step %d: Newton stalled at %.3e, using relaxed iteration", m, history[-1])
            method = "relaxed"
            step = max(self.mu, self.weights.b0 * p.nu) / self.lipschitz ** 2
            u, more, ok = relaxed_iteration(fun, u, step, tol, _RELAX_FACTOR * p.budget)
            history.extend(more[1:] if history else more)
        if not ok:
            raise StepError(m, history, "reduce h (increase M) or increase nu")

        z = nodal_map(self.basis, u, self._alpha)
        stats = StepStats(m, len(history) - 1, history[-1], method, self.coercivity, self.mu > 0)
        self.z[m], self.u[m] = z, u
        self.stats.append(stats)
        self.completed = m
        logger.debug("step %d: %s, %d iterations, residual %.2e", m, method, stats.iterations, stats.residual)
        return z, u, stats

    def trajectory(self) -> Trajectory:
        return Trajectory(self.spec, self.params, self.basis, self.weights, self.init, self.times,
                          self.z, self.u, self.stats, max(self.completed, 0))

    def run(self) -> Trajectory:
        self.start()
        for m in range(1, self.params.M + 1):
            try:
                self.step(m)
            except StepError as exc:
                exc.trajectory = self.trajectory()
                logger.error("%s", exc)
                raise
        traj = self.trajectory()
        logger.info("solved %s: M=%d n=%d, max residual %.2e", self.spec.name, self.params.M,
                    self.params.n, traj.summary()["max_residual"])
        return traj


# --- module-level API ---

def solve(spec: ProblemSpec, params: SolverParams, basis: Optional[Eigenbasis] = None,
          check: bool = True) -> Trajectory:
    """Validate (unless check=False) and integrate over (0, T]."""
    if check:
        violations = validate(spec, basis)
        if has_errors(violations):
            msgs = "; ".join(v.message for v in violations if v.severity == "error")
            raise ProblemSpecError(f"{spec.name}: {msgs}")
    return GalerkinSolver(spec, params, basis).run()


def assemble_delta(basis: Eigenbasis, spec: ProblemSpec, params: SolverParams, t: float, z) -> np.ndarray:
    return GalerkinSolver(spec, params, basis).assemble_delta(t, z)


def residual(spec: ProblemSpec, params: SolverParams, traj: Trajectory) -> np.ndarray:
    """Per-step max of the discrete equation residual and of |z_m - pi_n alpha(u_m)|."""
    solver = GalerkinSolver(spec, params, traj.basis)
    out = np.zeros(traj.completed)
    for m in range(1, traj.completed + 1):
        r = solver.step_residual(m, traj.u[m], traj.z)
        consistency = traj.z[m] - nodal_map(traj.basis, traj.u[m], solver._alpha)
        out[m - 1] = max(float(np.max(np.abs(r))), float(np.max(np.abs(consistency))))
    return out


def manufactured_forcing(spec: ProblemSpec, params: SolverParams,
                         u_star: Callable[[float], np.ndarray],
                         basis: Optional[Eigenbasis] = None) -> ProblemSpec:
    """Problem whose discrete solution is the modal path u_star(t_m).

    The forcing is the discrete operator applied to u_star, tabulated per step at
    the quadrature nodes; the returned spec starts from synth(u_star(0)).
    """
    basis = basis if basis is not None else eigenpairs(spec.domain, params.n, params.oversample)
    h = spec.T / params.M
    weights = (l1_weights(spec.theta, h, params.M) if spec.pair.kind == "riemann_liouville"
               else pair_weights(spec.pair, h, params.M))
    nu, eps = params.nu, params.eps
    us = np.array([u_star(h * m) for m in range(params.M + 1)])
    zs = np.array([nodal_map(basis, u, lambda r: regularized(spec.alpha, nu, eps, r)) for u in us])
    table = np.zeros((params.M + 1, basis.node_count))
    for m in range(1, params.M + 1):
        Dm = weights.b0 * (zs[m] - zs[m - 1]) + history_term(weights, zs[:m])
        r = synth(basis, us[m])
        table[m] = synth(basis, Dm + basis.lambdas * us[m]) + np.asarray(yosida_truncated(spec.beta, eps, r))
    tree = cKDTree(basis.nodes)
    u0_nodal = synth(basis, us[0])

    def g(x, t, u):
        m = int(np.clip(round(t / h), 0, params.M))
        _, idx = tree.query(np.asarray(x, dtype=float).reshape(-1, basis.domain.dim))
        return table[m][idx]

    def u0(x):
        _, idx = tree.query(np.asarray(x, dtype=float).reshape(-1, basis.domain.dim))
        return u0_nodal[idx]

    return replace(spec, name=f"{spec.name}_manufactured", g=g,
                   g_slope=lambda x, t, u: np.zeros(np.shape(u)),
                   lambda_g=float(np.max(np.abs(table))), u0=u0, v0=None)
