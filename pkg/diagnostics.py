import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from graphs import ScalarGraph, beta_q_potential, minimal_section, potential, regularized_potential
from kernels import ell_convolve, ell_l1, fast_history
from problem import constants
from solver import Trajectory
from spectral import inner, lp_norm, project, vstar_norm

logger = logging.getLogger(__name__)

NONNEG_TOL = 1e-8


def eta_potential(traj: Trajectory, m: int) -> float:
    """psi(v_m) = int eta-hat(v_m) dx via the Fenchel identity at u_m."""
    r = traj.nodal_u(m)
    v = traj.nodal_v(m)
    p = traj.params
    vals = v * r - np.asarray(regularized_potential(traj.spec.alpha, p.nu, p.eps, r))
    return float(np.sum(traj.basis.weights * vals))


def data_scale(traj: Trajectory) -> float:
    init = traj.init
    return max(1.0, abs(init.initial_potential), lp_norm(traj.basis, init.u0, 2.0) ** 2)


@dataclass(eq=False)
class EnergyReport:
    """Left-hand terms of the energy estimate per step and the right-hand bound."""
    times: np.ndarray
    psi: np.ndarray
    ell_grad: np.ndarray
    ell_beta: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    C: float
    slack: float
    violations: List[str] = field(default_factory=list)
    partial: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "m": np.arange(len(self.times)),
            "t": self.times,
            "psi": self.psi,
            "ell_grad": self.ell_grad,
            "ell_beta": self.ell_beta,
            "lhs": self.lhs,
            "rhs": self.rhs,
        })

    def to_dict(self) -> Dict[str, object]:
        return {
            "C": self.C,
            "slack": self.slack,
            "max_lhs_minus_rhs": float(np.max(self.lhs - self.rhs)) if self.lhs.size else 0.0,
            "violations": self.violations,
            "partial": self.partial,
        }


def energy_report(traj: Trajectory) -> EnergyReport:
    """psi(v) + (1/2) ell*|u|_V^2 + ell*(beta_eps(u), u) <= psi(v0) + ||ell||_L1 C_G."""
    K = traj.completed
    basis = traj.basis
    times = traj.times[: K + 1]
    psi = np.array([eta_potential(traj, m) for m in range(K + 1)])
    grad = np.array([float(np.sum(basis.lambdas * traj.u[m] ** 2)) for m in range(K + 1)])
    beta_u = np.array([inner(basis, traj.nodal_w(m), traj.nodal_u(m)) for m in range(K + 1)])
    ell_grad = ell_convolve(traj.spec.pair, traj.h, grad)
    ell_beta = ell_convolve(traj.spec.pair, traj.h, beta_u)
    lhs = psi + 0.5 * ell_grad + ell_beta

    C_G = constants(traj.spec, basis).C_G
    slack = 10.0 * traj.h ** traj.spec.theta * data_scale(traj)
    rhs = traj.init.initial_potential + np.asarray(ell_l1(traj.spec.pair, times)) * C_G + slack

    violations: List[str] = []
    for name, arr in (("psi", psi), ("ell_grad", ell_grad), ("ell_beta", ell_beta)):
        bad = np.nonzero(arr < -NONNEG_TOL)[0]
        if bad.size:
            violations.append(f"{name} negative at step {int(bad[0])}")
    bad = np.nonzero(lhs > rhs)[0]
    if bad.size:
        violations.append(f"energy bound exceeded at step {int(bad[0])} by {float(np.max(lhs - rhs)):.3e}")
    for v in violations:
        logger.warning("energy: %s", v)
    return EnergyReport(times, psi, ell_grad, ell_beta, lhs, rhs, C_G, slack, violations,
                        partial=K < traj.params.M)


def chain_tolerance(traj: Trajectory) -> float:
    return 10.0 * traj.h ** traj.spec.theta * data_scale(traj)


def chain_rule_slack(traj: Trajectory, graph: Optional[ScalarGraph] = None) -> np.ndarray:
    """[ell * (D(x), y)]_m - (psi(m) - psi(0)) for m = 0..completed.

    Without a graph the pairing is D(z) against u with psi = int eta-hat(v).
    With a graph it is D(u) against pi_n gamma(u) with psi = int gamma-hat(u).
    """
    K = traj.completed
    basis = traj.basis
    if graph is None:
        hist = traj.z[: K + 1]
        partner = traj.u[: K + 1]
        psi = np.array([eta_potential(traj, m) for m in range(K + 1)])
    else:
        hist = traj.u[: K + 1]
        partner = np.array([project(basis, np.asarray(minimal_section(graph, traj.nodal_u(m))))
                            for m in range(K + 1)])
        psi = np.array([float(np.sum(basis.weights * np.asarray(potential(graph, traj.nodal_u(m)))))
                        for m in range(K + 1)])
    pairing = np.zeros(K + 1)
    if K >= 1:
        pairing[1:] = np.sum(fast_history(traj.weights, hist) * partner[1:], axis=1)
    return ell_convolve(traj.spec.pair, traj.h, pairing) - (psi - psi[0])


def chain_rule_check(traj: Trajectory, graph: Optional[ScalarGraph] = None) -> float:
    """Minimum slack of the nonlocal chain-rule inequality over the stored steps."""
    slack = chain_rule_slack(traj, graph)
    worst = float(slack[1:].min()) if slack.size > 1 else 0.0
    if worst < -chain_tolerance(traj):
        logger.warning("chain rule: slack %.3e below tolerance %.3e", worst, chain_tolerance(traj))
    return worst


@dataclass(eq=False)
class LqReport:
    q: float
    norm: float
    max_w: float
    holder_bound: float
    trace: np.ndarray = field(repr=False)

    def to_dict(self) -> Dict[str, float]:
        return {"q": self.q, "norm": self.norm, "max_w": self.max_w, "holder_bound": self.holder_bound,
                "max_trace": float(self.trace.max()) if self.trace.size else 0.0}


def lq_bound(traj: Trajectory) -> LqReport:
    """Space-time L^q norm of w = beta_eps(u) and the beta_eq potential trace."""
    q = traj.spec.q
    K = traj.completed
    basis = traj.basis
    total, max_w = 0.0, 0.0
    trace = np.zeros(K + 1)
    for m in range(K + 1):
        w = traj.nodal_w(m)
        if m > 0:
            total += traj.h * float(np.sum(basis.weights * np.abs(w) ** q))
            max_w = max(max_w, float(np.max(np.abs(w))))
        pot = beta_q_potential(traj.spec.beta, traj.params.eps, q, traj.nodal_u(m))
        trace[m] = float(np.sum(basis.weights * np.asarray(pot)))
    measure = traj.times[K] * traj.spec.domain.measure
    return LqReport(q, total ** (1.0 / q), max_w, measure ** (1.0 / q) * max_w, trace)


def increment_modulus(traj: Trajectory, lags: Sequence[int]) -> pd.DataFrame:
    """sum_m h |z_{m+k} - z_m|_{V*}^2 for each lag k (in steps)."""
    K = traj.completed
    rows = []
    for k in lags:
        k = int(k)
        if k < 0 or k > K:
            continue
        val = sum(traj.h * vstar_norm(traj.basis, traj.z[m + k] - traj.z[m]) ** 2 for m in range(K - k + 1))
        rows.append({"lag": k, "lag_time": k * traj.h, "modulus": float(val)})
    return pd.DataFrame(rows, columns=["lag", "lag_time", "modulus"])


def diagnostics_summary(traj: Trajectory) -> Dict[str, object]:
    """Block stored in the run's diagnostics file."""
    report = energy_report(traj)
    out: Dict[str, object] = {
        "energy": report.to_dict(),
        "chain_rule_min_slack": chain_rule_check(traj),
        "chain_rule_tolerance": chain_tolerance(traj),
        "lq": lq_bound(traj).to_dict(),
        "initial_data": traj.init.records(),
        "max_abs_w": max(float(np.max(np.abs(traj.nodal_w(m)))) for m in range(traj.completed + 1)),
        "truncation_level": 1.0 / traj.params.eps,
    }
    if not math.isfinite(out["chain_rule_min_slack"]):
        out["chain_rule_min_slack"] = None
    return out
