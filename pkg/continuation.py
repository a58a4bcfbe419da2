import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from artifacts_manager import manifest_hash
from graphs import FracDNLError, ScalarGraph, potential, yosida_potential
from problem import ProblemSpec, ProblemSpecError, constants, has_errors, validate
from solver import SolverParams, Trajectory, solve
from spectral import eigenpairs, pad

logger = logging.getLogger(__name__)

# Difference ratios may stray this far from the delta ratio
SCALING_BAND = 0.2
EXPONENT_RANGE = (0.9, 1.1)


class StudyRefused(FracDNLError):
    pass


def run_description(spec: ProblemSpec, params: SolverParams, **extra) -> Dict[str, object]:
    return {"problem": spec.describe(), "solver": params.describe(), **extra}


def _solve_quiet(spec: ProblemSpec, params: SolverParams) -> Optional[Trajectory]:
    try:
        return solve(spec, params, check=False)
    except FracDNLError as exc:
        logger.error("run failed (%s): %s", params.describe(), exc)
        return None


def run_many(specs: Sequence[ProblemSpec], params: Sequence[SolverParams], jobs: int = 1) -> List[Optional[Trajectory]]:
    """Independent solves; results come back in input order."""
    pairs = list(zip(specs, params))
    if jobs <= 1:
        return [_solve_quiet(s, p) for s, p in pairs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda sp: _solve_quiet(*sp), pairs))


def _check(spec: ProblemSpec) -> None:
    violations = validate(spec)
    if has_errors(violations):
        raise ProblemSpecError("; ".join(v.message for v in violations if v.severity == "error"))


def _modal_path(traj: Trajectory, n: Optional[int] = None) -> np.ndarray:
    u = traj.u[1: traj.completed + 1]
    if n is None or n == u.shape[1]:
        return u
    return np.array([pad(row, n) for row in u])


def gap_norms(a: Trajectory, b: Trajectory, n: Optional[int] = None) -> Dict[str, float]:
    """Discrete L2(0,T;H) and L^{3/2}(0,T;H) distances between two runs on one time grid."""
    d = np.linalg.norm(_modal_path(a, n) - _modal_path(b, n), axis=1)
    h = a.h
    return {
        "gap_l2": float(math.sqrt(h * np.sum(d ** 2))),
        "gap_l32": float((h * np.sum(d ** 1.5)) ** (2.0 / 3.0)),
    }


def l2_norm_sq(traj: Trajectory) -> float:
    """||u||^2_{L2(0,T;H)}."""
    return float(traj.h * np.sum(traj.u[1: traj.completed + 1] ** 2))


def _cauchy_table(name: str, values: Sequence, runs: List[Optional[Trajectory]], hashes: List[str],
                  n: Optional[int] = None, extra: Optional[Callable[[object, Trajectory], Dict]] = None) -> pd.DataFrame:
    rows = []
    prev_gap = None
    for k in range(len(values) - 1):
        a, b = runs[k], runs[k + 1]
        row: Dict[str, object] = {name: values[k], "next": values[k + 1], "hash": hashes[k]}
        if a is None or b is None:
            row.update({"gap_l2": np.nan, "gap_l32": np.nan, "ratio": np.nan, "status": "failed"})
            prev_gap = None
        else:
            row.update(gap_norms(a, b, n))
            row["ratio"] = row["gap_l2"] / prev_gap if prev_gap else np.nan
            row["status"] = "ok"
            prev_gap = row["gap_l2"]
        if extra is not None and a is not None:
            row.update(extra(values[k], a))
        rows.append(row)
    return pd.DataFrame(rows)


def eps_study(spec: ProblemSpec, params: SolverParams, eps_seq: Sequence[float], jobs: int = 1) -> pd.DataFrame:
    """Consecutive gaps |u_eps - u_eps'| as eps decreases."""
    _check(spec)
    plist = [replace(params, eps=e) for e in eps_seq]
    runs = run_many([spec] * len(plist), plist, jobs)
    hashes = [manifest_hash(run_description(spec, p)) for p in plist]
    logger.info("eps study on %s: %d runs", spec.name, len(plist))
    return _cauchy_table("eps", list(eps_seq), runs, hashes)


def nu_study(spec: ProblemSpec, params: SolverParams, nu_seq: Sequence[float], jobs: int = 1) -> pd.DataFrame:
    """As eps_study in nu; also records nu * ||u||^2_{L2(0,T;H)}."""
    _check(spec)
    plist = [replace(params, nu=v) for v in nu_seq]
    runs = run_many([spec] * len(plist), plist, jobs)
    hashes = [manifest_hash(run_description(spec, p)) for p in plist]
    logger.info("nu study on %s: %d runs", spec.name, len(plist))
    table = _cauchy_table("nu", list(nu_seq), runs, hashes,
                          extra=lambda nu, traj: {"nu_u_sq": nu * l2_norm_sq(traj)})
    return table


def n_study(spec: ProblemSpec, params: SolverParams, n_seq: Sequence[int], jobs: int = 1) -> pd.DataFrame:
    """Modal refinement; shorter modal vectors are zero-padded."""
    _check(spec)
    plist = [replace(params, n=int(n)) for n in n_seq]
    runs = run_many([spec] * len(plist), plist, jobs)
    hashes = [manifest_hash(run_description(spec, p)) for p in plist]
    logger.info("n study on %s: %d runs", spec.name, len(plist))
    return _cauchy_table("n", [int(n) for n in n_seq], runs, hashes, n=max(int(n) for n in n_seq))


def h_study(spec: ProblemSpec, params: SolverParams, M_seq: Sequence[int], reference: Optional[float] = None,
            mode: int = 0, jobs: int = 1) -> pd.DataFrame:
    """Final-time error (against reference) or Cauchy gap of modal coefficient `mode`, with orders."""
    _check(spec)
    plist = [replace(params, M=int(M)) for M in M_seq]
    runs = run_many([spec] * len(plist), plist, jobs)
    rows = []
    for k, (p, traj) in enumerate(zip(plist, runs)):
        row: Dict[str, object] = {"M": p.M, "h": spec.T / p.M, "hash": manifest_hash(run_description(spec, p))}
        if traj is None or traj.completed < p.M:
            row.update({"value": np.nan, "error": np.nan, "order": np.nan, "status": "failed"})
            rows.append(row)
            continue
        row["value"] = float(traj.u[-1][mode])
        row["status"] = "ok"
        if reference is not None:
            row["error"] = abs(row["value"] - reference)
        elif k + 1 < len(runs) and runs[k + 1] is not None:
            row["error"] = abs(row["value"] - float(runs[k + 1].u[-1][mode]))
        else:
            row["error"] = np.nan
        rows.append(row)
    table = pd.DataFrame(rows)
    orders = [np.nan]
    for k in range(1, len(table)):
        e0, e1 = table["error"].iloc[k - 1], table["error"].iloc[k]
        ratio = table["M"].iloc[k] / table["M"].iloc[k - 1]
        if e0 > 0 and e1 > 0 and np.isfinite(e0) and np.isfinite(e1):
            orders.append(math.log(e0 / e1) / math.log(ratio))
        else:
            orders.append(np.nan)
    table["order"] = orders
    logger.info("h study on %s: %d runs", spec.name, len(plist))
    return table


def mosco_desk_check(graph: ScalarGraph, eps_seq: Sequence[float], samples: Dict[str, np.ndarray],
                     nodes: np.ndarray, weights: np.ndarray) -> pd.DataFrame:
    """Psi_{gamma_eps}(y) along decreasing eps, with a weakly-perturbed liminf probe (heuristic)."""
    x = np.asarray(nodes, dtype=float).reshape(len(weights), -1)[:, 0]
    span = float(x.max() - x.min()) or 1.0
    rows = []
    for name, y in samples.items():
        y = np.asarray(y, dtype=float)
        limit = float(np.sum(weights * np.asarray(potential(graph, y))))
        prev = -math.inf
        for eps in eps_seq:
            val = float(np.sum(weights * np.asarray(yosida_potential(graph, eps, y))))
            # fixed-amplitude oscillation: converges weakly, not strongly, as eps -> 0
            wiggle = y + np.sin(np.pi * x / (eps * span))
            probe = float(np.sum(weights * np.asarray(yosida_potential(graph, eps, wiggle))))
            rows.append({
                "sample": name,
                "eps": eps,
                "psi_eps": val,
                "psi": limit,
                "gap": limit - val,
                "monotone": bool(val >= prev - 1e-10),
                "liminf_probe": probe,
            })
            prev = val
    return pd.DataFrame(rows)


@dataclass(eq=False)
class UniquenessResult:
    tau: float
    windows: int
    table: pd.DataFrame = field(repr=False)
    scaling: pd.DataFrame = field(repr=False)
    exponent: float = math.nan
    identical_at_zero: Optional[bool] = None
    window_bound: float = math.inf
    scaling_ok: Optional[bool] = None
    window_ok: Optional[bool] = None

    @property
    def ok(self) -> bool:
        return self.scaling_ok is not False and self.window_ok is not False

    def to_dict(self) -> Dict[str, object]:
        return {"tau_window": self.tau, "windows": self.windows, "exponent": self.exponent,
                "identical_at_zero": self.identical_at_zero, "window_bound": self.window_bound,
                "scaling_ok": self.scaling_ok, "window_ok": self.window_ok}



def _first_mode(spec: ProblemSpec) -> Callable[[np.ndarray], np.ndarray]:
    lengths = spec.domain.lengths

    def e1(x):
        x = np.asarray(x, dtype=float).reshape(-1, len(lengths))
        out = np.ones(x.shape[0])
        for d, L in enumerate(lengths):
            out *= math.sqrt(2.0 / L) * np.sin(math.pi * x[:, d] / L)
        return out

    return e1


def perturbed(spec: ProblemSpec, delta: float) -> ProblemSpec:
    """Same problem with u0 shifted by delta * e_1 and v0 = minimal section of alpha."""
    e1 = _first_mode(spec)
    base = spec.u0
    return replace(spec, name=f"{spec.name}_d{delta:g}", u0=lambda x: base(x) + delta * e1(x), v0=None)


def uniqueness_experiment(spec: ProblemSpec, params: SolverParams, deltas: Sequence[float],
                          jobs: int = 1) -> UniquenessResult:
    """Windowed L2 distances of solutions from u0 +- delta e_1."""
    basis = eigenpairs(spec.domain, params.n, params.oversample)
    c = constants(spec, basis)
    if c.tau_window is None:
        raise StudyRefused("; ".join(c.notes) or "uniqueness window unavailable")
    _check(spec)
    tau = c.tau_window
    specs, plist = [], []
    for d in deltas:
        specs += [perturbed(spec, d), perturbed(spec, -d)]
        plist += [params, params]
    runs = run_many(specs, plist, jobs)

    rows, scale_rows = [], []
    identical = None
    for i, d in enumerate(deltas):
        a, b = runs[2 * i], runs[2 * i + 1]
        if a is None or b is None:
            scale_rows.append({"delta": d, "norm": np.nan, "ratio": np.nan, "status": "failed"})
            continue
        diff = np.linalg.norm(a.u - b.u, axis=1)
        if d == 0:
            identical = bool(np.array_equal(a.u, b.u) and np.array_equal(a.z, b.z))
        h = a.h
        acc = 2.0 * abs(d)  # |u0a - u0b|
        t = a.times
        k, start = 0, 0.0
        while start < spec.T - 1e-14:
            stop = min(start + tau, spec.T)
            mask = (t > start + 1e-14) & (t <= stop + 1e-14)
            norm = math.sqrt(h * float(np.sum(diff[mask] ** 2)))
            rows.append({
                "delta": d, "window": k, "t_start": start, "t_end": stop, "norm": norm,
                "gronwall_constant": norm / acc if acc > 0 else (0.0 if norm == 0 else math.inf),
            })
            acc = math.sqrt(acc ** 2 + norm ** 2)
            k += 1
            start = stop
            if math.isinf(tau):
                break
        total = math.sqrt(h * float(np.sum(diff[1:] ** 2)))
        scale_rows.append({"delta": d, "norm": total, "ratio": np.nan, "status": "ok",
                           "hash": manifest_hash(run_description(specs[2 * i], params, delta=d))})

    scaling = pd.DataFrame(scale_rows)
    ratios = [np.nan]
    for k in range(1, len(scaling)):
        prev, cur = scaling["norm"].iloc[k - 1], scaling["norm"].iloc[k]
        ratios.append(cur / prev if prev and np.isfinite(prev) else np.nan)
    scaling["ratio"] = ratios

    ok = scaling[(scaling["delta"] > 0) & (scaling["norm"] > 0)]
    exponent = math.nan
    if len(ok) >= 2:
        exponent = float(np.polyfit(np.log(ok["delta"]), np.log(ok["norm"]), 1)[0])
    scaling_ok = _scaling_ok(scaling, exponent)

    table = pd.DataFrame(rows)
    bound = window_bound(spec, params, tau)
    window_ok = None
    if len(table):
        window_ok = bool(np.all(table["gronwall_constant"] <= bound))
    logger.info("uniqueness on %s: tau=%.6g, exponent=%.3f, scaling_ok=%s, window_ok=%s",
                spec.name, tau, exponent, scaling_ok, window_ok)
    windows = c.windows if c.windows is not None else 1
    return UniquenessResult(tau, windows, table, scaling, exponent, identical,
                            bound, scaling_ok, window_ok)


def window_bound(spec: ProblemSpec, params: SolverParams, tau: float) -> float:
    """Bound on a window's L2 difference norm per unit of accumulated difference.

    From the first-window energy estimate: sqrt(tau) * L / ((1 - 1/sqrt 2) * C)
    with C and L the monotonicity and Lipschitz constants of alpha_{nu eps}.
    """
    C = spec.alpha.strong_monotonicity or 0.0
    C_reg = params.nu + C / (1.0 + params.eps * C)
    L = spec.alpha.lipschitz
    L_reg = params.nu + (L / (1.0 + params.eps * L) if L is not None else 1.0 / params.eps)
    if math.isinf(tau):
        return math.inf
    return math.sqrt(tau) * L_reg / ((1.0 - 1.0 / math.sqrt(2.0)) * C_reg)


def _scaling_ok(scaling: pd.DataFrame, exponent: float) -> Optional[bool]:
    """Difference norms track delta linearly; None when fewer than two sizes were run."""
    if (scaling["status"] == "failed").any():
        return False
    rows = scaling[scaling["delta"] > 0].reset_index(drop=True)
    if len(rows) < 2:
        return None
    for k in range(1, len(rows)):
        expected = rows["delta"].iloc[k] / rows["delta"].iloc[k - 1]
        measured = rows["norm"].iloc[k] / rows["norm"].iloc[k - 1] if rows["norm"].iloc[k - 1] > 0 else math.nan
        if not abs(measured / expected - 1.0) <= SCALING_BAND:
            return False
    lo, hi = EXPONENT_RANGE
    return bool(lo <= exponent <= hi)



def commutation_check(spec: ProblemSpec, params: SolverParams, eps_seq: Sequence[float],
                      nu_seq: Sequence[float], jobs: int = 1) -> Dict[str, object]:
    """Compare the eps-first corner (eps_min, nu_0) with the nu-first corner (eps_0, nu_min).

    This is the diagonal reading of the two iterated limits: each limit is stood in
    for by the last run of its sequence, not by a full grid of (eps, nu) runs. The
    corners agree when their gap is within 5 times the larger final Cauchy gap.
    """
    eps_first = (eps_seq[-1], nu_seq[0])
    nu_first = (eps_seq[0], nu_seq[-1])
    eps_tab = eps_study(spec, replace(params, nu=nu_seq[0]), eps_seq, jobs)
    nu_tab = nu_study(spec, replace(params, eps=eps_seq[0]), nu_seq, jobs)
    corners = run_many([spec, spec], [replace(params, eps=eps_first[0], nu=eps_first[1]),
                                      replace(params, eps=nu_first[0], nu=nu_first[1])], jobs)
    out: Dict[str, object] = {"eps_first": list(eps_first), "nu_first": list(nu_first)}
    if any(r is None for r in corners):
        return {**out, "gap": math.nan, "max_cauchy": math.nan, "agree": False}
    gap = gap_norms(corners[0], corners[1])["gap_l2"]
    cauchy = float(np.nanmax([eps_tab["gap_l2"].iloc[-1], nu_tab["gap_l2"].iloc[-1]]))
    return {**out, "gap": gap, "max_cauchy": cauchy, "agree": bool(gap <= 5.0 * cauchy)}

