import logging
import math
from dataclasses import fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import ConfigError, ProblemConfig, parse_call
from graphs import ScalarGraph, built_in, load_breakpoints, minimal_section
from kernels import SoninePair, power_pair, rl_pair
from problem import Forcing, NodalField, ProblemSpec
from spectral import Domain, interval, rectangle

logger = logging.getLogger(__name__)

_COMMON = {"domain": "interval(L=1)", "T": 0.5, "theta": 0.5, "kernel": "rl", "beta": "zero",
           "g": "zero", "q": 3.0}

PRESETS: Dict[str, Dict[str, object]] = {
    "stefan": {**_COMMON, "alpha": "stefan", "u0": "plateau(amp=1)", "v0": "fill(value=0.5)"},
    "porous_medium": {**_COMMON, "alpha": "power(p=1.5)", "u0": "sine(amp=1)", "v0": "section"},
    "hele_shaw": {**_COMMON, "alpha": "heaviside", "u0": "plateau(amp=1)", "v0": "fill(value=0.5)"},
    "linear_heat": {**_COMMON, "alpha": "identity", "u0": "sine(amp=1)", "v0": "section"},
    "lipschitz_demo": {**_COMMON, "T": 1.0, "alpha": "identity", "beta": "arctan",
                       "u0": "sine(amp=1)", "v0": "section"},
}

PRESET_NOTES = {
    "stefan": "two-phase Stefan problem, alpha = id + H",
    "porous_medium": "porous medium, alpha(r) = |r|^(p-2) r with p in (1,2) (parameter p, default 1.5)",
    "hele_shaw": "Hele-Shaw model, alpha = H",
    "linear_heat": "linear fractional heat equation, alpha = id",
    "lipschitz_demo": "alpha = id, beta = arctan, g = 0; uniqueness window pi/8 at theta = 0.5",
}


def available_presets() -> List[str]:
    return sorted(PRESETS)


def resolve(cfg: ProblemConfig) -> ProblemConfig:
    """Fill unset keys from the named preset."""
    if not cfg.preset:
        return cfg
    name, params = parse_call(cfg.preset)
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' (known: {', '.join(available_presets())})")
    base = dict(PRESETS[name])
    if name == "porous_medium" and "p" in params:
        base["alpha"] = f"power(p={params['p']!r})"
    merged = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    for key, value in base.items():
        if merged.get(key) is None:
            merged[key] = value
    return ProblemConfig(**merged)


# --- pieces ---

def domain_from_expr(expr: str) -> Domain:
    name, p = parse_call(expr)
    if name == "interval":
        return interval(float(p.get("L", 1.0)))
    if name == "rectangle":
        return rectangle(float(p.get("Lx", 1.0)), float(p.get("Ly", 1.0)))
    raise ConfigError(f"unknown domain '{expr}'")


def kernel_from_expr(expr: str, theta: float) -> SoninePair:
    name, p = parse_call(expr)
    if name == "rl":
        return rl_pair(theta)
    if name == "power":
        return power_pair(float(p["ell_coef"]), float(p["ell_exp"]), float(p["kappa_coef"]), float(p["kappa_exp"]))
    raise ConfigError(f"unknown kernel '{expr}'")


def graph_from_expr(expr: str, base_dir: Optional[Path] = None) -> ScalarGraph:
    if expr.startswith("csv:"):
        path = Path(expr[4:].strip())
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_breakpoints(path)
    name, params = parse_call(expr)
    return built_in(name, **{k: float(v) for k, v in params.items()})


def forcing_from_expr(expr: str) -> Tuple[Forcing, Forcing, float]:
    """(g, dg/du, declared Lambda_g) for a named forcing."""
    name, p = parse_call(expr)
    if name == "zero":
        return (lambda x, t, u: np.zeros(np.shape(u))), (lambda x, t, u: np.zeros(np.shape(u))), 0.0
    if name == "constant":
        c = float(p.get("c", 1.0))
        return (lambda x, t, u: np.full(np.shape(u), c)), (lambda x, t, u: np.zeros(np.shape(u))), abs(c)
    if name == "sin":
        a = float(p.get("amp", 1.0))
        return (lambda x, t, u: a * np.sin(u)), (lambda x, t, u: a * np.cos(u)), abs(a)
    if name == "linear":
        k = float(p.get("k", 1.0))
        return (lambda x, t, u: k * np.asarray(u, dtype=float)), (lambda x, t, u: np.full(np.shape(u), k)), abs(k)
    raise ConfigError(f"unknown forcing '{expr}'")


def _first_coord(x: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1, dim)


def field_from_expr(expr: str, domain: Domain, base_dir: Optional[Path] = None) -> NodalField:
    """Nodal field x -> value from a named shape or a two-column csv (x, value)."""
    dim = domain.dim
    L = domain.lengths
    if expr.startswith("csv:"):
        path = Path(expr[4:].strip())
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        df = pd.read_csv(path, sep=r"[,\s]+", comment="#", header=None, engine="python")
        xs, vals = df.iloc[:, 0].to_numpy(float), df.iloc[:, 1].to_numpy(float)
        order = np.argsort(xs)
        return lambda x: np.interp(_first_coord(x, dim)[:, 0], xs[order], vals[order])

    name, p = parse_call(expr)
    amp = float(p.get("amp", 1.0))
    if name == "zero":
        return lambda x: np.zeros(_first_coord(x, dim).shape[0])
    if name == "constant":
        c = float(p.get("c", 0.0))
        return lambda x: np.full(_first_coord(x, dim).shape[0], c)
    if name == "sine":
        k = float(p.get("k", 1.0))

        def sine(x):
            x = _first_coord(x, dim)
            out = np.full(x.shape[0], amp)
            for d in range(dim):
                out *= np.sin(k * math.pi * x[:, d] / L[d])
            return out
        return sine
    if name == "mode":
        i = int(p.get("i", 1))
        j = int(p.get("j", 1))

        def mode(x):
            x = _first_coord(x, dim)
            out = amp * math.sqrt(2.0 / L[0]) * np.sin(i * math.pi * x[:, 0] / L[0])
            if dim == 2:
                out = out * math.sqrt(2.0 / L[1]) * np.sin(j * math.pi * x[:, 1] / L[1])
            return out
        return mode
    if name == "plateau":
        # positive bump on the first half, exactly zero on the second
        def plateau(x):
            x = _first_coord(x, dim)
            out = amp * np.maximum(np.sin(2.0 * math.pi * x[:, 0] / L[0]), 0.0)
            if dim == 2:
                out = out * np.sin(math.pi * x[:, 1] / L[1])
            return out
        return plateau
    raise ConfigError(f"unknown field '{expr}'")


def v0_from_expr(expr: str, alpha: ScalarGraph, u0: NodalField, domain: Domain,
                 base_dir: Optional[Path] = None) -> Optional[NodalField]:
    """None means the minimal section of alpha at u0."""
    name, p = parse_call(expr) if not expr.startswith("csv:") else ("csv", {})
    if name == "section":
        return None
    if name == "fill":
        value = float(p.get("value", 0.0))

        def fill(x):
            u = np.asarray(u0(x), dtype=float)
            lo, hi = alpha.bounds(u)
            multi = hi > lo
            return np.where(multi, np.clip(value, lo, hi), np.asarray(minimal_section(alpha, u)))
        return fill
    return field_from_expr(expr, domain, base_dir)


def build_problem(cfg: ProblemConfig, name: str = "run", base_dir: Optional[Path] = None) -> ProblemSpec:
    """ProblemSpec from a (preset-resolved) problem section."""
    cfg = resolve(cfg)
    missing = [k for k in ("domain", "T", "theta", "alpha", "beta", "g", "q", "u0") if getattr(cfg, k) is None]
    if missing:
        raise ConfigError(f"problem section lacks: {', '.join(missing)}")
    try:
        domain = domain_from_expr(cfg.domain)
        pair = kernel_from_expr(cfg.kernel or "rl", float(cfg.theta))
        alpha = graph_from_expr(cfg.alpha, base_dir)
        beta = graph_from_expr(cfg.beta, base_dir)
        g, g_slope, declared = forcing_from_expr(cfg.g)
        u0 = field_from_expr(cfg.u0, domain, base_dir)
        v0 = v0_from_expr(cfg.v0 or "section", alpha, u0, domain, base_dir)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad problem parameter: {exc}") from exc
    labels = tuple((k, str(getattr(cfg, k))) for k in ("preset", "g", "u0", "v0") if getattr(cfg, k) is not None)
    return ProblemSpec(
        name=name,
        domain=domain,
        T=float(cfg.T),
        pair=pair,
        alpha=alpha,
        beta=beta,
        g=g,
        lambda_g=float(cfg.lambda_g) if cfg.lambda_g is not None else declared,
        q=float(cfg.q),
        u0=u0,
        v0=v0,
        g_slope=g_slope,
        labels=labels,
    )


def preset_problem(name: str, **overrides) -> ProblemSpec:
    """Shortcut used by tests and the API: preset plus keyword overrides."""
    cfg = ProblemConfig(preset=name, **overrides)
    return build_problem(cfg, name=parse_call(name)[0])
