import configparser
import logging
import os
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from dotenv import load_dotenv

from graphs import FracDNLError

# Load environment variables
load_dotenv()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Settings:
    """Environment settings with defaults."""

    def __init__(self):
        self.log_level = os.getenv("FRACDNL_LOG", "WARNING").strip().upper() or "WARNING"
        self.jobs = int(os.getenv("FRACDNL_JOBS", "1").strip() or 1)
        self.out_dir = os.getenv("FRACDNL_OUT", "runs").strip() or "runs"

    def validate(self):
        if self.log_level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            return False, f"Unknown FRACDNL_LOG level: {self.log_level}"
        if self.jobs < 1:
            return False, "FRACDNL_JOBS must be at least 1"
        return True, "Configuration valid"


_env = Settings()


def configure_logging(level: Optional[str] = None) -> None:
    """Install one stream handler on the root logger."""
    name = (level or _env.log_level).upper()
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_fracdnl", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._fracdnl = True
    root.addHandler(handler)
    root.setLevel(getattr(logging, name, logging.WARNING))


class ConfigError(FracDNLError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


# --- value expressions ---

_CALL = re.compile(r"^\s*([A-Za-z_][\w]*)\s*(?:\((.*)\))?\s*$")


def _scalar(text: str) -> Union[float, str]:
    try:
        return float(text)
    except ValueError:
        return text


def parse_call(expr: str) -> Tuple[str, Dict[str, Union[float, str]]]:
    """'name' or 'name(key=value, ...)' -> (name, params)."""
    m = _CALL.match(expr)
    if not m:
        raise ConfigError(f"malformed expression '{expr}'")
    name, body = m.group(1), m.group(2)
    params: Dict[str, Union[float, str]] = {}
    if body and body.strip():
        for part in body.split(","):
            if "=" not in part:
                raise ConfigError(f"expected key=value in '{expr}'")
            key, val = part.split("=", 1)
            params[key.strip()] = _scalar(val.strip())
    return name, params


# --- run configuration ---

@dataclass
class ProblemConfig:
    preset: Optional[str] = None
    domain: Optional[str] = None
    T: Optional[float] = None
    theta: Optional[float] = None
    kernel: Optional[str] = None
    alpha: Optional[str] = None
    beta: Optional[str] = None
    g: Optional[str] = None
    lambda_g: Optional[float] = None
    q: Optional[float] = None
    u0: Optional[str] = None
    v0: Optional[str] = None


@dataclass
class SolverConfig:
    eps: float = 1e-2
    nu: float = 1e-2
    n: int = 16
    M: int = 128
    tol: float = 1e-10
    budget: int = 100
    kind: str = "newton"
    oversample: int = 2


@dataclass
class StudyConfig:
    kind: Optional[str] = None
    values: List[float] = field(default_factory=list)
    nu_values: List[float] = field(default_factory=list)
    reference: Optional[str] = None
    mode: int = 0


@dataclass
class OutputConfig:
    dir: Optional[str] = None
    emit_plot_data: bool = False
    snapshots: List[int] = field(default_factory=list)
    verbosity: Optional[str] = None


@dataclass
class RunConfig:
    name: str = "run"
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTIONS = {"problem": ProblemConfig, "solver": SolverConfig, "study": StudyConfig, "output": OutputConfig}
_INT_KEYS = {"n", "M", "budget", "oversample", "mode"}
_FLOAT_KEYS = {"T", "theta", "lambda_g", "q", "eps", "nu", "tol"}
_FLOAT_LIST_KEYS = {"values", "nu_values"}
_INT_LIST_KEYS = {"snapshots"}
_BOOL_KEYS = {"emit_plot_data"}


def _locate(lines: List[str], section: str, key: Optional[str] = None) -> Optional[int]:
    current = None
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return i
        elif key is not None and current == section and "=" in line:
            if line.split("=", 1)[0].strip() == key:
                return i
    return None


def _convert(key: str, raw: str) -> Any:
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _FLOAT_LIST_KEYS:
        return [float(v) for v in raw.split(",") if v.strip()]
    if key in _INT_LIST_KEYS:
        return [int(v) for v in raw.split(",") if v.strip()]
    if key in _BOOL_KEYS:
        low = raw.strip().lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ValueError(f"not a boolean: {raw}")
        return low in ("true", "yes", "1")
    return raw.strip()


def parse_config(text: str) -> RunConfig:
    """Parse the INI-style run file; unknown sections or keys are errors."""
    parser = configparser.ConfigParser(comment_prefixes=("#", ";"), inline_comment_prefixes=None,
                                       interpolation=None, strict=True)
    parser.optionxform = str
    lines = text.splitlines()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ConfigError(str(exc).splitlines()[0], line) from exc

    cfg = RunConfig()
    if parser.defaults():
        raise ConfigError("keys outside a section are not allowed")
    for section in parser.sections():
        if section == "run":
            for key, raw in parser.items(section):
                if key != "name":
                    raise ConfigError(f"unknown key '{key}' in [run]", _locate(lines, section, key))
                cfg.name = raw.strip()
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]", _locate(lines, section))
        target = getattr(cfg, section)
        allowed = {f.name for f in fields(target)}
        for key, raw in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"unknown key '{key}' in [{section}]", _locate(lines, section, key))
            try:
                setattr(target, key, _convert(key, raw))
            except ValueError as exc:
                raise ConfigError(f"bad value for '{key}': {exc}", _locate(lines, section, key)) from exc
    return cfg


def load_config(path: Union[str, Path]) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_format(v) for v in value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text; parse_config(serialize_config(c)) == c."""
    out = ["[run]", f"name = {cfg.name}", ""]
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        out.append(f"[{section}]")
        for f in fields(obj):
            value = getattr(obj, f.name)
            if value is None or (isinstance(value, list) and not value):
                continue
            out.append(f"{f.name} = {_format(value)}")
        out.append("")
    return "\n".join(out)


__all__ = [
    "Settings",
    "ConfigError",
    "RunConfig",
    "ProblemConfig",
    "SolverConfig",
    "StudyConfig",
    "OutputConfig",
    "configure_logging",
    "parse_call",
    "parse_config",
    "load_config",
    "serialize_config",
]
