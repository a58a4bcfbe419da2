import hashlib
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

TOOL_NAME = "fracdnl"
TOOL_VERSION = "1.0.0"
FLOAT_FORMAT = "%.17g"


def _clean(obj: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def canonical_json(obj: Any) -> str:
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"), default=str)


def manifest_hash(obj: Any) -> str:
    """sha256 over canonical JSON."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def atomic_write_text(path: Path, text: str) -> None:
    """Write through a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def frame_to_csv(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


class ArtifactsManager:
    """Run folders holding CSV tables, the run manifest and a markdown report."""

    def __init__(self, base_dir: str = "runs"):
        self.base_dir = Path(base_dir)
        self.base_dir.mkdir(parents=True, exist_ok=True)
        self.current_run_dir: Optional[Path] = None
        self.run_name: Optional[str] = None
        self.manifest: Dict[str, Any] = {}

    def create_run(self, name: str, config_hash: str) -> Path:
        """Create <base>/<name>_<hash8>; the same config always maps to the same folder."""
        self.run_name = f"{name}_{config_hash[:8]}"
        self.current_run_dir = self.base_dir / self.run_name
        self.current_run_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "run": name,
            "config_hash": config_hash,
            "artifacts": {},
        }
        self._save_manifest()
        return self.current_run_dir

    def _require_run(self) -> Path:
        if not self.current_run_dir:
            raise ValueError("No active run. Call create_run first.")
        return self.current_run_dir

    def _save_manifest(self) -> None:
        if self.current_run_dir:
            atomic_write_text(self.current_run_dir / "manifest.json",
                              json.dumps(_clean(self.manifest), indent=2, sort_keys=True) + "\n")

    def update_manifest(self, **entries: Any) -> None:
        self._require_run()
        self.manifest.update(entries)
        self._save_manifest()

    def save_table(self, kind: str, df: pd.DataFrame, filename: Optional[str] = None) -> Path:
        """Write a CSV artifact and register it under `kind` in the manifest."""
        path = self._require_run() / (filename or f"{kind}.csv")
        atomic_write_text(path, frame_to_csv(df))
        self.manifest["artifacts"][kind] = path.name
        self._save_manifest()
        logger.debug("wrote %s (%d rows)", path, len(df))
        return path

    def save_trajectory(self, df: pd.DataFrame) -> Path:
        return self.save_table("trajectory", df)

    def save_nodal(self, df: pd.DataFrame, m: int) -> Path:
        return self.save_table(f"nodal_{m}", df, f"nodal_m{m:06d}.csv")

    def save_weights(self, df: pd.DataFrame) -> Path:
        return self.save_table("weights", df)

    def save_energy(self, df: pd.DataFrame) -> Path:
        return self.save_table("energy", df)

    def save_study(self, kind: str, df: pd.DataFrame) -> Path:
        return self.save_table(f"study_{kind}", df)

    def save_plot_data(self, df: pd.DataFrame) -> Path:
        return self.save_table("plot_data", df)

    def save_json(self, kind: str, payload: Dict[str, Any]) -> Path:
        path = self._require_run() / f"{kind}.json"
        atomic_write_text(path, json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")
        self.manifest["artifacts"][kind] = path.name
        self._save_manifest()
        return path

    def generate_report(self) -> str:
        """Markdown summary of the run, saved next to the manifest."""
        run_dir = self._require_run()
        m = self.manifest
        report = f"""# Run Report
## Run: {m.get('run')}
## Config hash: {m.get('config_hash')}
## Tool: {m.get('tool')} {m.get('version')}

"""
        constants = m.get("constants") or {}
        if constants:
            report += "## Constants\n"
            for key, val in constants.items():
                report += f"- **{key}**: {val}\n"
        status = m.get("status")
        if status:
            report += f"\n## Status\n- {status}\n"
        violations = m.get("violations") or []
        if violations:
            report += "\n## Validation\n"
            for v in violations:
                report += f"- [{v['severity']}] {v['code']}: {v['message']}\n"
        report += "\n## Artifacts\n"
        for kind, name in sorted(m.get("artifacts", {}).items()):
            report += f"- {kind}: `{name}`\n"
        atomic_write_text(run_dir / "report.md", report)
        return report

    def list_runs(self) -> List[Dict[str, Any]]:
        """All run folders under base_dir that carry a manifest."""
        runs = []
        for run_dir in sorted(self.base_dir.iterdir()):
            manifest_file = run_dir / "manifest.json"
            if run_dir.is_dir() and manifest_file.exists():
                with open(manifest_file, "r", encoding="utf-8") as f:
                    manifest = json.load(f)
                runs.append({
                    "name": run_dir.name,
                    "run": manifest.get("run"),
                    "config_hash": manifest.get("config_hash"),
                    "status": manifest.get("status"),
                    "artifacts": len(manifest.get("artifacts", {})),
                })
        return runs


def plot_frame(traj_frame: pd.DataFrame) -> pd.DataFrame:
    """Long format (t, series, value) of a trajectory table."""
    value_cols = [c for c in traj_frame.columns if c not in ("m", "t")]
    long = traj_frame.melt(id_vars=["t"], value_vars=value_cols, var_name="series", value_name="value")
    return long[["t", "series", "value"]]
