"""Output files: trajectory CSV, ensemble JSON and condition reports.

Every file starts with (CSV) or contains (JSON) the config echo, so a file
is enough to reproduce itself.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from noncollide.conditions import ConditionReport
from noncollide.config import OUTPUT_DIR
from noncollide.integrate import EnsembleStats, Trajectory
from noncollide.run_config import RunConfig

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def default_path(cfg: RunConfig, command: str) -> Path:
    """Where a command writes when neither --out nor output.path is given."""
    if cfg.output.path:
        return Path(cfg.output.path)
    suffix = "csv" if command == "run" else "json"
    return OUTPUT_DIR / f"{command}_{cfg.system.kind}_p{cfg.p}_seed{cfg.seed}.{suffix}"


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """Columns t, x1..xp, minGap, VN; one row per sample."""
    columns = {"t": traj.times}
    for i in range(traj.p):
        columns[f"x{i + 1}"] = traj.states[:, i]
    columns["minGap"] = traj.min_gaps
    columns["VN"] = traj.vandermonde
    return pd.DataFrame(columns)


def write_trajectory_csv(traj: Trajectory, cfg: RunConfig, path: Union[str, Path]) -> Path:
    """Write the trajectory with the config echo as leading comment lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for line in cfg.echo_lines():
            f.write(line + "\n")
        trajectory_frame(traj).to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Trajectory written to {path} ({traj.states.shape[0]} samples)")
    return path


def read_trajectory_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def to_plain(value: Any) -> Any:
    """JSON-safe copy: arrays to lists, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_ensemble_json(stats: EnsembleStats, cfg: RunConfig, path: Union[str, Path],
                        extra: Optional[Dict[str, Any]] = None) -> Path:
    """Write ensemble statistics, the config echo and any extra sections."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"config_echo": cfg.echo(), **stats.to_dict()}
    if extra:
        document.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_plain(document), f, indent=2)
        f.write("\n")
    logger.info(f"Ensemble statistics written to {path} ({stats.n_paths} paths)")
    return path


def report_json(report: ConditionReport) -> str:
    return json.dumps(to_plain(report.model_dump(mode="python")), indent=2)
