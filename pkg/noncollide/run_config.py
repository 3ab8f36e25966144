"""Run configuration: one self-describing YAML file per run.

A config names the system, the start, the time grid, the step control and
the seed. The resolved config is echoed into every output file, and the
echo parses back into the same config.
"""

import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import AliasChoices, BaseModel, ConfigDict, Field, PrivateAttr, ValidationError

from noncollide.coefficients import DOMAIN_BOUNDS, CoefficientSet, SystemParams, build_system
from noncollide.config import (
    DEFAULT_DT,
    DEFAULT_GAP_FLOOR,
    DEFAULT_NONREAL_REPAIR,
    DEFAULT_SAMPLE_EVERY,
    DEFAULT_SEED,
)
from noncollide.errors import ConfigError
from noncollide.integrate import Scheme, StepControl

logger = logging.getLogger(__name__)

ECHO_PREFIX = "# config: "
_EQUISPACED = re.compile(r"^\s*equispaced\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)\s*$")

# Keys that are never echoed; they do not change any output value
_NOT_ECHOED = {"output", "workers"}


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Optional[str] = None
    format: Optional[Literal["csv", "json"]] = None


class RunConfig(BaseModel):
    """A validated run: system, start, grid, step control and seed."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False, populate_by_name=True)

    system: SystemParams
    p: int = Field(ge=1)
    x0: Union[List[float], str] = "zero"
    T: float = Field(ge=0)
    dt_base: float = Field(default=DEFAULT_DT, gt=0, validation_alias=AliasChoices("dt_base", "dt"))
    scheme: Scheme = "Hybrid"
    adaptive: bool = False
    gap_floor: float = Field(default=DEFAULT_GAP_FLOOR, gt=0)
    hybrid_switch_gap: Optional[float] = Field(default=None, gt=0)
    repair: Literal["reflect", "collapse"] = DEFAULT_NONREAL_REPAIR
    n_paths: int = Field(default=1, ge=1)
    seed: int = DEFAULT_SEED
    sample_every: int = Field(default=DEFAULT_SAMPLE_EVERY, ge=1)
    workers: Optional[int] = Field(default=None, ge=1)
    output: OutputSpec = Field(default_factory=OutputSpec)

    _seed_defaulted: bool = PrivateAttr(default=False)

    @property
    def seed_defaulted(self) -> bool:
        return self._seed_defaulted

    def step_control(self) -> StepControl:
        return StepControl(dt_base=self.dt_base, adaptive=self.adaptive, gap_floor=self.gap_floor,
                           scheme=self.scheme, hybrid_switch_gap=self.hybrid_switch_gap, repair=self.repair,
                           sample_every=self.sample_every)

    def coefficient_set(self) -> CoefficientSet:
        return build_system(self.system, self.p, allow_single=True)

    def initial_point(self) -> np.ndarray:
        return resolve_x0(self.x0, self.p)

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        """Copy with the seed overridden (None keeps it)."""
        if seed is None:
            return self
        return self.model_copy(update={"seed": int(seed)})

    def echo(self) -> str:
        """YAML of every field that determines the output, in field order."""
        data = self.model_dump(mode="json", exclude=_NOT_ECHOED)
        return yaml.safe_dump(data, sort_keys=False, default_flow_style=None)

    def echo_lines(self) -> List[str]:
        return [ECHO_PREFIX + line for line in self.echo().splitlines()]


# ==================== Parsing ====================

def resolve_x0(x0: Union[List[float], str], p: int) -> np.ndarray:
    """Turn a list, "zero" or "equispaced(a, b)" into p ascending values."""
    if isinstance(x0, str):
        if x0.strip() == "zero":
            return np.zeros(p)
        match = _EQUISPACED.match(x0)
        if not match:
            raise ValueError(f"x0 must be a list, 'zero' or 'equispaced(a, b)', got {x0!r}")
        a, b = float(match.group(1)), float(match.group(2))
        if not a < b and p > 1:
            raise ValueError(f"equispaced(a, b) needs a < b, got {x0!r}")
        return np.linspace(a, b, p) if p > 1 else np.array([a])
    values = np.asarray(x0, dtype=float)
    if values.shape != (p,):
        raise ValueError(f"x0 has {values.size} values but p = {p}")
    if np.any(np.diff(values) < 0):
        raise ValueError("x0 must be sorted ascending")
    return values


def _flatten_system(data: Dict[str, Any]) -> None:
    """Accept `system: <kind>` with the preset parameters beside it or under `params`."""
    system = data.get("system")
    if not isinstance(system, str):
        return
    params = data.pop("params", None)
    if params is None:
        params = {key: data.pop(key) for key in list(data) if key not in RunConfig.model_fields and key != "dt"}
    if not isinstance(params, dict):
        raise ConfigError(["params: must be a mapping of parameter names to values"])
    data["system"] = {"kind": system, **params}


_SYSTEM_TAGS = {"dyson", "nearest_neighbor", "beta_wishart", "beta_wishart_abs", "jacobi", "hyperbolic",
                "general_psi", "beta_family", "custom"}


def _format_errors(error: ValidationError) -> List[str]:
    errors = []
    for item in error.errors():
        # drop the discriminator tag pydantic inserts into union locations
        loc = [str(part) for part in item["loc"] if not (isinstance(part, str) and part in _SYSTEM_TAGS)]
        errors.append(f"{'.'.join(loc) or '<root>'}: {item['msg']}")
    return errors


def _cross_check(cfg: RunConfig) -> List[str]:
    """Checks that need several fields at once."""
    errors = []
    cs = None
    try:
        cs = cfg.coefficient_set()
    except ValueError as e:
        errors.append(f"system: {e}")

    try:
        x0 = cfg.initial_point()
    except ValueError as e:
        errors.append(f"x0: {e}")
    else:
        domain = cs.domain if cs is not None else getattr(cfg.system, "domain", "real")
        lo, hi = DOMAIN_BOUNDS.get(domain, DOMAIN_BOUNDS["real"])
        if x0.size and (x0[0] < lo or x0[-1] > hi):
            errors.append(f"x0: values must lie in the {domain} domain [{lo}, {hi}]")

    try:
        cfg.step_control()
    except ValidationError as e:
        errors.extend(_format_errors(e))

    steps = cfg.T / cfg.dt_base
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        errors.append(f"T: {cfg.T} is not a whole number of steps of dt_base {cfg.dt_base}")
    return errors


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a YAML run config.

    Args:
        text: YAML document

    Returns:
        RunConfig; a missing seed is filled with DEFAULT_SEED and marked

    Raises:
        ConfigError: lists every invalid key
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError([f"<yaml>: {e}"]) from e
    if not isinstance(data, dict):
        raise ConfigError(["<root>: the config must be a mapping of keys to values"])

    _flatten_system(data)
    seed_defaulted = "seed" not in data
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_errors(e)) from None

    errors = _cross_check(cfg)
    if errors:
        raise ConfigError(errors)

    cfg._seed_defaulted = seed_defaulted
    if seed_defaulted:
        logger.info(f"No seed given; using default seed {cfg.seed}")
    return cfg


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and parse a config file, or the config echoed into an output file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError([f"<file>: cannot read {path}: {e}"]) from e
    if text.startswith(ECHO_PREFIX):
        text = config_from_echo(text)
    elif path.suffix == ".json":
        try:
            text = json.loads(text)["config_echo"]
        except (ValueError, KeyError, TypeError) as e:
            raise ConfigError([f"<file>: {path} holds no config echo"]) from e
    return parse_config(text)


def config_from_echo(text: str) -> str:
    """Recover the YAML config from the echo lines of an output file."""
    lines = [line[len(ECHO_PREFIX):] for line in text.splitlines() if line.startswith(ECHO_PREFIX)]
    if not lines:
        raise ConfigError(["<file>: no config echo found"])
    return "\n".join(lines) + "\n"
