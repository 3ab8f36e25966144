"""Configuration module for noncollide.

Centralized defaults for all components. Every value can be overridden from
the environment (or a .env file in the working directory).
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Project Paths
PROJECT_ROOT = Path(__file__).parent.parent
CONFIGS_DIR = PROJECT_ROOT / "configs"
OUTPUT_DIR = Path(os.getenv("NONCOLLIDE_OUTPUT_DIR", str(PROJECT_ROOT / "output")))

# Numerical thresholds
SINGULARITY_REL_GAP = 1e-12  # |x_i - x_j| < this * max(1, |x_i|) is a collision
ROOT_COLLAPSE_REL_TOL = 1e-7  # conjugate-pair collapse, relative to max(1, ||y||)
NONREAL_ABORT_FLOOR = 1e-4
NONREAL_ABORT_SQRT_DT_FACTOR = float(os.getenv("NONCOLLIDE_NONREAL_FACTOR", "10.0"))
DEFAULT_NONREAL_REPAIR = os.getenv("NONCOLLIDE_NONREAL_REPAIR", "reflect")
EXPLOSION_BOUND = 1e150

# Integrator defaults
DEFAULT_SEED = int(os.getenv("NONCOLLIDE_SEED", "20240917"))
DEFAULT_DT = 1e-3
DEFAULT_GAP_FLOOR = 1e-10
HYBRID_SWITCH_FACTOR = 1e3  # hybrid_switch_gap = factor * sqrt(dt_base)
MAX_ADAPTIVE_SUBSTEPS = 64
NOISE_BLOCK_STEPS = 256  # rows drawn per generator call; fixed so streams never depend on request sizes
DEFAULT_SAMPLE_EVERY = 1

# Ensemble execution
ENSEMBLE_CHUNK_SIZE = 256  # must not depend on the worker count
ENSEMBLE_WORKERS = int(os.getenv("NONCOLLIDE_WORKERS", "1"))

# Condition checking
CHECK_GRID_N = 32
CHECK_TOL = 1e-9
CHECK_C_MAX = 1e6
NATURAL_BOX_HALF_WIDTH = 3.0
SYMMETRY_SAMPLES = 10_000
CHECK_SAMPLE_SEED = 0  # seeds every sampled check, so reports are reproducible
LOG_VANDERMONDE_MAX_POINTS = 5000
DEGENERATE_REFINE_FACTOR = 16  # scan grid for degenerate points is this much finer

# Logging Configuration
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_JSON = os.getenv("LOG_JSON", "false").lower() in ("1", "true", "yes")


def validate_config():
    """Validate that the configured defaults are usable."""
    errors = []

    if not 0 < DEFAULT_GAP_FLOOR < HYBRID_SWITCH_FACTOR * DEFAULT_DT ** 0.5:
        errors.append("DEFAULT_GAP_FLOOR must lie in (0, hybrid switch gap)")
    if DEFAULT_NONREAL_REPAIR not in ("reflect", "collapse"):
        errors.append(f"NONCOLLIDE_NONREAL_REPAIR must be reflect or collapse, got {DEFAULT_NONREAL_REPAIR!r}")
    if ENSEMBLE_WORKERS < 1:
        errors.append("NONCOLLIDE_WORKERS must be >= 1")
    if NONREAL_ABORT_SQRT_DT_FACTOR <= 0:
        errors.append("NONCOLLIDE_NONREAL_FACTOR must be positive")

    if errors:
        raise ValueError("Configuration errors:\n" + "\n".join(errors))


# Validate on import
try:
    validate_config()
except ValueError:
    # Import must succeed so the CLI can report the problem itself
    pass
