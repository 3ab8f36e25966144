"""Time stepping of particle systems.

Two Euler-Maruyama schemes share one noise path:

- Direct steps the singular system in x and re-sorts the result.
- PolySpace steps y = e(x), whose coefficients stay finite at collisions,
  and recovers x as the ordered real roots of the polynomial encoded by y.

Hybrid uses PolySpace while the smallest gap is below hybrid_switch_gap and
Direct otherwise, so colliding and fully degenerate starts are integrable.

All stepping is vectorised over a batch of paths; a single trajectory is a
batch of one, so a one-path ensemble reproduces simulate exactly.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from noncollide.coefficients import DOMAIN_BOUNDS, CoefficientSet, singular_drift_all
from noncollide.config import (
    DEFAULT_DT,
    DEFAULT_GAP_FLOOR,
    DEFAULT_NONREAL_REPAIR,
    DEFAULT_SAMPLE_EVERY,
    ENSEMBLE_CHUNK_SIZE,
    ENSEMBLE_WORKERS,
    EXPLOSION_BOUND,
    HYBRID_SWITCH_FACTOR,
    MAX_ADAPTIVE_SUBSTEPS,
    NOISE_BLOCK_STEPS,
    NONREAL_ABORT_FLOOR,
    NONREAL_ABORT_SQRT_DT_FACTOR,
    SINGULARITY_REL_GAP,
)
from noncollide.errors import ExplosionError, NonRealRoots, PathError
from noncollide.sympoly import (
    default_root_tol,
    elem_sym,
    min_gap,
    poly_coefficients,
    recover_roots,
    squared_gaps,
)
from noncollide.utils.noise import NoisePath, bridge_increments, draw_batch

logger = logging.getLogger(__name__)

Scheme = Literal["Direct", "PolySpace", "Hybrid"]

EVENT_KINDS = ("gap_floor_hit", "clamped", "scheme_switch", "nonreal_roots_repaired", "reordered")
_EVENT_INDEX = {kind: k for k, kind in enumerate(EVENT_KINDS)}


# ==================== Step control ====================

class StepControl(BaseModel):
    """Time step, scheme choice and repair policy of a run."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    dt_base: float = Field(default=DEFAULT_DT, gt=0)
    adaptive: bool = False
    gap_floor: float = Field(default=DEFAULT_GAP_FLOOR, gt=0)
    scheme: Scheme = "Hybrid"
    hybrid_switch_gap: Optional[float] = Field(default=None, gt=0)
    repair: Literal["reflect", "collapse"] = DEFAULT_NONREAL_REPAIR
    sample_every: int = Field(default=DEFAULT_SAMPLE_EVERY, ge=1)

    @model_validator(mode="after")
    def _check_gaps(self) -> "StepControl":
        if self.scheme == "Hybrid" and not self.gap_floor < self.switch_gap:
            raise ValueError(f"gap_floor {self.gap_floor} must be below hybrid_switch_gap {self.switch_gap}")
        return self

    @property
    def switch_gap(self) -> float:
        """hybrid_switch_gap, defaulting to HYBRID_SWITCH_FACTOR * sqrt(dt_base)."""
        if self.hybrid_switch_gap is not None:
            return self.hybrid_switch_gap
        return HYBRID_SWITCH_FACTOR * math.sqrt(self.dt_base)

    @property
    def nonreal_abort_tol(self) -> float:
        """Imaginary part, relative to max(1, |y|), beyond which a path aborts."""
        return max(NONREAL_ABORT_FLOOR, NONREAL_ABORT_SQRT_DT_FACTOR * math.sqrt(self.dt_base))


# ==================== Results ====================

class Event(NamedTuple):
    time: float
    kind: str


class Trajectory(BaseModel):
    """Sampled states of one path."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    states: np.ndarray  # (n_samples, p), each row ascending
    poly_states: Optional[np.ndarray] = None
    events: List[Event] = Field(default_factory=list)
    step_counts: Dict[str, int] = Field(default_factory=dict)
    dt: float
    scheme: Scheme

    @property
    def p(self) -> int:
        return int(self.states.shape[1])

    @property
    def min_gaps(self) -> np.ndarray:
        return min_gap(self.states)

    @property
    def vandermonde(self) -> np.ndarray:
        """Squared Vandermonde determinant V_N at every sample."""
        return np.prod(squared_gaps(self.states), axis=-1)

    def event_counts(self) -> Dict[str, int]:
        counts = {kind: 0 for kind in EVENT_KINDS}
        for event in self.events:
            counts[event.kind] += 1
        return counts


class _RowError(Exception):
    """A batch row failed; carries the row and the original error."""

    def __init__(self, row: int, error: Exception):
        super().__init__(str(error))
        self.row = row
        self.error = error


# ==================== Single steps ====================

def _direct_update(cs: CoefficientSet, x: np.ndarray, dW: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    raw = x + cs.sigma_values(x) * dW + singular_drift_all(cs, x) * dt
    out = np.sort(raw, axis=-1)
    return out, np.any(out != raw, axis=-1)


def _singular_row(cs: CoefficientSet, x: np.ndarray) -> int:
    """First row of a batch whose singular drift cannot be evaluated."""
    for row in range(x.shape[0]):
        try:
            singular_drift_all(cs, x[row])
        except ArithmeticError:
            return row
    return 0


def _explosion_rows(values: np.ndarray) -> np.ndarray:
    return ~np.all(np.isfinite(values), axis=-1) | (np.max(np.abs(values), axis=-1) > EXPLOSION_BOUND)


def _poly_update(cs: CoefficientSet, x: np.ndarray, y: np.ndarray, dW: np.ndarray, dt: float,
                 repair: str, abort_tol: float, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Euler step of dy = J diag(sigma) dW + q dt and root recovery.

    Returns:
        (y', x', repaired) where repaired marks rows whose roots left the
        real line by more than round-off
    """
    J, q, sigma = poly_coefficients(cs, x)
    y_new = y + np.einsum("...ni,...i->...n", J, sigma * dW) + q * dt
    blown = _explosion_rows(y_new)
    if np.any(blown):
        row = int(np.argmax(blown))
        raise _RowError(row, ExplosionError(f"polynomial state left every bounded region at t={t:.6g}", time=t))

    rec = recover_roots(y_new, np.inf, policy=repair)
    scale = np.maximum(1.0, np.linalg.norm(y_new, axis=-1))
    bad = rec.max_imag > abort_tol * scale
    if np.any(bad):
        row = int(np.argmax(bad))
        imag, tol = float(rec.max_imag[row]), float(abort_tol * scale[row])
        raise _RowError(row, NonRealRoots(
            f"imaginary part {imag:.3e} exceeds {tol:.3e} at t={t:.6g}; reduce dt", imag=imag, tol=tol))

    touched = rec.max_imag > 0.0
    if np.any(touched):
        # project back onto polynomials with real roots
        y_new = np.where(touched[..., None], elem_sym(rec.x), y_new)
    return y_new, rec.x, rec.max_imag > default_root_tol(y_new)


def step_direct(cs: CoefficientSet, x, dt: float, dW) -> np.ndarray:
    """One Euler-Maruyama step of the singular system.

    Args:
        cs: Coefficient set
        x: Strictly ordered state(s), shape (..., p)
        dt: Time step
        dW: Brownian increments over dt (variance dt), shape (..., p)

    Returns:
        The new state, sorted ascending and clamped to the domain

    Raises:
        SingularityError: a gap with an active kernel is numerically zero
    """
    x = np.asarray(x, dtype=float)
    new, _ = _direct_update(cs, x, np.asarray(dW, dtype=float), dt)
    clamped, _ = cs.clamp(new)
    return clamped


def step_poly(cs: CoefficientSet, y, dt: float, dW, repair: str = DEFAULT_NONREAL_REPAIR,
              abort_tol: Optional[float] = None) -> np.ndarray:
    """One Euler-Maruyama step of the polynomial-space SDE.

    The noise enters as sum_i sigma_i(x_i) J[n, i] dW_i with the same
    increments that would drive step_direct.

    Args:
        cs: Coefficient set
        y: Poly point(s), shape (..., p)
        dt: Time step
        dW: Brownian increments over dt (variance dt), shape (..., p)
        repair: Conjugate-pair repair policy used when recovering x from y
        abort_tol: Imaginary-part tolerance relative to max(1, |y|)
            (default: the StepControl rule for dt)

    Returns:
        The new poly point

    Raises:
        NonRealRoots: y is too far from polynomials with real roots
    """
    y = np.asarray(y, dtype=float)
    if abort_tol is None:
        abort_tol = max(NONREAL_ABORT_FLOOR, NONREAL_ABORT_SQRT_DT_FACTOR * math.sqrt(dt))
    tol = abort_tol * np.maximum(1.0, np.linalg.norm(y, axis=-1))
    x = recover_roots(y, tol, policy=repair).x
    J, q, sigma = poly_coefficients(cs, x)
    return y + np.einsum("...ni,...i->...n", J, sigma * np.asarray(dW, dtype=float)) + q * dt


# ==================== Batched runner ====================

Observer = Callable[[int, float, np.ndarray, np.ndarray], None]


def _step_count(T: float, dt: float) -> int:
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(1.0, T):
        logger.warning(f"T={T} is not a multiple of dt={dt}; integrating to {n * dt}")
    return n


def initial_state(cs: CoefficientSet, x0) -> np.ndarray:
    """Validate a starting point: p finite, ascending values inside the domain."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (cs.p,):
        raise ValueError(f"x0 must have {cs.p} entries, got shape {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    if np.any(np.diff(x0) < 0):
        raise ValueError("x0 must be sorted ascending (closed chamber)")
    lo, hi = DOMAIN_BOUNDS[cs.domain]
    if x0[0] < lo or x0[-1] > hi:
        raise ValueError(f"x0 lies outside the {cs.domain} domain [{lo}, {hi}]")
    return x0


class _Batch:
    """State of B paths advanced in lockstep."""

    def __init__(self, cs: CoefficientSet, ctl: StepControl, x0: np.ndarray, noises: Sequence[NoisePath],
                 record_events: bool = False):
        self.cs = cs
        self.ctl = ctl
        self.noises = list(noises)
        B = len(self.noises)
        self.x = np.tile(x0, (B, 1))
        self.y = elem_sym(self.x)
        self.on_poly = np.zeros(B, dtype=bool)
        self.started = False
        self.counts = np.zeros((B, len(EVENT_KINDS)), dtype=np.int64)
        self.steps = np.zeros((B, 2), dtype=np.int64)  # direct, poly
        self.events: Optional[List[List[Event]]] = [[] for _ in range(B)] if record_events else None

    def _note(self, kind: str, rows: np.ndarray, t: float) -> None:
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        if rows.size == 0:
            return
        np.add.at(self.counts[:, _EVENT_INDEX[kind]], rows, 1)
        if self.events is not None:
            for r in rows:
                self.events[r].append(Event(t, kind))

    def _floor(self, x: np.ndarray) -> np.ndarray:
        scale = np.maximum(1.0, np.max(np.abs(x), axis=-1))
        return np.maximum(self.ctl.gap_floor, 10.0 * SINGULARITY_REL_GAP * scale)

    def _poly(self, rows: np.ndarray, x, y, dW, dt: float, t: float):
        try:
            y_new, x_new, repaired = _poly_update(self.cs, x, y, dW, dt, self.ctl.repair,
                                                  self.ctl.nonreal_abort_tol, t)
        except _RowError as e:
            raise _RowError(int(rows[e.row]), e.error) from None
        self._note("nonreal_roots_repaired", rows[repaired], t)
        return y_new, x_new

    def _substeps(self, gaps: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            ratio = (self.ctl.switch_gap / gaps) ** 2
        return np.clip(np.ceil(ratio), 1, MAX_ADAPTIVE_SUBSTEPS).astype(int)

    def _refine(self, row: int, dW: np.ndarray, n_sub: int, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Adaptive substeps of one path along a Brownian bridge."""
        dt = self.ctl.dt_base
        h = dt / n_sub
        pieces = bridge_increments(dW, dt, n_sub, self.noises[row].refinement)
        rows = np.array([row])
        x, y = self.x[rows], self.y[rows]
        for piece in pieces:
            if min_gap(x)[0] < self._floor(x)[0]:
                self._note("gap_floor_hit", rows, t)
                y, x = self._poly(rows, x, y, piece[None], h, t)
            else:
                x, reordered = _direct_update(self.cs, x, piece[None], h)
                self._note("reordered", rows[reordered], t)
                y = elem_sym(x)
            x, moved = self.cs.clamp(x)
            if moved[0]:
                y = elem_sym(x)
        return x[0], y[0]

    def advance(self, dW: np.ndarray, t: float) -> None:
        ctl, cs = self.ctl, self.cs
        dt = ctl.dt_base
        x, y = self.x, self.y
        gaps = min_gap(x)
        too_close = gaps < self._floor(x)
        if ctl.scheme == "PolySpace":
            poly = np.ones(x.shape[0], dtype=bool)
        elif ctl.scheme == "Hybrid":
            poly = (gaps < ctl.switch_gap) | too_close
        else:
            poly = too_close
            self._note("gap_floor_hit", too_close, t)

        new_x, new_y = x.copy(), y.copy()
        rows = np.flatnonzero(poly)
        if rows.size:
            new_y[rows], new_x[rows] = self._poly(rows, x[rows], y[rows], dW[rows], dt, t)

        rows = np.flatnonzero(~poly)
        if rows.size:
            n_sub = self._substeps(gaps[rows]) if ctl.adaptive else np.ones(rows.size, dtype=int)
            plain = rows[n_sub == 1]
            if plain.size:
                try:
                    xd, reordered = _direct_update(cs, x[plain], dW[plain], dt)
                except ArithmeticError as e:
                    raise _RowError(int(plain[_singular_row(cs, x[plain])]), e) from None
                new_x[plain] = xd
                new_y[plain] = elem_sym(xd)
                self._note("reordered", plain[reordered], t)
            for row, n in zip(rows[n_sub > 1], n_sub[n_sub > 1]):
                new_x[row], new_y[row] = self._refine(int(row), dW[row], int(n), t)

        new_x, moved = cs.clamp(new_x)
        if np.any(moved):
            new_y[moved] = elem_sym(new_x[moved])
            self._note("clamped", moved, t)

        blown = _explosion_rows(new_x)
        if np.any(blown):
            row = int(np.argmax(blown))
            raise _RowError(row, ExplosionError(f"state left every bounded region at t={t:.6g}", time=t))

        if self.started:
            self._note("scheme_switch", poly != self.on_poly, t)
        self.on_poly = poly
        self.started = True
        self.steps[poly, 1] += 1
        self.steps[~poly, 0] += 1
        self.x, self.y = new_x, new_y

    def run(self, T: float, observe: Observer) -> List[float]:
        """Integrate to T, calling observe at every sample step.

        Returns:
            The sample times
        """
        dt = self.ctl.dt_base
        every = self.ctl.sample_every
        n_steps = _step_count(T, dt)
        sqrt_dt = math.sqrt(dt)
        times = [0.0]
        observe(0, 0.0, self.x, self.y)
        k = 0
        while k < n_steps:
            block = min(NOISE_BLOCK_STEPS, n_steps - k)
            Z = draw_batch(self.noises, block)
            for s in range(block):
                k += 1
                t = k * dt
                self.advance(Z[s] * sqrt_dt, t)
                if k % every == 0 or k == n_steps:
                    times.append(t)
                    observe(len(times) - 1, t, self.x, self.y)
        return times


def simulate(cs: CoefficientSet, x0, T: float, ctl: StepControl, noise: NoisePath,
             record_poly: bool = False) -> Trajectory:
    """Integrate one path from x0 to T.

    Args:
        cs: Coefficient set
        x0: Starting point in the closed chamber (ties allowed)
        T: Final time
        ctl: Step control
        noise: Increment stream of this path
        record_poly: Also keep y = e(x) at every sample

    Returns:
        Trajectory sampled every ctl.sample_every steps and at T

    Raises:
        NonRealRoots: root recovery failed beyond the abort tolerance
        ExplosionError: the state became non-finite
    """
    x0 = initial_state(cs, x0)
    states: List[np.ndarray] = []
    polys: List[np.ndarray] = []

    def observe(k: int, t: float, x: np.ndarray, y: np.ndarray) -> None:
        states.append(x[0].copy())
        if record_poly:
            polys.append(y[0].copy())

    batch = _Batch(cs, ctl, x0, [noise], record_events=True)
    try:
        times = batch.run(T, observe)
    except _RowError as e:
        raise e.error from None

    trajectory = Trajectory(
        times=np.asarray(times),
        states=np.asarray(states),
        poly_states=np.asarray(polys) if record_poly else None,
        events=batch.events[0],
        step_counts={"Direct": int(batch.steps[0, 0]), "PolySpace": int(batch.steps[0, 1])},
        dt=ctl.dt_base,
        scheme=ctl.scheme,
    )
    logger.debug(f"Path {noise.stream}: {trajectory.step_counts}, events {trajectory.event_counts()}")
    return trajectory


def simulate_paths(cs: CoefficientSet, x0, T: float, ctl: StepControl,
                   noises: Sequence[NoisePath]) -> Tuple[np.ndarray, np.ndarray]:
    """Integrate several paths in lockstep and keep every sampled state.

    Returns:
        (times, states) with states of shape (n_samples, len(noises), p)

    Raises:
        PathError: a path failed; path_index is its position in noises
    """
    x0 = initial_state(cs, x0)
    states: List[np.ndarray] = []

    def observe(k: int, t: float, x: np.ndarray, y: np.ndarray) -> None:
        states.append(x.copy())

    batch = _Batch(cs, ctl, x0, noises)
    try:
        times = batch.run(T, observe)
    except _RowError as e:
        raise PathError(e.row, e.error) from None
    return np.asarray(times), np.stack(states)


# ==================== Ensembles ====================

class _Moments(NamedTuple):
    n: int
    mean: np.ndarray
    m2: np.ndarray  # sum of squared deviations

    @classmethod
    def of(cls, values: np.ndarray) -> "_Moments":
        mean = values.mean(axis=1)
        return cls(values.shape[1], mean, ((values - mean[:, None]) ** 2).sum(axis=1))

    def merge(self, other: "_Moments") -> "_Moments":
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + delta ** 2 * (self.n * other.n / n)
        return _Moments(n, mean, m2)


def _observables(x: np.ndarray) -> Dict[str, np.ndarray]:
    """Per-path observables at one sample, each with leading axis B."""
    obs = {"x": x, "e1": x.sum(axis=-1), "R": (x ** 2).sum(axis=-1)}
    if x.shape[-1] >= 2:
        gaps = min_gap(x)
        obs["min_gap"] = gaps
        obs["V_N"] = np.prod(squared_gaps(x), axis=-1)
        obs["gap_positive"] = (gaps > 0).astype(float)
    return obs


class _ChunkResult(NamedTuple):
    times: np.ndarray
    moments: Dict[str, _Moments]
    counts: np.ndarray
    steps: np.ndarray
    final: np.ndarray
    path_min_gap: np.ndarray
    path_min_vn: np.ndarray


def _run_chunk(cs: CoefficientSet, x0: np.ndarray, T: float, ctl: StepControl, base_seed: int,
               start: int, stop: int, watch_from: int = 1) -> _ChunkResult:
    noises = [NoisePath.for_path(base_seed, k, cs.p) for k in range(start, stop)]
    B = stop - start
    samples: Dict[str, List[np.ndarray]] = {}
    path_min_gap = np.full(B, np.inf)
    path_min_vn = np.full(B, np.inf)

    def observe(k: int, t: float, x: np.ndarray, y: np.ndarray) -> None:
        for key, value in _observables(x).items():
            samples.setdefault(key, []).append(value)
        if k >= watch_from and x.shape[-1] >= 2:
            np.minimum(path_min_gap, min_gap(x), out=path_min_gap)
            np.minimum(path_min_vn, np.prod(squared_gaps(x), axis=-1), out=path_min_vn)

    batch = _Batch(cs, ctl, x0, noises)
    try:
        times = batch.run(T, observe)
    except _RowError as e:
        raise PathError(start + e.row, e.error) from None

    moments = {key: _Moments.of(np.stack(values)) for key, values in samples.items()}
    return _ChunkResult(np.asarray(times), moments, batch.counts.sum(axis=0), batch.steps.sum(axis=0),
                        batch.x.copy(), path_min_gap, path_min_vn)


def _run_chunk_args(args: tuple) -> _ChunkResult:
    return _run_chunk(*args)


class EnsembleStats(BaseModel):
    """Sample-time statistics of an ensemble, reduced in a fixed order."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    n_paths: int
    base_seed: int
    mean: Dict[str, np.ndarray]
    std: Dict[str, np.ndarray]
    stderr: Dict[str, np.ndarray]
    event_counts: Dict[str, int]
    step_counts: Dict[str, int]
    final_states: np.ndarray  # (n_paths, p)
    path_min_gap: np.ndarray  # min over samples from watch_from on
    path_min_vn: np.ndarray

    def index_at(self, t: float) -> int:
        """Index of the sample time closest to t."""
        return int(np.argmin(np.abs(self.times - t)))

    def to_dict(self) -> Dict[str, object]:
        def plain(values: Dict[str, np.ndarray]) -> Dict[str, list]:
            return {key: value.tolist() for key, value in values.items()}

        return {
            "n_paths": self.n_paths,
            "base_seed": self.base_seed,
            "times": self.times.tolist(),
            "mean": plain(self.mean),
            "std": plain(self.std),
            "stderr": plain(self.stderr),
            "event_counts": self.event_counts,
            "step_counts": self.step_counts,
            "min_gap_over_paths": float(np.min(self.path_min_gap)) if self.path_min_gap.size else None,
            "min_vandermonde_over_paths": float(np.min(self.path_min_vn)) if self.path_min_vn.size else None,
        }


def simulate_ensemble(cs: CoefficientSet, x0, T: float, ctl: StepControl, n_paths: int, base_seed: int,
                      workers: Optional[int] = None, chunk_size: int = ENSEMBLE_CHUNK_SIZE,
                      watch_from: int = 1) -> EnsembleStats:
    """Run n_paths independent paths and aggregate their statistics.

    Path k is driven by NoisePath.for_path(base_seed, k, p). Paths are
    grouped in chunks of fixed size and chunk statistics are merged in chunk
    order, so the result does not depend on the worker count.

    Args:
        cs: Coefficient set
        x0: Common starting point
        T: Final time
        ctl: Step control
        n_paths: Number of paths (>= 1)
        base_seed: Seed of the whole ensemble
        workers: Worker processes (default: ENSEMBLE_WORKERS)
        chunk_size: Paths per chunk
        watch_from: First sample index counted in path_min_gap and path_min_vn

    Returns:
        EnsembleStats

    Raises:
        PathError: a path failed; carries its index and the original error
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if watch_from < 1:
        raise ValueError(f"watch_from must be >= 1, got {watch_from}")
    x0 = initial_state(cs, x0)
    workers = ENSEMBLE_WORKERS if workers is None else workers
    jobs = [(cs, x0, T, ctl, base_seed, start, min(start + chunk_size, n_paths), watch_from)
            for start in range(0, n_paths, chunk_size)]
    logger.info(f"Ensemble of {n_paths} paths ({len(jobs)} chunks, {workers} workers), "
                f"scheme {ctl.scheme}, dt {ctl.dt_base}")

    if workers <= 1 or len(jobs) == 1:
        results = [_run_chunk_args(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk_args, jobs))

    moments = dict(results[0].moments)
    for result in results[1:]:
        moments = {key: moments[key].merge(result.moments[key]) for key in moments}

    mean, std, stderr = {}, {}, {}
    for key, m in moments.items():
        mean[key] = m.mean
        std[key] = np.sqrt(m.m2 / (m.n - 1)) if m.n > 1 else np.zeros_like(m.m2)
        stderr[key] = std[key] / math.sqrt(m.n)

    counts = sum(r.counts for r in results)
    steps = sum(r.steps for r in results)
    stats = EnsembleStats(
        times=results[0].times,
        n_paths=n_paths,
        base_seed=base_seed,
        mean=mean,
        std=std,
        stderr=stderr,
        event_counts={kind: int(counts[k]) for k, kind in enumerate(EVENT_KINDS)},
        step_counts={"Direct": int(steps[0]), "PolySpace": int(steps[1])},
        final_states=np.concatenate([r.final for r in results]),
        path_min_gap=np.concatenate([r.path_min_gap for r in results]),
        path_min_vn=np.concatenate([r.path_min_vn for r in results]),
    )
    logger.info(f"Ensemble done: steps {stats.step_counts}, events {stats.event_counts}")
    return stats
