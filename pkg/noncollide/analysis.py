"""Statistical checks of simulated particle systems.

Collision and diffraction summaries of single trajectories, closed-form
moment laws checked against ensembles, a Brownian-matrix eigenvalue oracle
for beta in {1, 2}, two-sample Kolmogorov-Smirnov distances, and empirical
generator and cross-scheme estimates used by the acceptance suite.
"""

import logging
import math
from typing import List, Literal, Optional, Sequence

import numpy as np
from numpy.random import Generator, Philox, SeedSequence
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from noncollide.coefficients import CoefficientSet
from noncollide.errors import UnsupportedPresetError
from noncollide.integrate import EnsembleStats, StepControl, Trajectory, simulate_paths, step_direct
from noncollide.sympoly import gap_dynamics, gap_polys
from noncollide.utils.noise import NoisePath

logger = logging.getLogger(__name__)

Observable = Literal["R", "e1"]


# ==================== Collisions ====================

class DegenerateExit(BaseModel):
    """First sampled time at which a cluster started on a degenerate point breaks up."""

    point: float
    cluster_size: int
    exit_time: Optional[float] = None


class CollisionReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    min_gap_series: np.ndarray
    V_N_series: np.ndarray
    eps: float
    tol: float
    diffraction_time: Optional[float] = None  # None if the gap never exceeds eps
    collision_flag: bool
    degenerate_exits: List[DegenerateExit] = Field(default_factory=list)


def collision_report(traj: Trajectory, eps: float, tol: float,
                     degenerate: Optional[Sequence[float]] = None) -> CollisionReport:
    """Summarise the gap history of a trajectory.

    Args:
        traj: Sampled trajectory (non-empty)
        eps: Gap above which particles count as separated
        tol: Gap below which a sample counts as a collision
        degenerate: Degenerate points to track; a point gets an exit time
            when at least two particles start within eps of it

    Returns:
        CollisionReport; collision_flag looks only at samples after the first
    """
    if traj.states.shape[0] == 0:
        raise ValueError("trajectory has no samples")
    gaps = traj.min_gaps
    V = traj.vandermonde
    separated = np.flatnonzero(gaps > eps)
    diffraction = float(traj.times[separated[0]]) if separated.size else None
    collided = bool(np.any(gaps[1:] < tol))

    exits = []
    for point in degenerate or ():
        near = np.abs(traj.states - point) <= eps
        size = int(near[0].sum())
        if size < 2:
            continue
        left = np.flatnonzero(near[1:].sum(axis=1) <= 1)
        exits.append(DegenerateExit(point=float(point), cluster_size=size,
                                    exit_time=float(traj.times[left[0] + 1]) if left.size else None))

    if collided:
        logger.debug(f"Collision: min gap {gaps[1:].min():.3e} < {tol}")
    return CollisionReport(times=traj.times, min_gap_series=gaps, V_N_series=V, eps=eps, tol=tol,
                           diffraction_time=diffraction, collision_flag=collided, degenerate_exits=exits)


# ==================== Moment laws ====================

class MomentReport(BaseModel):
    observable: Observable
    t: float
    n_paths: int
    mean: float
    stderr: float
    predicted: float
    z: float
    bound: Optional[float] = None  # Gronwall bound on E[R_t], when a growth constant is given

    def within(self, k: float = 3.0) -> bool:
        return abs(self.z) <= k


def dyson_rate(p: int, gamma: float) -> float:
    """d/dt E[sum x_i^2] for unit noise, zero drift and constant kernel gamma."""
    return p + gamma * p * (p - 1)


def _unit_noise(tag) -> bool:
    return getattr(tag, "sigma", None) is None and getattr(tag, "b", None) is None


def predict_mean(cs: CoefficientSet, observable: Observable, x0, t: float) -> float:
    """Closed-form E[observable](t) from a deterministic start x0.

    Raises:
        UnsupportedPresetError: no closed form for this system and observable
    """
    tag = cs.preset_tag
    kind = cs.kind
    x0 = np.asarray(x0, dtype=float)
    p = cs.p
    R0, e0 = float(x0 @ x0), float(x0.sum())

    if observable == "R" and _unit_noise(tag):
        if kind == "dyson" or (kind == "general_psi" and tag.psi.kind == "inverse"):
            return R0 + dyson_rate(p, tag.gamma) * t
        if kind == "nearest_neighbor":
            return R0 + (p + 2.0 * tag.gamma * (p - 1)) * t

    if kind in ("beta_wishart", "beta_wishart_abs"):
        rate = tag.beta * p * tag.alpha
        if observable == "e1":
            return e0 + rate * t
        if kind == "beta_wishart":
            # dR = (4 + 2 beta alpha + 2 beta (p-1)) e_1 dt + martingale
            k = 4.0 + 2.0 * tag.beta * tag.alpha + 2.0 * tag.beta * (p - 1)
            return R0 + k * (e0 * t + 0.5 * rate * t * t)

    if kind == "jacobi" and observable == "e1":
        kappa = tag.beta * (tag.q + tag.r)
        if kappa == 0:
            return e0 + tag.beta * p * tag.q * t
        m = p * tag.q / (tag.q + tag.r)
        return m + (e0 - m) * math.exp(-kappa * t)

    raise UnsupportedPresetError(f"no closed-form {observable} moment for {kind}")


def default_observable(cs: CoefficientSet) -> Observable:
    return "e1" if cs.kind in ("beta_wishart", "beta_wishart_abs", "jacobi") else "R"


def gronwall_bound(R0: float, c: float, p: int, t: float) -> float:
    """Bound on E[R_t] from the growth constant c of every coordinate and pair."""
    return (1.0 + R0) * math.exp(c * p * p * t) - 1.0


def moment_report(ens: EnsembleStats, cs: CoefficientSet, t: float, x0=None,
                  observable: Optional[Observable] = None,
                  growth_constant: Optional[float] = None) -> MomentReport:
    """Compare the ensemble mean of R or e_1 at time t with its closed form.

    Args:
        ens: Ensemble statistics
        cs: Coefficient set the ensemble was run with
        t: Time (the nearest sample time is used)
        x0: Starting point (default: the mean state at t = 0)
        observable: "R" (sum of squares) or "e1" (trace); default per preset
        growth_constant: C2 constant; adds the Gronwall bound on E[R_t]

    Returns:
        MomentReport with z = (mean - predicted) / stderr

    Raises:
        UnsupportedPresetError: no closed-form prediction
    """
    observable = observable or default_observable(cs)
    k = ens.index_at(t)
    t_k = float(ens.times[k])
    start = ens.mean["x"][0] if x0 is None else np.asarray(x0, dtype=float)
    predicted = predict_mean(cs, observable, start, t_k)
    mean = float(ens.mean[observable][k])
    stderr = float(ens.stderr[observable][k])
    diff = mean - predicted
    if stderr > 0:
        z = diff / stderr
    else:
        z = 0.0 if abs(diff) <= 1e-12 * max(1.0, abs(predicted)) else math.copysign(math.inf, diff)

    bound = None
    if growth_constant is not None:
        bound = gronwall_bound(float(start @ start), growth_constant, cs.p, t_k)
    report = MomentReport(observable=observable, t=t_k, n_paths=ens.n_paths, mean=mean, stderr=stderr,
                          predicted=predicted, z=z, bound=bound)
    logger.info(f"E[{observable}]({t_k:g}) = {mean:.6g} +/- {stderr:.3g}, predicted {predicted:.6g} (z={z:.2f})")
    return report


# ==================== Matrix oracle ====================

class EigenSample(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    beta: Literal[1, 2]
    t: float
    offdiagonal_variance: float  # E|M_ij|^2 per unit time
    samples: np.ndarray  # (n, p), rows ascending

    def pooled(self) -> np.ndarray:
        return self.samples.ravel()


def calibrate_offdiagonal(beta: int, p: int) -> float:
    """Off-diagonal entry variance per unit time of the Brownian matrix.

    With unit diagonal variance, E tr M_t^2 = (p + p(p-1) v) t; matching the
    Dyson rate p + gamma p(p-1) at gamma = beta/2 fixes v.
    """
    if p < 2:
        return 0.0
    return (dyson_rate(p, beta / 2.0) - p) / (p * (p - 1))


def matrix_oracle(beta: int, p: int, t: float, n: int, seed: int) -> EigenSample:
    """Eigenvalues of the symmetric (beta=1) or Hermitian (beta=2) Brownian matrix at time t.

    Args:
        beta: 1 or 2
        p: Matrix size
        t: Time (>= 0)
        n: Number of independent samples
        seed: Generator seed

    Returns:
        EigenSample with n ascending eigenvalue vectors
    """
    if beta not in (1, 2):
        raise ValueError(f"matrix oracle needs beta in {{1, 2}}, got {beta}")
    if t < 0:
        raise ValueError("t must be >= 0")
    v = calibrate_offdiagonal(beta, p)
    rng = Generator(Philox(SeedSequence(seed)))
    iu = np.triu_indices(p, k=1)
    diag = rng.standard_normal((n, p)) * math.sqrt(t)

    if beta == 1:
        M = np.zeros((n, p, p))
        off = rng.standard_normal((n, len(iu[0]))) * math.sqrt(v * t)
    else:
        M = np.zeros((n, p, p), dtype=complex)
        parts = rng.standard_normal((n, len(iu[0]), 2)) * math.sqrt(v * t / 2.0)
        off = parts[..., 0] + 1j * parts[..., 1]
    M[:, iu[0], iu[1]] = off
    M = M + np.conj(np.swapaxes(M, -1, -2))
    M[:, np.arange(p), np.arange(p)] = diag

    samples = np.linalg.eigvalsh(M)
    logger.debug(f"Matrix oracle beta={beta}, p={p}, t={t}: {n} samples, off-diagonal variance {v}")
    return EigenSample(beta=beta, t=t, offdiagonal_variance=v, samples=samples)


# ==================== Distribution distances ====================

def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_distance needs two non-empty samples")
    pooled = np.concatenate([a, b])
    Fa = np.searchsorted(a, pooled, side="right") / a.size
    Fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(Fa - Fb)))


def ks_pvalue(a, b) -> float:
    """Asymptotic p-value of the two-sample test (scipy)."""
    return float(stats.ks_2samp(np.ravel(a), np.ravel(b)).pvalue)


# ==================== Generator and scheme checks ====================

class GeneratorEstimate(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    empirical: np.ndarray
    stderr: np.ndarray
    predicted: np.ndarray
    dt: float
    n: int

    @property
    def relative_error(self) -> np.ndarray:
        return np.abs(self.empirical - self.predicted) / np.maximum(np.abs(self.predicted), 1e-300)


def generator_estimate(cs: CoefficientSet, x, dt: float, n: int, seed: int,
                       chunk: int = 100_000) -> GeneratorEstimate:
    """One-step estimate of the drift of every gap polynomial at x.

    Uses antithetic pairs (dW, -dW), which cancel the martingale part to
    first order.
    """
    x = np.asarray(x, dtype=float)
    base = gap_polys(x)
    rng = Generator(Philox(SeedSequence(seed)))
    total = np.zeros_like(base)
    total_sq = np.zeros_like(base)
    done = 0
    while done < n:
        m = min(chunk, n - done)
        dW = rng.standard_normal((m, cs.p)) * math.sqrt(dt)
        X = np.broadcast_to(x, (m, cs.p))
        pair = 0.5 * (gap_polys(step_direct(cs, X, dt, dW)) + gap_polys(step_direct(cs, X, dt, -dW))) - base
        total += pair.sum(axis=0)
        total_sq += (pair ** 2).sum(axis=0)
        done += m
    mean = total / n
    var = np.maximum(total_sq / n - mean ** 2, 0.0)
    return GeneratorEstimate(empirical=mean / dt, stderr=np.sqrt(var / n) / dt,
                             predicted=gap_dynamics(cs, x).D, dt=dt, n=n)


def scheme_difference(cs: CoefficientSet, x0, T: float, dt_fine: float, coarsen: int, n_paths: int,
                      seed: int) -> float:
    """Mean over paths of sup_t |x_Direct - x_PolySpace| at step coarsen * dt_fine.

    Both schemes follow the same Brownian path for every step size.
    """
    dt = dt_fine * coarsen
    runs = []
    for scheme in ("Direct", "PolySpace"):
        noises = [NoisePath(seed, cs.p, (k,), coarsen=coarsen) for k in range(n_paths)]
        runs.append(simulate_paths(cs, x0, T, StepControl(dt_base=dt, scheme=scheme), noises)[1])
    sups = np.max(np.abs(runs[0] - runs[1]), axis=(0, 2))
    logger.debug(f"Scheme difference at dt={dt:g}: {sups.mean():.4g} over {n_paths} paths")
    return float(sups.mean())


def self_convergence(cs: CoefficientSet, x0, T: float, dt_fine: float, coarsen: int, n_paths: int,
                     seed: int) -> float:
    """Ratio e(dt) / e(dt/2) for the Direct scheme at dt = coarsen * dt_fine.

    e(h) is the mean over paths of sup_t |x_h - x_{h/2}| on the grid of dt,
    with every step size driven by the same Brownian path. Strong order 1/2
    gives about sqrt(2), order 1 about 2.

    Raises:
        ValueError: coarsen is not a positive multiple of 4
    """
    if coarsen < 4 or coarsen % 4:
        raise ValueError(f"coarsen must be a positive multiple of 4, got {coarsen}")
    runs = []
    for level in (1, 2, 4):
        noises = [NoisePath(seed, cs.p, (k,), coarsen=coarsen // level) for k in range(n_paths)]
        ctl = StepControl(dt_base=dt_fine * coarsen / level, scheme="Direct", sample_every=level)
        runs.append(simulate_paths(cs, x0, T, ctl, noises)[1])
    errors = [float(np.max(np.abs(a - b), axis=(0, 2)).mean()) for a, b in zip(runs, runs[1:])]
    logger.debug(f"Self-convergence at dt={dt_fine * coarsen:g}: errors {errors[0]:.4g}, {errors[1]:.4g} "
                 f"over {n_paths} paths")
    return errors[0] / errors[1]
