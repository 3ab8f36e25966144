"""Elementary symmetric polynomials and the regularised polynomial-space SDE.

The map e: x -> (e_1(x), ..., e_p(x)) sends ordered particle vectors to the
coefficients of the monic polynomial with the particles as roots. Written in
y = e(x) the singular system becomes an SDE with continuous coefficients,
which is what lets trajectories start from colliding states. The squared
gaps (x_i - x_j)^2 give a second family of symmetric polynomials, the gap
polynomials V_n, whose drift and quadratic variation describe collisions.

All functions accept a leading batch dimension unless stated otherwise.
Polynomial coefficients are computed with prefix/suffix expansions of
prod (1 + x_i z), never by enumerating subsets.
"""

import logging
from itertools import combinations
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from noncollide.coefficients import CoefficientSet
from noncollide.config import ROOT_COLLAPSE_REL_TOL, SINGULARITY_REL_GAP
from noncollide.errors import NonRealRoots, SingularityError

logger = logging.getLogger(__name__)


class PolyDynamics(NamedTuple):
    """Coefficients of dy_n = a_n dU_n + q_n dt at a chamber point."""

    a: np.ndarray  # (..., p)
    q: np.ndarray  # (..., p)
    S: np.ndarray  # (..., p, p) covariance rates
    J: np.ndarray  # (..., p, p), J[n, i] = e_{n-1}^{(i)}(x)


class GapDynamics(NamedTuple):
    """Gap polynomials with their drift and quadratic-variation rates."""

    V: np.ndarray
    D: np.ndarray
    QV: np.ndarray


class RootRecovery(NamedTuple):
    x: np.ndarray  # (..., p) ascending real roots
    repaired: np.ndarray  # (...,) bool, a conjugate pair was projected
    max_imag: np.ndarray  # (...,) largest imaginary part before repair


# ==================== Elementary symmetric polynomials ====================

def _prefix_table(x: np.ndarray) -> np.ndarray:
    """T[..., m, k] = e_k(x_0, ..., x_{m-1}) for m = 0..p, k = 0..p."""
    p = x.shape[-1]
    table = np.zeros(x.shape[:-1] + (p + 1, p + 1))
    table[..., 0, 0] = 1.0
    for m in range(p):
        table[..., m + 1, :] = table[..., m, :]
        table[..., m + 1, 1:] += x[..., m, None] * table[..., m, :-1]
    return table


def _suffix_table(x: np.ndarray) -> np.ndarray:
    """T[..., m, k] = e_k(x_m, ..., x_{p-1}) for m = 0..p, k = 0..p."""
    p = x.shape[-1]
    table = np.zeros(x.shape[:-1] + (p + 1, p + 1))
    table[..., p, 0] = 1.0
    for m in range(p - 1, -1, -1):
        table[..., m, :] = table[..., m + 1, :]
        table[..., m, 1:] += x[..., m, None] * table[..., m + 1, :-1]
    return table


def elem_sym(x) -> np.ndarray:
    """(e_1(x), ..., e_p(x)) for x of shape (..., p)."""
    x = np.asarray(x, dtype=float)
    return _prefix_table(x)[..., -1, 1:]


def excluded_one(x) -> np.ndarray:
    """E[..., i, k] = e_k of x with coordinate i removed, k = 0..p-1."""
    x = np.asarray(x, dtype=float)
    p = x.shape[-1]
    pre = _prefix_table(x)[..., :p, :p]  # rows i: e_k(x_0..x_{i-1})
    suf = _suffix_table(x)[..., 1:, :p]  # rows i: e_k(x_{i+1}..x_{p-1})
    out = np.zeros(x.shape[:-1] + (p, p))
    for k in range(p):
        for a in range(k + 1):
            out[..., :, k] += pre[..., :, a] * suf[..., :, k - a]
    return out


def excluded_two(x) -> np.ndarray:
    """E[..., i, j, k] = e_k of x with coordinates i and j removed, k = 0..p-2.

    Symmetric in (i, j); the diagonal i == j is zero.
    """
    x = np.asarray(x, dtype=float)
    p = x.shape[-1]
    out = np.zeros(x.shape[:-1] + (p, p, max(p - 1, 1)))
    if p < 2:
        return out
    for i in range(p):
        reduced = np.delete(x, i, axis=-1)
        table = excluded_one(reduced)  # (..., p-1, p-1)
        for r in range(p - 1):
            j = r if r < i else r + 1
            out[..., i, j, : p - 1] = table[..., r, :]
    return out[..., : max(p - 1, 1)]


def incomplete_elem_sym(x, excluded: Iterable[int], n: int) -> float:
    """e_n of the coordinates of x not listed in ``excluded``.

    Conventions: e_0 = 1, e_{-1} = 0, and e_n = 0 when n exceeds the number
    of remaining coordinates.
    """
    if n < -1:
        raise ValueError("degree must be >= -1")
    x = np.asarray(x, dtype=float)
    drop = set(excluded)
    keep = np.array([x[i] for i in range(x.shape[-1]) if i not in drop], dtype=float)
    if n == -1:
        return 0.0
    if n == 0:
        return 1.0
    if n > keep.size:
        return 0.0
    return float(elem_sym(keep)[n - 1])


def power_sums(y, k: Optional[int] = None) -> np.ndarray:
    """Power sums sum_i x_i^m, m = 1..k, from y = e(x) by Newton's identities."""
    y = np.asarray(y, dtype=float)
    p = y.shape[-1]
    k = p if k is None else k
    e = np.zeros(y.shape[:-1] + (k + 1,))
    e[..., 0] = 1.0
    e[..., 1 : min(p, k) + 1] = y[..., : min(p, k)]
    ps = np.zeros(y.shape[:-1] + (k,))
    for m in range(1, k + 1):
        total = ((-1) ** (m - 1)) * m * e[..., m]
        for i in range(1, m):
            total = total + ((-1) ** (m - 1 + i)) * e[..., m - i] * ps[..., i - 1]
        ps[..., m - 1] = total
    return ps


# ==================== Root recovery ====================

def _companion(y: np.ndarray) -> np.ndarray:
    """Companion matrices of z^p - y_1 z^{p-1} + y_2 z^{p-2} - ..."""
    p = y.shape[-1]
    signs = (-1.0) ** np.arange(1, p + 1)
    C = np.zeros(y.shape[:-1] + (p, p))
    C[..., 0, :] = -(signs * y)
    if p > 1:
        idx = np.arange(1, p)
        C[..., idx, idx - 1] = 1.0
    return C


def _horner(y: np.ndarray, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Value and derivative of the monic polynomial of y at each root z."""
    p = y.shape[-1]
    signs = (-1.0) ** np.arange(1, p + 1)
    coeffs = signs * y
    value = np.ones_like(z)
    deriv = np.zeros_like(z)
    for k in range(p):
        deriv = deriv * z + value
        value = value * z + coeffs[..., k, None]
    return value, deriv


def default_root_tol(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return ROOT_COLLAPSE_REL_TOL * np.maximum(1.0, np.linalg.norm(y, axis=-1))


def recover_roots(y, tol, policy: str = "collapse") -> RootRecovery:
    """Real roots of the polynomials encoded by y, with conjugate-pair repair.

    Args:
        y: Poly points of shape (..., p)
        tol: Absolute imaginary-part tolerance, scalar or shape (...)
        policy: "collapse" maps a +- ib to (a, a); "reflect" maps it to a -+ |b|

    Returns:
        RootRecovery with ascending roots

    Raises:
        NonRealRoots: some imaginary part exceeds tol
    """
    if policy not in ("collapse", "reflect"):
        raise ValueError(f"unknown repair policy {policy!r}")
    y = np.asarray(y, dtype=float)
    batch = y.shape[:-1]
    tol = np.broadcast_to(np.asarray(tol, dtype=float), batch)

    zero = np.all(y == 0.0, axis=-1)
    roots = np.linalg.eigvals(_companion(np.where(zero[..., None], 1.0, y)))
    roots = np.where(zero[..., None], 0.0, roots)

    imag = np.abs(roots.imag)
    max_imag = imag.max(axis=-1)
    if np.any(max_imag > tol):
        worst = np.unravel_index(np.argmax(max_imag - tol), batch) if batch else ()
        raise NonRealRoots(
            f"imaginary part {float(max_imag[worst]):.3e} exceeds tolerance {float(tol[worst]):.3e}",
            imag=float(max_imag[worst]), tol=float(tol[worst]),
        )

    repaired = max_imag > 0.0
    if policy == "reflect":
        x = roots.real + roots.imag
    else:
        x = roots.real.copy()

    # one guarded Newton step on roots that came out real
    real = (imag == 0.0) & ~zero[..., None]
    if np.any(real):
        value, deriv = _horner(y, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            polished = np.where(deriv != 0.0, x - value / deriv, x)
        new_value, _ = _horner(y, polished)
        better = real & np.isfinite(polished) & (np.abs(new_value) < np.abs(value))
        x = np.where(better, polished, x)

    return RootRecovery(x=np.sort(x, axis=-1), repaired=repaired, max_imag=max_imag)


def poly_to_chamber(y, tol: Optional[float] = None) -> np.ndarray:
    """Inverse of elem_sym on the closed chamber.

    Conjugate pairs with imaginary part below tol collapse onto their common
    real part. The default tolerance is 1e-7 * max(1, ||y||).
    """
    y = np.asarray(y, dtype=float)
    if tol is None:
        tol = default_root_tol(y)
    return recover_roots(y, tol, policy="collapse").x


# ==================== Polynomial-space dynamics ====================

def poly_coefficients(cs: CoefficientSet, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """J, q and sigma at x, enough to take an Euler step in y.

    Returns:
        J of shape (..., p, p), q of shape (..., p), sigma of shape (..., p)
    """
    x = np.asarray(x, dtype=float)
    p = cs.p
    E1 = excluded_one(x)
    J = np.swapaxes(E1, -1, -2)
    b = cs.drift_values(x)
    q = np.einsum("...i,...in->...n", b, E1)
    if p >= 2:
        K = cs.kernel_matrix(x)
        E2 = excluded_two(x)
        upper = np.triu(np.ones((p, p), dtype=bool), k=1)
        Ku = np.where(upper, K, 0.0)
        # q_n gets -sum_{i<j} H_ij e_{n-2}^{(i,j)}; degree n-2 is index n-2 in E2
        q[..., 1:] -= np.einsum("...ij,...ijk->...k", Ku, E2[..., : p - 1])
    return J, q, cs.sigma_values(x)


def poly_dynamics(cs: CoefficientSet, x) -> PolyDynamics:
    """Diffusion scales, drifts and covariance rates of y = e(x)."""
    J, q, sigma = poly_coefficients(cs, x)
    S = np.einsum("...ni,...i,...mi->...nm", J, sigma * sigma, J)
    a = np.sqrt(np.maximum(np.diagonal(S, axis1=-2, axis2=-1), 0.0))
    return PolyDynamics(a=a, q=q, S=S, J=J)


# ==================== Gap polynomials ====================

def _pairs(p: int) -> List[Tuple[int, int]]:
    return list(combinations(range(p), 2))


def squared_gaps(x) -> np.ndarray:
    """(x_i - x_j)^2 over pairs i < j in lexicographic order."""
    x = np.asarray(x, dtype=float)
    p = x.shape[-1]
    i, j = np.triu_indices(p, k=1)
    return (x[..., i] - x[..., j]) ** 2


def gap_polys(x) -> np.ndarray:
    """V_n = e_n of the squared gaps, n = 1..p(p-1)/2."""
    return elem_sym(squared_gaps(x))


def min_gap(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        return np.full(x.shape[:-1], np.inf)
    return np.min(np.diff(np.sort(x, axis=-1), axis=-1), axis=-1)


def _esp_without(values: np.ndarray, drop: Sequence[int]) -> np.ndarray:
    """e_0..e_N of values with the listed positions removed, zero-padded to N+1."""
    n = values.shape[-1]
    e = np.zeros(n + 1)
    e[0] = 1.0
    dropped = set(drop)
    for a in range(n):
        if a in dropped:
            continue
        e[1:] = e[1:] + values[a] * e[:-1]
    return e


def gap_dynamics(cs: CoefficientSet, x) -> GapDynamics:
    """Drift D_n and quadratic-variation rate of every gap polynomial at x.

    Every term is written without division by gaps, so the result is
    well-defined at collisions. The cross-interaction term uses the
    three-gap exclusion form, which agrees with the singular formula on the
    open chamber.

    Args:
        cs: Coefficient set
        x: A single chamber point of shape (p,)

    Returns:
        GapDynamics with arrays of length N = p(p-1)/2
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("gap_dynamics takes a single point")
    p = cs.p
    N = p * (p - 1) // 2
    A = squared_gaps(x)
    V = elem_sym(A)
    pair_index = {pair: a for a, pair in enumerate(_pairs(p))}

    def pid(i: int, j: int) -> int:
        return pair_index[(i, j) if i < j else (j, i)]

    # e_k(A without one / two / three gaps), zero padded so index N is 0
    E1 = np.stack([_esp_without(A, [a]) for a in range(N)])
    cache2 = {}

    def e2(a: int, c: int) -> np.ndarray:
        key = (min(a, c), max(a, c))
        if key not in cache2:
            cache2[key] = _esp_without(A, key)
        return cache2[key]

    def shift(e: np.ndarray, by: int) -> np.ndarray:
        """Vector over n = 1..N of e_{n - by}."""
        n = np.arange(1, N + 1) - by
        out = np.zeros(N)
        ok = (n >= 0) & (n <= N)
        out[ok] = e[n[ok]]
        return out

    s2 = cs.sigma_values(x) ** 2
    bx = cs.drift_values(x)
    K = cs.kernel_matrix(x)

    D = np.zeros(N)
    # sigma^2 terms and the direct pair repulsion
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            D += s2[i] * shift(E1[pid(i, j)], 1)
    for i, j in _pairs(p):
        D += 4.0 * K[i, j] * shift(E1[pid(i, j)], 1)
        D += 2.0 * (x[i] - x[j]) * (bx[i] - bx[j]) * shift(E1[pid(i, j)], 1)

    for i in range(p):
        for j in range(p):
            for k in range(p):
                if len({i, j, k}) < 3:
                    continue
                e_ij_ik = shift(e2(pid(i, j), pid(i, k)), 2)
                D += 2.0 * (x[i] - x[j]) * (x[i] - x[k]) * s2[i] * e_ij_ik
                D += 2.0 * (x[i] - x[j]) * (x[i] - x[k]) * K[i, k] * e_ij_ik

    # remainder of the cross term, summed over i < k and every third index j
    for i, k in _pairs(p):
        if K[i, k] == 0.0:
            continue
        for j in range(p):
            if j in (i, k):
                continue
            e3 = _esp_without(A, [pid(i, j), pid(i, k), pid(j, k)])
            D += 2.0 * K[i, k] * (shift(e3, 1) + (x[i] - x[j]) * (x[j] - x[k]) * shift(e3, 2))

    QV = np.zeros(N)
    for i in range(p):
        inner = np.zeros(N)
        for j in range(p):
            if j != i:
                inner += (x[i] - x[j]) * shift(E1[pid(i, j)], 1)
        QV += 4.0 * s2[i] * inner * inner

    return GapDynamics(V=V, D=D, QV=QV)


# ==================== Log-Vandermonde process ====================

def log_vandermonde_terms(cs: CoefficientSet, x, sigma_sq_bound: Optional[float] = None) -> Tuple[float, float]:
    """Drift of U = -1/2 log V_N and the sum of absolute summands.

    Args:
        cs: Coefficient set
        x: Strictly ordered point of shape (p,)
        sigma_sq_bound: If given, every sigma_i^2 is replaced by this bound

    Returns:
        (drift, scale) where scale normalises round-off comparisons
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("log_vandermonde_drift takes a single point")
    p = cs.p
    gaps = np.diff(x)
    if p >= 2:
        floor = SINGULARITY_REL_GAP * np.maximum(1.0, np.abs(x[:-1]))
        if np.any(gaps < floor):
            i = int(np.argmin(gaps - floor))
            raise SingularityError(f"collided or unordered input at {i},{i + 1}", pair=(i, i + 1),
                                   gap=float(gaps[i]))
    s2 = cs.sigma_values(x) ** 2 if sigma_sq_bound is None else np.full(p, float(sigma_sq_bound))
    bx = cs.drift_values(x)
    K = cs.kernel_matrix(x)

    total = 0.0
    scale = 0.0
    for i, j in _pairs(p):
        d = x[j] - x[i]
        term = (bx[i] - bx[j]) / d + 0.5 * (s2[i] + s2[j] - 4.0 * K[i, j]) / (d * d)
        total += term
        scale += abs((bx[i] - bx[j]) / d) + 0.5 * (s2[i] + s2[j] + 4.0 * abs(K[i, j])) / (d * d)
    for i, j, k in combinations(range(p), 3):
        num = K[j, k] * (x[k] - x[j]) - K[i, k] * (x[k] - x[i]) + K[i, j] * (x[j] - x[i])
        den = (x[k] - x[j]) * (x[k] - x[i]) * (x[j] - x[i])
        total += num / den
        scale += (abs(K[j, k] * (x[k] - x[j])) + abs(K[i, k] * (x[k] - x[i]))
                  + abs(K[i, j] * (x[j] - x[i]))) / den
    return float(total), float(scale)


def log_vandermonde_drift(cs: CoefficientSet, x, sigma_sq_bound: Optional[float] = None) -> float:
    """Drift of U = -1/2 log V_N at a collision-free point."""
    return log_vandermonde_terms(cs, x, sigma_sq_bound)[0]
