"""Checks of the regularity and non-collision hypotheses of a particle system.

The hypotheses are the growth and modulus conditions C1, C2 and the
interaction conditions A1 to A5 on (sigma, b, H), plus symmetry and
non-negativity of every kernel. Presets are decided exactly from their
closed-form thresholds. Custom systems, and the parts of a preset replaced by
a user override, are decided by sampling the inequalities on a grid.

A failing verdict always carries a Witness: the point and both sides of the
violated inequality, so the failure can be reproduced with evaluate_witness.
"""

import logging
import math
from itertools import combinations
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field
from scipy.optimize import brentq, minimize_scalar

from noncollide.coefficients import (
    CLOSED_FORM_KINDS,
    DOMAIN_BOUNDS,
    CoefficientSet,
    NearestNeighbor,
    build_preset,
    natural_box,
)
from noncollide.config import (
    CHECK_C_MAX,
    CHECK_GRID_N,
    CHECK_SAMPLE_SEED,
    CHECK_TOL,
    DEGENERATE_REFINE_FACTOR,
    LOG_VANDERMONDE_MAX_POINTS,
    SYMMETRY_SAMPLES,
)
from noncollide.sympoly import log_vandermonde_terms

logger = logging.getLogger(__name__)

Verdict = Literal["pass", "fail", "unknown"]
Method = Literal["closed_form", "sampled", "conjecture"]

CONDITION_IDS = ("C1", "C2", "A1", "A2", "A3", "A4", "A5", "symmetry")

WitnessForm = Literal["a1", "a2", "a3", "a4", "a5", "log_vandermonde", "domain", "symmetry", "nonnegative"]


# ==================== Report types ====================

class Witness(BaseModel):
    """A sampled point at which an inequality is violated.

    ``relation="le"`` means the condition requires lhs <= rhs;
    ``relation="ne0"`` means it requires lhs != 0.
    """

    model_config = ConfigDict(frozen=True)

    condition: str
    form: WitnessForm
    point: Dict[str, Any]
    lhs: float
    rhs: float = 0.0
    relation: Literal["le", "ne0"] = "le"
    note: str = ""

    def violated(self, tol: float = CHECK_TOL) -> bool:
        return violates(self.lhs, self.rhs, self.relation, tol)


class DegenerateSet(BaseModel):
    """Points where both the diffusion and the self-interaction vanish."""

    points: List[float] = Field(default_factory=list)
    method: Method = "closed_form"
    isolated: bool = True


class ConditionReport(BaseModel):
    """Verdicts for every condition id, with witnesses and fitted constants."""

    kind: str
    p: int
    verdicts: Dict[str, Verdict]
    methods: Dict[str, Method]
    witnesses: Dict[str, List[Witness]] = Field(default_factory=dict)
    constants: Dict[str, float] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)
    info: Dict[str, Any] = Field(default_factory=dict)

    @computed_field
    @property
    def method(self) -> Method:
        return "closed_form" if all(m == "closed_form" for m in self.methods.values()) else "sampled"

    @computed_field
    @property
    def status(self) -> Verdict:
        values = set(self.verdicts.values())
        if "fail" in values:
            return "fail"
        if "unknown" in values:
            return "unknown"
        return "pass"

    @property
    def exit_code(self) -> int:
        return {"pass": 0, "fail": 1, "unknown": 2}[self.status]

    def failed(self) -> List[str]:
        return [cid for cid, verdict in self.verdicts.items() if verdict == "fail"]


def violates(lhs: float, rhs: float, relation: str, tol: float) -> bool:
    if relation == "ne0":
        return abs(lhs) <= tol
    return lhs - rhs > tol * max(1.0, abs(rhs))


class _Builder:
    """Collects verdicts while a report is assembled."""

    def __init__(self, cs: CoefficientSet):
        self.cs = cs
        self.verdicts: Dict[str, str] = {}
        self.methods: Dict[str, str] = {}
        self.witnesses: Dict[str, List[Witness]] = {}
        self.constants: Dict[str, float] = {}
        self.notes: List[str] = []
        self.info: Dict[str, Any] = {}

    def set(self, cid: str, verdict: str, method: str, witness: Optional[Witness] = None) -> None:
        self.verdicts[cid] = verdict
        self.methods[cid] = method
        if witness is not None:
            self.witnesses.setdefault(cid, []).append(witness)

    def passed(self, cid: str, method: str) -> None:
        self.set(cid, "pass", method)

    def failed(self, cid: str, method: str, witness: Witness) -> None:
        self.set(cid, "fail", method, witness)

    def build(self) -> ConditionReport:
        order = [cid for cid in CONDITION_IDS if cid in self.verdicts]
        order += [cid for cid in self.verdicts if cid not in CONDITION_IDS]
        report = ConditionReport(
            kind=self.cs.kind,
            p=self.cs.p,
            verdicts={cid: self.verdicts[cid] for cid in order},
            methods={cid: self.methods[cid] for cid in order},
            witnesses=self.witnesses,
            constants=self.constants,
            notes=self.notes,
            info=self.info,
        )
        logger.info(f"Conditions for {self.cs}: {report.status} ({report.method})")
        return report


# ==================== Witness evaluation ====================

def _sigma_sq(cs: CoefficientSet, i: int, x) -> float:
    return float(cs.sigma[i](x)) ** 2


def _pull(cs: CoefficientSet, i: int, x0: float, others: Sequence[int], ys: Sequence[float]) -> float:
    """b_i(x0) + sum over the others of H(x0, y) / (x0 - y), skipping y == x0."""
    total = float(cs.b[i](x0))
    for o, y in zip(others, ys):
        if y != x0:
            total += float(cs.kernel_value(i, o, x0, y)) / (x0 - y)
    return total


def evaluate_witness(cs: CoefficientSet, witness: Witness) -> Tuple[float, float]:
    """Recompute both sides of a witness inequality from the coefficients.

    Returns:
        (lhs, rhs)
    """
    pt = witness.point
    form = witness.form
    if form == "a1":
        i, j, w, x, y, z = pt["i"], pt["j"], pt["w"], pt["x"], pt["y"], pt["z"]
        return (float(cs.kernel_value(i, j, w, z)) * (y - x),
                float(cs.kernel_value(i, j, x, y)) * (z - w))
    if form == "a2":
        i, j, x, y, c = pt["i"], pt["j"], pt["x"], pt["y"], pt["c"]
        return (_sigma_sq(cs, i, x) + _sigma_sq(cs, j, y),
                c * (x - y) ** 2 + 4.0 * float(cs.kernel_value(i, j, x, y)))
    if form == "a3":
        i, j, k, x, y, z, c = pt["i"], pt["j"], pt["k"], pt["x"], pt["y"], pt["z"], pt["c"]
        lhs = float(cs.kernel_value(i, j, x, y)) * (y - x) + float(cs.kernel_value(j, k, y, z)) * (z - y)
        rhs = c * (z - y) * (z - x) * (y - x) + float(cs.kernel_value(i, k, x, z)) * (z - x)
        return lhs, rhs
    if form == "a4":
        total = sum(_pull(cs, i, pt["x"], pt["others"], pt["ys"]) for i in pt["block"])
        return total, 0.0
    if form == "a5":
        return float(cs.b[pt["i"]](pt["x"])), float(cs.b[pt["j"]](pt["x"]))
    if form == "log_vandermonde":
        drift, _ = log_vandermonde_terms(cs, np.asarray(pt["x"], dtype=float), pt.get("sigma_sq_bound"))
        return drift, 0.0
    if form == "domain":
        value = _pull(cs, pt["i"], pt["edge"], pt["others"], pt["ys"])
        return (-value if pt["side"] == "lower" else value), 0.0
    if form == "symmetry":
        i, j, x, y = pt["i"], pt["j"], pt["x"], pt["y"]
        return abs(float(cs.kernel_value(i, j, x, y)) - float(cs.kernel_value(i, j, y, x))), 0.0
    if form == "nonnegative":
        return -float(cs.kernel_value(pt["i"], pt["j"], pt["x"], pt["y"])), 0.0
    raise ValueError(f"unknown witness form {form!r}")


def _witness(cs: CoefficientSet, condition: str, form: str, point: Dict[str, Any],
             relation: str = "le", note: str = "") -> Witness:
    draft = Witness(condition=condition, form=form, point=point, lhs=0.0, relation=relation, note=note)
    lhs, rhs = evaluate_witness(cs, draft)
    return draft.model_copy(update={"lhs": lhs, "rhs": rhs})


# ==================== Sampled checks ====================

def _grid(box: Tuple[float, float], n: int) -> np.ndarray:
    return np.linspace(box[0], box[1], n)


def _representatives(pairs, key) -> list:
    """One pair per distinct combination of coefficient objects."""
    seen = {}
    for pair in pairs:
        seen.setdefault(key(pair), pair)
    return list(seen.values())


def _kernel_pairs(cs: CoefficientSet) -> List[Tuple[int, int]]:
    return _representatives([pr for pr in cs.pairs if not cs.H[pr].is_zero], lambda pr: id(cs.H[pr]))


def _mixed_zero_kernels(cs: CoefficientSet) -> bool:
    zero = [k.is_zero for k in cs.H.values()]
    return any(zero) and not all(zero)


def _sampled_a1(cs: CoefficientSet, out: _Builder, grid: np.ndarray, tol: float) -> None:
    quads = np.array(list(combinations(range(grid.size), 4)))
    w, x, y, z = (grid[quads[:, k]] for k in range(4))
    for i, j in _kernel_pairs(cs):
        for a, b in ((i, j), (j, i)):
            lhs = cs.kernel_value(a, b, w, z) * (y - x)
            rhs = cs.kernel_value(a, b, x, y) * (z - w)
            excess = lhs - rhs - tol * np.maximum(1.0, np.abs(rhs))
            k = int(np.argmax(excess))
            if excess[k] > 0:
                point = {"i": a, "j": b, "w": float(w[k]), "x": float(x[k]), "y": float(y[k]), "z": float(z[k])}
                out.failed("A1", "sampled", _witness(cs, "A1", "a1", point))
                return
    out.passed("A1", "sampled")


def _sampled_a2(cs: CoefficientSet, out: _Builder, grid: np.ndarray, tol: float) -> None:
    X, Y = np.meshgrid(grid, grid, indexing="ij")
    off = X != Y
    c_fit = 0.0
    pairs = _representatives(cs.pairs, lambda pr: (id(cs.sigma[pr[0]]), id(cs.sigma[pr[1]]), id(cs.H[pr])))
    for i, j in pairs:
        lhs = cs.sigma[i](X) ** 2 + cs.sigma[j](Y) ** 2
        rhs = 4.0 * cs.kernel_value(i, j, X, Y)
        diag = np.where(off, -np.inf, lhs - rhs - tol * np.maximum(1.0, np.abs(rhs)))
        k = np.unravel_index(int(np.argmax(diag)), diag.shape)
        if diag[k] > 0:
            point = {"i": i, "j": j, "x": float(X[k]), "y": float(Y[k]), "c": 0.0}
            out.failed("A2", "sampled", _witness(cs, "A2", "a2", point, note="diagonal x = y"))
            return
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(off, (lhs - rhs) / (X - Y) ** 2, -np.inf)
        c_fit = max(c_fit, float(np.max(ratio)))
    out.constants["A2_c"] = c_fit
    out.set("A2", "pass" if c_fit <= CHECK_C_MAX else "unknown", "sampled")


def _sampled_a3(cs: CoefficientSet, out: _Builder, grid: np.ndarray) -> None:
    if cs.p < 3:
        out.constants["A3_c"] = 0.0
        out.passed("A3", "sampled")
        return
    tri = np.array(list(combinations(range(grid.size), 3)))
    x, y, z = (grid[tri[:, k]] for k in range(3))
    den = (z - y) * (z - x) * (y - x)
    triples = _representatives(
        list(combinations(range(cs.p), 3)),
        lambda t: (id(cs.H[(t[0], t[1])]), id(cs.H[(t[1], t[2])]), id(cs.H[(t[0], t[2])])),
    )
    c_fit = 0.0
    for i, j, k in triples:
        lhs = cs.kernel_value(i, j, x, y) * (y - x) + cs.kernel_value(j, k, y, z) * (z - y)
        rhs = cs.kernel_value(i, k, x, z) * (z - x)
        c_fit = max(c_fit, float(np.max((lhs - rhs) / den)))
    out.constants["A3_c"] = c_fit
    out.set("A3", "pass" if c_fit <= CHECK_C_MAX else "unknown", "sampled")


def _chamber_samples(grid: np.ndarray, p: int, limit: int, seed: int) -> np.ndarray:
    """Strictly ordered p-tuples of grid points, all of them when few enough.

    Equally spaced tuples are always included.
    """
    n = grid.size
    if math.comb(n, p) <= limit:
        return grid[np.array(list(combinations(range(n), p)))]
    rng = np.random.default_rng(seed)
    picks = np.sort(np.stack([rng.choice(n, size=p, replace=False) for _ in range(limit)]), axis=1)
    equal = [start + stride * np.arange(p)
             for stride in range(1, (n - 1) // (p - 1) + 1)
             for start in range(n - stride * (p - 1))]
    return grid[np.unique(np.vstack([picks, np.array(equal)]), axis=0)]


def _sampled_log_vandermonde(cs: CoefficientSet, out: _Builder, grid: np.ndarray, tol: float) -> None:
    """Sign of the log-Vandermonde drift with sigma^2 replaced by its sup.

    Stands in for A2 and A3 when some pair kernels vanish identically.
    """
    if cs.p > grid.size:
        out.set("A2", "unknown", "sampled")
        out.set("A3", "unknown", "sampled")
        return
    bound, _ = _sup_sigma_sq(cs, grid)
    points = _chamber_samples(grid, cs.p, LOG_VANDERMONDE_MAX_POINTS, CHECK_SAMPLE_SEED)
    worst, worst_x = -math.inf, None
    for x in points:
        drift, _ = log_vandermonde_terms(cs, x, bound)
        if drift > worst:
            worst, worst_x = drift, x
    out.constants["log_vandermonde_max"] = worst
    out.constants["sigma_sq_sup"] = bound
    out.notes.append("A2 and A3 replaced by the log-Vandermonde drift sign (some pair kernels vanish)")
    if violates(worst, 0.0, "le", tol):
        point = {"x": [float(v) for v in worst_x], "sigma_sq_bound": bound}
        witness = _witness(cs, "A2", "log_vandermonde", point, note="drift of -1/2 log V_N is positive")
        out.failed("A2", "sampled", witness)
        out.failed("A3", "sampled", witness.model_copy(update={"condition": "A3"}))
    else:
        out.passed("A2", "sampled")
        out.passed("A3", "sampled")


def _sampled_a5(cs: CoefficientSet, out: _Builder, grid: np.ndarray, tol: float) -> None:
    values = np.stack([cs.b[i](grid) for i in range(cs.p)])
    for i, j in cs.pairs:
        excess = values[i] - values[j] - tol * np.maximum(1.0, np.abs(values[j]))
        k = int(np.argmax(excess))
        if excess[k] > 0:
            out.failed("A5", "sampled", _witness(cs, "A5", "a5", {"i": i, "j": j, "x": float(grid[k])}))
            return
    out.passed("A5", "sampled")


def _sup_sigma_sq(cs: CoefficientSet, grid: np.ndarray) -> Tuple[float, float]:
    values = np.stack([cs.sigma[i](grid) ** 2 for i in range(cs.p)])
    k = np.unravel_index(int(np.argmax(values)), values.shape)
    return float(values[k]), float(grid[k[1]])


def _sampled_c1(cs: CoefficientSet, out: _Builder, grid: np.ndarray) -> None:
    X, Y = np.meshgrid(grid, grid, indexing="ij")
    dist = np.abs(X - Y)
    off = dist > 0
    holder = 0.0
    for s in {id(f): f for f in cs.sigma}.values():
        holder = max(holder, float(np.max(np.abs(s(X) - s(Y))[off] / np.sqrt(dist[off]))))
    lipschitz = 0.0
    for f in {id(f): f for f in cs.b}.values():
        lipschitz = max(lipschitz, float(np.max(np.abs(f(X) - f(Y))[off] / dist[off])))
    out.constants["C1_holder_sigma"] = holder
    out.constants["C1_lipschitz_b"] = lipschitz
    out.set("C1", "pass" if math.isfinite(holder) and math.isfinite(lipschitz) else "unknown", "sampled")


def _growth_sigma_b(cs: CoefficientSet, grid: np.ndarray) -> float:
    c = 0.0
    for i in range(cs.p):
        c = max(c, float(np.max((cs.sigma[i](grid) ** 2 + 2.0 * grid * cs.b[i](grid)) / (1.0 + grid ** 2))))
    return c


def _growth_kernel(cs: CoefficientSet, grid: np.ndarray) -> float:
    X, Y = np.meshgrid(grid, grid, indexing="ij")
    c = 0.0
    for i, j in _kernel_pairs(cs):
        c = max(c, float(np.max(cs.kernel_value(i, j, X, Y) / (1.0 + X ** 2 + Y ** 2))))
    return c


def _sampled_c2(cs: CoefficientSet, out: _Builder, grid: np.ndarray) -> None:
    c = max(_growth_sigma_b(cs, grid), _growth_kernel(cs, grid))
    out.constants["C2_c"] = c
    out.set("C2", "pass" if math.isfinite(c) and c <= CHECK_C_MAX else "unknown", "sampled")


def _sampled_symmetry(cs: CoefficientSet, out: _Builder, box: Tuple[float, float], tol: float) -> None:
    rng = np.random.default_rng(CHECK_SAMPLE_SEED)
    x = rng.uniform(box[0], box[1], SYMMETRY_SAMPLES)
    y = rng.uniform(box[0], box[1], SYMMETRY_SAMPLES)
    for i, j in _kernel_pairs(cs):
        hxy = cs.kernel_value(i, j, x, y)
        hyx = cs.kernel_value(i, j, y, x)
        k = int(np.argmin(hxy))
        if violates(-float(hxy[k]), 0.0, "le", tol):
            point = {"i": i, "j": j, "x": float(x[k]), "y": float(y[k])}
            out.failed("symmetry", "sampled", _witness(cs, "symmetry", "nonnegative", point))
            return
        gap = np.abs(hxy - hyx) - tol * np.maximum(1.0, np.abs(hxy))
        k = int(np.argmax(gap))
        if gap[k] > 0:
            point = {"i": i, "j": j, "x": float(x[k]), "y": float(y[k])}
            out.failed("symmetry", "sampled", _witness(cs, "symmetry", "symmetry", point))
            return
    out.passed("symmetry", "sampled")


def _sampled_domain(cs: CoefficientSet, out: _Builder, grid: np.ndarray, tol: float) -> None:
    """Whether the drift at a finite edge of the state interval points inward.

    The extreme particle sits on the edge and every other particle is placed
    where it pulls outward the most.
    """
    lo, hi = DOMAIN_BOUNDS[cs.domain]
    edges = [(lo, "lower", 0)] if math.isfinite(lo) else []
    if math.isfinite(hi):
        edges.append((hi, "upper", cs.p - 1))
    for edge, side, i in edges:
        inside = grid[grid != edge]
        others = [o for o in range(cs.p) if o != i]
        ys = []
        for o in others:
            pull = cs.kernel_value(i, o, np.full(inside.shape, edge), inside) / (edge - inside)
            ys.append(float(inside[np.argmin(pull) if side == "lower" else np.argmax(pull)]))
        point = {"edge": float(edge), "side": side, "i": i, "others": others, "ys": ys}
        witness = _witness(cs, "domain", "domain", point, note=f"drift at the {side} edge points outward")
        if witness.violated(tol):
            out.failed("domain", "sampled", witness)
            return
    out.passed("domain", "sampled")


def _check_box(cs: CoefficientSet, box: Tuple[float, float], grid_n: int) -> None:
    lo, hi = box
    dlo, dhi = DOMAIN_BOUNDS[cs.domain]
    if grid_n < 4:
        raise ValueError(f"grid_n must be >= 4, got {grid_n}")
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"box {box} is not a bounded non-degenerate interval")
    if lo < dlo or hi > dhi:
        raise ValueError(f"box {box} lies outside the {cs.domain} domain [{dlo}, {dhi}]")


def check_numeric(cs: CoefficientSet, box: Optional[Tuple[float, float]] = None,
                  grid_n: int = CHECK_GRID_N, tol: float = CHECK_TOL) -> ConditionReport:
    """Grid-sampled verdicts for every condition.

    A1 is sampled over ordered quadruples, A2 over pairs with a best-fit
    constant, A3 over ordered triples with a best-fit constant, and A5, C1,
    C2 over grid points. Systems in which only some pair kernels vanish get
    the log-Vandermonde drift sign in place of A2 and A3. A4 is exact for
    presets; otherwise it passes only when no degenerate point is found.

    Args:
        cs: Coefficient set
        box: Sampling interval inside cs.domain (default: natural box)
        grid_n: Grid points per axis (>= 4)
        tol: Violations at or below tol count as equality

    Returns:
        ConditionReport with method "sampled"
    """
    box = natural_box(cs.domain) if box is None else (float(box[0]), float(box[1]))
    _check_box(cs, box, grid_n)
    grid = _grid(box, grid_n)
    out = _Builder(cs)
    out.info["box"] = list(box)
    out.info["grid_n"] = grid_n

    _sampled_c1(cs, out, grid)
    _sampled_c2(cs, out, grid)
    _sampled_a1(cs, out, grid, tol)
    if _mixed_zero_kernels(cs) and cs.p >= 3:
        _sampled_log_vandermonde(cs, out, grid, tol)
    else:
        _sampled_a2(cs, out, grid, tol)
        _sampled_a3(cs, out, grid)

    tag = cs.preset_tag
    if tag is not None and tag.kind in CLOSED_FORM_KINDS and _strength(tag) > 0:
        _closed_form_a4(cs, tag, out)
    else:
        degenerate = degenerate_points(cs, box, grid_n)
        out.info["degenerate_points"] = degenerate.points
        if degenerate.points:
            out.notes.append("A4 quantifies over all positions of the other particles; "
                             "no finite sample certifies it")
            out.set("A4", "unknown", "sampled")
        else:
            out.passed("A4", "sampled")

    _sampled_a5(cs, out, grid, tol)
    _sampled_symmetry(cs, out, box, tol)
    if cs.domain != "real":
        _sampled_domain(cs, out, grid, tol)
    return out.build()


# ==================== Degenerate points ====================

def _degeneracy(cs: CoefficientSet, x: np.ndarray) -> np.ndarray:
    """min over pairs of sigma_i^2(x) + sigma_j^2(x) + H_ij(x, x)."""
    x = np.asarray(x, dtype=float)
    values = [cs.sigma[i](x) ** 2 + cs.sigma[j](x) ** 2 + cs.kernel_value(i, j, x, x) for i, j in cs.pairs]
    return np.min(np.stack(values), axis=0)


def _closed_form_degenerate(cs: CoefficientSet) -> Optional[List[float]]:
    tag = cs.preset_tag
    if tag is None or tag.kind not in CLOSED_FORM_KINDS or _strength(tag) <= 0:
        return None
    if getattr(tag, "sigma", None) is not None:
        if tag.kind == "beta_wishart_abs" and tag.beta > 0:
            return [0.0] if float(cs.sigma[0](0.0)) == 0.0 else []
        return None
    if tag.kind in ("beta_wishart", "beta_wishart_abs"):
        return [0.0]
    if tag.kind == "jacobi":
        return [0.0, 1.0]
    return []


def degenerate_points(cs: CoefficientSet, box: Optional[Tuple[float, float]] = None,
                      grid_n: int = CHECK_GRID_N) -> DegenerateSet:
    """Points x where sigma_i^2(x) + sigma_j^2(x) + H_ij(x, x) = 0 for some pair.

    Presets return their exact sets. Otherwise the map is scanned on a fine
    grid: sign changes are located with brentq and local minima touching
    zero are refined with minimize_scalar.
    """
    exact = _closed_form_degenerate(cs)
    if exact is not None:
        return DegenerateSet(points=exact, method="closed_form")
    if cs.p < 2:
        return DegenerateSet(points=[], method="sampled")

    box = natural_box(cs.domain) if box is None else (float(box[0]), float(box[1]))
    grid = _grid(box, (grid_n - 1) * DEGENERATE_REFINE_FACTOR + 1)
    f = _degeneracy(cs, grid)
    scale = max(1.0, float(np.max(np.abs(f))))
    zero_tol = CHECK_TOL * scale

    def g(u: float) -> float:
        return float(_degeneracy(cs, np.array([u]))[0])

    found: List[float] = []
    for k in range(grid.size):
        if abs(f[k]) <= zero_tol:
            found.append(float(grid[k]))
        elif k + 1 < grid.size and f[k] * f[k + 1] < 0 and abs(f[k + 1]) > zero_tol:
            found.append(float(brentq(g, grid[k], grid[k + 1], xtol=1e-14)))
        elif 0 < k < grid.size - 1 and f[k] <= f[k - 1] and f[k] <= f[k + 1] and f[k] < max(f[k - 1], f[k + 1]):
            res = minimize_scalar(g, bounds=(grid[k - 1], grid[k + 1]), method="bounded",
                                  options={"xatol": 1e-12})
            if res.success and abs(res.fun) <= zero_tol:
                found.append(float(res.x))

    zeros_on_grid = np.abs(f) <= zero_tol
    isolated = not np.any(zeros_on_grid[:-1] & zeros_on_grid[1:])
    points: List[float] = []
    for u in sorted(found):
        if not points or u - points[-1] > 1e-8 * max(1.0, abs(u)):
            points.append(u)
    if not isolated:
        logger.warning(f"Degenerate set of {cs} contains an interval; A4 cannot hold")
    return DegenerateSet(points=points, method="sampled", isolated=isolated)


# ==================== Closed forms ====================

def _strength(tag: Any) -> float:
    """The parameter scaling every preset kernel (gamma or beta)."""
    return float(tag.gamma) if hasattr(tag, "gamma") else float(tag.beta)


def _small_integer(value: float, lo: int, hi: int) -> bool:
    return float(value).is_integer() and lo <= value <= hi


def _a4_witness(cs: CoefficientSet, x0: float, ys: List[float], note: str) -> Witness:
    point = {"x": x0, "block": [0, 1], "others": list(range(2, cs.p)), "ys": ys}
    return _witness(cs, "A4", "a4", point, relation="ne0", note=note)


def _closed_form_a4(cs: CoefficientSet, tag: Any, out: _Builder) -> None:
    """A4 at the degenerate points of a preset.

    Two particles sit on the degenerate point and the remaining p - 2 sit at
    the positions that cancel the total drift, when such positions exist.
    """
    p = cs.p
    rest = p - 2
    if tag.kind == "beta_wishart" and _small_integer(tag.alpha, 0, rest):
        n = int(tag.alpha)
        ys = [1.0] * n + [0.0] * (rest - n)
        out.failed("A4", "closed_form", _a4_witness(cs, 0.0, ys, "alpha in {0, ..., p-2}"))
        return
    if tag.kind == "beta_wishart_abs" and _closed_form_degenerate(cs) == [0.0] \
            and _small_integer(tag.alpha, -rest, rest):
        n = int(abs(tag.alpha))
        side = 1.0 if tag.alpha >= 0 else -1.0
        ys = [side] * n + [0.0] * (rest - n)
        out.failed("A4", "closed_form", _a4_witness(cs, 0.0, ys, "integer alpha with |alpha| <= p-2"))
        return
    if tag.kind == "jacobi":
        if _small_integer(tag.q, 0, rest):
            n = int(tag.q)
            ys = [1.0] * n + [0.0] * (rest - n)
            out.failed("A4", "closed_form", _a4_witness(cs, 0.0, ys, "q in {0, ..., p-2}"))
            return
        if _small_integer(tag.r, 0, rest):
            n = int(tag.r)
            ys = [0.0] * n + [1.0] * (rest - n)
            out.failed("A4", "closed_form", _a4_witness(cs, 1.0, ys, "r in {0, ..., p-2}"))
            return
    out.passed("A4", "closed_form")


def _domain_closed_form(cs: CoefficientSet, tag: Any, out: _Builder) -> None:
    p = cs.p
    if tag.kind == "beta_wishart" and tag.alpha < p - 1:
        point = {"edge": 0.0, "side": "lower", "i": 0, "others": list(range(1, p)), "ys": [1.0] * (p - 1)}
        out.failed("domain", "closed_form", _witness(cs, "domain", "domain", point, note="alpha < p-1"))
        return
    if tag.kind == "jacobi":
        if tag.q < p - 1:
            point = {"edge": 0.0, "side": "lower", "i": 0, "others": list(range(1, p)), "ys": [1.0] * (p - 1)}
            out.failed("domain", "closed_form", _witness(cs, "domain", "domain", point, note="q < p-1"))
            return
        if tag.r < p - 1:
            point = {"edge": 1.0, "side": "upper", "i": p - 1, "others": list(range(p - 1)),
                     "ys": [0.0] * (p - 1)}
            out.failed("domain", "closed_form", _witness(cs, "domain", "domain", point, note="r < p-1"))
            return
    out.passed("domain", "closed_form")


def _a2_diagonal(cs: CoefficientSet, out: _Builder, holds: bool, x0: float, method: str, note: str) -> None:
    """A2 decided on the diagonal, where the fitted constant plays no role."""
    out.constants["A2_c"] = 0.0
    if holds:
        out.passed("A2", method)
    else:
        point = {"i": 0, "j": 1, "x": x0, "y": x0, "c": 0.0}
        out.failed("A2", method, _witness(cs, "A2", "a2", point, note=note))


def _nearest_neighbor_closed_form(cs: CoefficientSet, tag: Any, out: _Builder, bound: float,
                                  method: str) -> None:
    p = cs.p
    if p >= 4:
        threshold = nn_conjectured_threshold(p)
        out.set("A2", "unknown", "conjecture")
        out.set("A3", "unknown", "conjecture")
        out.info["nn_conjectured_threshold"] = threshold
        out.info["meets_conjectured_threshold"] = bool(tag.gamma >= threshold * bound)
        out.notes.append(f"Nearest-neighbour repulsion with p={p}: non-positivity of the log-Vandermonde "
                         f"drift is only conjectured for gamma >= {threshold:.6g}")
        return
    # sharp for p = 3: the bounded drift is (9 sup sigma^2 - 12 gamma) / (4 ab), zero at equal gaps
    out.constants["sigma_sq_sup"] = bound
    out.notes.append("A2 and A3 replaced by the log-Vandermonde drift bound (only neighbours interact)")
    if tag.gamma >= 0.75 * bound:
        out.passed("A2", method)
        out.passed("A3", method)
        return
    point = {"x": [0.0, 1.0, 2.0], "sigma_sq_bound": bound}
    witness = _witness(cs, "A2", "log_vandermonde", point, note="gamma < 3/4 sup sigma^2")
    out.failed("A2", method, witness)
    out.failed("A3", method, witness.model_copy(update={"condition": "A3"}))


def _kernel_growth_constant(tag: Any) -> float:
    """c with H(x, y) <= c (1 + x^2 + y^2) for the preset kernel."""
    kind = tag.kind
    if kind in ("dyson", "nearest_neighbor"):
        return tag.gamma
    if kind == "hyperbolic":
        return 2.0 * tag.gamma
    if kind == "general_psi":
        return tag.gamma * (1.0 + tag.psi.scale) if tag.psi.kind == "coth" else tag.gamma
    # beta (|x| + |y|), beta (x + y) and the Jacobi kernel are all bounded this way
    return tag.beta


def check_preset(cs: CoefficientSet) -> ConditionReport:
    """Exact verdicts from the preset's closed-form thresholds.

    Dyson-type kernels pass A2 iff sup sigma^2 <= 2 gamma. Wishart passes iff
    beta >= 1 with alpha >= p-1 keeping it on the half-line; Jacobi iff
    beta >= 1 and min(q, r) >= p-1. Nearest-neighbour repulsion with p = 3
    passes iff gamma >= 3/4 sup sigma^2, and is reported unknown for p >= 4.
    User overrides of sigma or b switch the verdicts they touch to sampling.
    Custom systems and presets without closed forms go to check_numeric.
    """
    tag = cs.preset_tag
    if tag is None or tag.kind not in CLOSED_FORM_KINDS:
        logger.info(f"No closed form for {cs}; sampling the conditions instead")
        return check_numeric(cs)
    if _strength(tag) <= 0:
        logger.info(f"Non-positive interaction strength for {cs}; sampling the conditions instead")
        report = check_numeric(cs)
        report.notes.append("non-positive interaction strength is outside the closed-form families")
        return report

    p = cs.p
    out = _Builder(cs)
    box = natural_box(cs.domain)
    grid = _grid(box, CHECK_GRID_N)
    sigma_override = getattr(tag, "sigma", None) is not None
    b_override = getattr(tag, "b", None) is not None
    field_method = "sampled" if (sigma_override or b_override) else "closed_form"

    # C1: moduli of the preset fields, estimated when overridden
    if sigma_override or b_override:
        _sampled_c1(cs, out, grid)
    else:
        holder = cs.sigma[0].modulus_hint
        lipschitz = cs.b[0].modulus_hint
        out.constants["C1_holder_sigma"] = holder.constant if holder and holder.kind == "holder_half" else 0.0
        out.constants["C1_lipschitz_b"] = lipschitz.constant if lipschitz else 0.0
        out.passed("C1", "closed_form")

    # C2 in the form sigma^2 + 2 x b <= c (1 + x^2), H <= c (1 + x^2 + y^2)
    if tag.kind == "beta_wishart" or (tag.kind == "beta_wishart_abs" and not sigma_override):
        c_fields = 2.0 + tag.beta * abs(tag.alpha)
    elif tag.kind == "jacobi":
        c_fields = 1.0 + 2.0 * tag.beta * (abs(tag.q) + abs(tag.q + tag.r))
    elif sigma_override or b_override:
        c_fields = _growth_sigma_b(cs, grid)
    else:
        c_fields = 1.0
    out.constants["C2_c"] = max(c_fields, _kernel_growth_constant(tag))
    out.passed("C2", field_method)

    # A1 and symmetry hold for every non-negative preset kernel
    out.passed("A1", "closed_form")

    if tag.kind == "nearest_neighbor" and p >= 3:
        bound = _sup_sigma_sq(cs, grid)[0] if sigma_override else 1.0
        _nearest_neighbor_closed_form(cs, tag, out, bound, "sampled" if sigma_override else "closed_form")
    else:
        if tag.kind in ("dyson", "nearest_neighbor", "hyperbolic", "general_psi"):
            bound, x0 = _sup_sigma_sq(cs, grid) if sigma_override else (1.0, 0.0)
            _a2_diagonal(cs, out, bound <= 2.0 * tag.gamma, x0, "sampled" if sigma_override else "closed_form",
                         "sup sigma^2 > 2 gamma")
        elif tag.kind == "beta_wishart_abs" and sigma_override:
            _sampled_a2(cs, out, grid, CHECK_TOL)
        elif tag.kind in ("beta_wishart", "beta_wishart_abs"):
            _a2_diagonal(cs, out, tag.beta >= 1.0, 1.0, "closed_form", "beta < 1")
        else:  # jacobi
            _a2_diagonal(cs, out, tag.beta >= 1.0, 0.5, "closed_form", "beta < 1")
        out.constants["A3_c"] = 0.0
        out.passed("A3", "closed_form")

    _closed_form_a4(cs, tag, out)
    out.passed("A5", "closed_form")
    out.passed("symmetry", "closed_form")
    if cs.domain != "real":
        _domain_closed_form(cs, tag, out)
    return out.build()


# ==================== Nearest-neighbour exploration ====================

def nn_conjectured_threshold(p: int) -> float:
    """gamma_p = (p/2) (sum 1/i^2) / (sum 1/i) - 1/2 over i = 1..p-1.

    Conjectured, never asserted, to make the log-Vandermonde drift of the
    nearest-neighbour system non-positive. Equals 3/4 at p = 3.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    i = np.arange(1, p, dtype=float)
    return float(p / 2.0 * np.sum(1.0 / i ** 2) / np.sum(1.0 / i) - 0.5)


class NearestNeighborExploration(BaseModel):
    p: int
    gamma: float
    threshold: float
    n: int
    max_normalized_drift: float
    worst_point: List[float]
    nonpositive: bool


def explore_nearest_neighbor(p: int, gamma: float, n: int = 10_000, seed: int = CHECK_SAMPLE_SEED,
                             tol: float = 1e-12) -> NearestNeighborExploration:
    """Largest log-Vandermonde drift over random chamber points, sigma^2 <= 1.

    The drift is divided by the sum of the absolute values of its terms so
    that points of every scale compare.
    """
    cs = build_preset(NearestNeighbor(gamma=gamma), p)
    rng = np.random.default_rng(seed)
    points = np.sort(rng.standard_normal((n, p)), axis=1)
    worst, worst_x = -math.inf, points[0]
    for x in points:
        drift, scale = log_vandermonde_terms(cs, x, 1.0)
        value = drift / scale if scale > 0 else 0.0
        if value > worst:
            worst, worst_x = value, x
    result = NearestNeighborExploration(
        p=p, gamma=gamma, threshold=nn_conjectured_threshold(p), n=n,
        max_normalized_drift=worst, worst_point=[float(v) for v in worst_x], nonpositive=worst <= tol,
    )
    logger.info(f"Nearest-neighbour exploration p={p} gamma={gamma}: max normalised drift {worst:.3e}")
    return result
