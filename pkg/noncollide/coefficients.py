"""Coefficient model of a particle system and its named preset families.

A system of p ordered particles evolves as

    dx_i = sigma_i(x_i) dB_i + (b_i(x_i) + sum_{j != i} H_ij(x_i, x_j) / (x_i - x_j)) dt

This module holds the coefficient triple (sigma, b, H), the preset families
with their exact closed forms, and the singular drift evaluated from them.
Particle indices are 0-based throughout the package.
"""

import logging
import math
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing_extensions import Annotated

from noncollide.config import NATURAL_BOX_HALF_WIDTH, SINGULARITY_REL_GAP
from noncollide.errors import SingularityError, UnsupportedPresetError
from noncollide.utils.expressions import Expression, parse_field, parse_kernel

logger = logging.getLogger(__name__)

Domain = Literal["real", "half_line", "unit_interval"]

DOMAIN_BOUNDS: Dict[str, Tuple[float, float]] = {
    "real": (-math.inf, math.inf),
    "half_line": (0.0, math.inf),
    "unit_interval": (0.0, 1.0),
}


def natural_box(domain: str) -> Tuple[float, float]:
    """Bounded sampling box inside a state interval."""
    lo, hi = DOMAIN_BOUNDS[domain]
    if math.isinf(lo) and math.isinf(hi):
        return (-NATURAL_BOX_HALF_WIDTH, NATURAL_BOX_HALF_WIDTH)
    if math.isinf(hi):
        return (lo, lo + NATURAL_BOX_HALF_WIDTH)
    return (lo, hi)


# ==================== Fields and kernels ====================

class ModulusHint(BaseModel):
    """Continuity modulus of a scalar field, as used by the (C1) check."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["lipschitz", "holder_half"]
    constant: float


class ScalarField(BaseModel):
    """A coefficient function R -> R (sigma_i or b_i)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eval: Callable[..., np.ndarray]
    modulus_hint: Optional[ModulusHint] = None
    descriptor: str = "custom"

    def __call__(self, x) -> np.ndarray:
        return self.eval(x)


class InteractionKernel(BaseModel):
    """A symmetric, non-negative interaction H_ij(x, y)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eval: Callable[..., np.ndarray]
    is_zero: bool = False
    descriptor: str = "custom"

    def __call__(self, x, y) -> np.ndarray:
        return self.eval(x, y)


class _BetaFamilySigma:
    """x -> 2 |g(x) h(x)|."""

    def __init__(self, g: Expression, h: Expression):
        self.g = g
        self.h = h

    def __call__(self, x):
        return 2.0 * np.abs(self.g(x) * self.h(x))


class _BetaFamilyKernel:
    """(x, y) -> beta (g(x)^2 h(y)^2 + g(y)^2 h(x)^2)."""

    def __init__(self, g: Expression, h: Expression, beta: float):
        self.g = g
        self.h = h
        self.beta = beta

    def __call__(self, x, y):
        gx, gy, hx, hy = self.g(x), self.g(y), self.h(x), self.h(y)
        return self.beta * (gx * gx * hy * hy + gy * gy * hx * hx)


def field(source: str, constants: Optional[Dict[str, float]] = None,
          modulus_hint: Optional[ModulusHint] = None) -> ScalarField:
    return ScalarField(eval=parse_field(source, constants), modulus_hint=modulus_hint, descriptor=source)


def kernel(source: str, constants: Optional[Dict[str, float]] = None) -> InteractionKernel:
    expr = parse_kernel(source, constants)
    is_zero = expr.is_constant and float(expr(0.0, 0.0)) == 0.0
    return InteractionKernel(eval=expr, is_zero=is_zero, descriptor=source)


ZERO_KERNEL = kernel("0")


# ==================== Preset parameters ====================

class PsiDescriptor(BaseModel):
    """Odd repulsion profile psi with H(x, y) = (x - y) psi(x - y)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["inverse", "coth"] = "coth"
    scale: float = Field(default=1.0, gt=0)


class _Params(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class DysonCepa(_Params):
    kind: Literal["dyson"] = "dyson"
    gamma: float
    sigma: Optional[str] = None
    b: Optional[str] = None


class NearestNeighbor(_Params):
    kind: Literal["nearest_neighbor"] = "nearest_neighbor"
    gamma: float
    sigma: Optional[str] = None
    b: Optional[str] = None


class BetaWishart(_Params):
    kind: Literal["beta_wishart"] = "beta_wishart"
    alpha: float
    beta: float


class BetaWishartAbs(_Params):
    kind: Literal["beta_wishart_abs"] = "beta_wishart_abs"
    alpha: float
    beta: float
    sigma: Optional[str] = None


class Jacobi(_Params):
    kind: Literal["jacobi"] = "jacobi"
    q: float
    r: float
    beta: float


class Hyperbolic(_Params):
    kind: Literal["hyperbolic"] = "hyperbolic"
    gamma: float
    sigma: Optional[str] = None
    b: Optional[str] = None


class GeneralPsi(_Params):
    kind: Literal["general_psi"] = "general_psi"
    gamma: float
    psi: PsiDescriptor = PsiDescriptor()
    sigma: Optional[str] = None
    b: Optional[str] = None


class BetaFamily(_Params):
    """Eigenvalue family of the matrix SDE dX = g(X) dW h(X) + h(X) dW^T g(X) + b(X) dt."""

    kind: Literal["beta_family"] = "beta_family"
    g: str
    h: str
    b: str = "0"
    beta: float
    domain: Domain = "real"


class Custom(_Params):
    """User system. Lists give per-particle fields; H maps "i,j" (1-based) to kernels."""

    kind: Literal["custom"] = "custom"
    sigma: Union[str, List[str]]
    b: Union[str, List[str]] = "0"
    H: Union[str, Dict[str, str]]
    H_default: str = "0"
    domain: Domain = "real"
    constants: Dict[str, float] = Field(default_factory=dict)


PresetParams = Annotated[
    Union[DysonCepa, NearestNeighbor, BetaWishart, BetaWishartAbs, Jacobi, Hyperbolic, GeneralPsi, BetaFamily],
    Field(discriminator="kind"),
]

SystemParams = Annotated[
    Union[DysonCepa, NearestNeighbor, BetaWishart, BetaWishartAbs, Jacobi, Hyperbolic, GeneralPsi,
          BetaFamily, Custom],
    Field(discriminator="kind"),
]

PRESET_KINDS = ("dyson", "nearest_neighbor", "beta_wishart", "beta_wishart_abs", "jacobi",
                "hyperbolic", "general_psi", "beta_family")

# Presets whose condition verdicts have closed forms
CLOSED_FORM_KINDS = ("dyson", "nearest_neighbor", "beta_wishart", "beta_wishart_abs", "jacobi",
                     "hyperbolic", "general_psi")


# ==================== Coefficient set ====================

class CoefficientSet(BaseModel):
    """The triple (sigma_i, b_i, H_ij) of a p-particle system.

    H is stored for i < j only; ``kernel_value(j, i, x, y)`` resolves to
    ``H_ij(y, x)``. Immutable and safe to share between workers.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    p: int
    sigma: Tuple[ScalarField, ...]
    b: Tuple[ScalarField, ...]
    H: Dict[Tuple[int, int], InteractionKernel]
    domain: Domain = "real"
    preset_tag: Optional[Any] = None

    @field_validator("p")
    @classmethod
    def _check_p(cls, value: int) -> int:
        if value < 1:
            raise ValueError("p must be >= 1")
        return value

    def model_post_init(self, __context: Any) -> None:
        if len(self.sigma) != self.p or len(self.b) != self.p:
            raise ValueError(f"expected {self.p} sigma and b fields")
        expected = {(i, j) for i in range(self.p) for j in range(i + 1, self.p)}
        if set(self.H) != expected:
            raise ValueError("H must be indexed by exactly the pairs i < j")

    @property
    def kind(self) -> str:
        return self.preset_tag.kind if self.preset_tag is not None else "custom"

    @property
    def pairs(self) -> List[Tuple[int, int]]:
        return sorted(self.H)

    @property
    def uniform_fields(self) -> bool:
        return all(s is self.sigma[0] for s in self.sigma) and all(f is self.b[0] for f in self.b)

    @property
    def uniform_kernel(self) -> Optional[InteractionKernel]:
        """The common kernel when every pair shares one, else None."""
        kernels = list(self.H.values())
        if kernels and all(k is kernels[0] for k in kernels):
            return kernels[0]
        return None

    def kernel_value(self, i: int, j: int, xi, xj) -> np.ndarray:
        if i == j:
            raise ValueError("H_ii is not defined")
        if i < j:
            return self.H[(i, j)](xi, xj)
        return self.H[(j, i)](xj, xi)

    def sigma_values(self, x: np.ndarray) -> np.ndarray:
        """sigma_i(x_i) for x of shape (..., p)."""
        x = np.asarray(x, dtype=float)
        if self.uniform_fields:
            return self.sigma[0](x)
        return np.stack([self.sigma[i](x[..., i]) for i in range(self.p)], axis=-1)

    def drift_values(self, x: np.ndarray) -> np.ndarray:
        """b_i(x_i) for x of shape (..., p)."""
        x = np.asarray(x, dtype=float)
        if self.uniform_fields:
            return self.b[0](x)
        return np.stack([self.b[i](x[..., i]) for i in range(self.p)], axis=-1)

    def kernel_matrix(self, x: np.ndarray) -> np.ndarray:
        """K[..., i, j] = H_ij(x_i, x_j), symmetric with zero diagonal."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1] + (self.p, self.p)
        shared = self.uniform_kernel
        if shared is not None:
            if shared.is_zero:
                return np.zeros(shape)
            K = shared(x[..., :, None], x[..., None, :])
            idx = np.arange(self.p)
            K[..., idx, idx] = 0.0
            return K
        K = np.zeros(shape)
        for (i, j), kern in self.H.items():
            if kern.is_zero:
                continue
            value = kern(x[..., i], x[..., j])
            K[..., i, j] = value
            K[..., j, i] = value
        return K

    def active_pairs(self) -> np.ndarray:
        """Boolean (p, p) mask of pairs whose kernel is not identically zero."""
        mask = np.zeros((self.p, self.p), dtype=bool)
        for (i, j), kern in self.H.items():
            if not kern.is_zero:
                mask[i, j] = mask[j, i] = True
        return mask

    def clamp(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Project onto the state interval.

        Returns:
            Clamped array and a boolean mask over the leading axes marking
            which states were moved
        """
        lo, hi = DOMAIN_BOUNDS[self.domain]
        if math.isinf(lo) and math.isinf(hi):
            return x, np.zeros(x.shape[:-1], dtype=bool)
        clamped = np.clip(x, lo, hi)
        moved = np.any(clamped != x, axis=-1)
        return clamped, moved

    def __str__(self) -> str:
        return f"CoefficientSet(kind={self.kind}, p={self.p}, domain={self.domain})"


# ==================== Builders ====================

def _uniform(p: int, sigma: ScalarField, b: ScalarField, H: InteractionKernel,
             domain: str, tag: Any) -> CoefficientSet:
    pairs = {(i, j): H for i in range(p) for j in range(i + 1, p)}
    return CoefficientSet(p=p, sigma=(sigma,) * p, b=(b,) * p, H=pairs, domain=domain, preset_tag=tag)


def _sigma_or(source: Optional[str], default: str, constants: Dict[str, float],
              hint: Optional[ModulusHint]) -> ScalarField:
    if source is None:
        return field(default, constants, hint)
    return field(source, constants)


def build_preset(params: Any, p: int, allow_single: bool = False) -> CoefficientSet:
    """Build the exact coefficient functions of a preset family.

    Args:
        params: One of the preset parameter models
        p: Particle count (>= 2; 1 only with allow_single)
        allow_single: Permit p = 1, which has no interaction pairs

    Returns:
        CoefficientSet carrying params as its preset tag
    """
    minimum = 1 if allow_single else 2
    if p < minimum:
        raise ValueError(f"p must be >= {minimum}, got {p}")
    kind = getattr(params, "kind", None)
    if kind not in PRESET_KINDS:
        raise UnsupportedPresetError(f"unknown preset tag: {kind!r}")

    lipschitz0 = ModulusHint(kind="lipschitz", constant=0.0)

    if kind == "dyson":
        c = {"gamma": params.gamma}
        return _uniform(p, _sigma_or(params.sigma, "1", c, lipschitz0),
                        _sigma_or(params.b, "0", c, lipschitz0),
                        kernel("gamma", c), "real", params)

    if kind == "nearest_neighbor":
        c = {"gamma": params.gamma}
        sigma = _sigma_or(params.sigma, "1", c, lipschitz0)
        b = _sigma_or(params.b, "0", c, lipschitz0)
        near = kernel("gamma", c)
        H = {(i, j): (near if j == i + 1 else ZERO_KERNEL) for i in range(p) for j in range(i + 1, p)}
        return CoefficientSet(p=p, sigma=(sigma,) * p, b=(b,) * p, H=H, domain="real", preset_tag=params)

    if kind == "beta_wishart":
        c = {"alpha": params.alpha, "beta": params.beta}
        return _uniform(p, field("2*sqrt(max(x, 0))", c, ModulusHint(kind="holder_half", constant=2.0)),
                        field("beta*alpha", c, lipschitz0),
                        kernel("beta*(x + y)", c), "half_line", params)

    if kind == "beta_wishart_abs":
        c = {"alpha": params.alpha, "beta": params.beta}
        sigma = _sigma_or(params.sigma, "2*sqrt(|x|)", c, ModulusHint(kind="holder_half", constant=2.0))
        return _uniform(p, sigma, field("beta*alpha", c, lipschitz0),
                        kernel("beta*(|x| + |y|)", c), "real", params)

    if kind == "jacobi":
        c = {"q": params.q, "r": params.r, "beta": params.beta}
        return _uniform(p, field("2*sqrt(x*(1 - x))", c, ModulusHint(kind="holder_half", constant=2.0)),
                        field("beta*(q - (q + r)*x)", c,
                              ModulusHint(kind="lipschitz", constant=abs(params.beta * (params.q + params.r)))),
                        kernel("beta*(x*(1 - y) + y*(1 - x))", c), "unit_interval", params)

    if kind == "hyperbolic":
        c = {"gamma": params.gamma}
        return _uniform(p, _sigma_or(params.sigma, "1", c, lipschitz0),
                        _sigma_or(params.b, "0", c, lipschitz0),
                        kernel("gamma*xcoth(y - x)", c), "real", params)

    if kind == "general_psi":
        c = {"gamma": params.gamma, "k": params.psi.scale}
        source = "gamma" if params.psi.kind == "inverse" else "gamma*xcoth(k*(x - y))"
        return _uniform(p, _sigma_or(params.sigma, "1", c, lipschitz0),
                        _sigma_or(params.b, "0", c, lipschitz0),
                        kernel(source, c), "real", params)

    # beta_family
    g, h = parse_field(params.g), parse_field(params.h)
    sigma = ScalarField(eval=_BetaFamilySigma(g, h), descriptor=f"2*|({params.g})*({params.h})|")
    b = field(f"beta*({params.b})", {"beta": params.beta})
    H = InteractionKernel(eval=_BetaFamilyKernel(g, h, params.beta),
                          descriptor=f"beta*(g(x)^2 h(y)^2 + g(y)^2 h(x)^2) with g={params.g}, h={params.h}")
    return _uniform(p, sigma, b, H, params.domain, params)


def build_custom(params: Custom, p: int) -> CoefficientSet:
    """Build a user system from expression-grammar fields."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")

    def per_particle(spec: Union[str, List[str]], name: str) -> Tuple[ScalarField, ...]:
        if isinstance(spec, str):
            return (field(spec, params.constants),) * p
        if len(spec) != p:
            raise ValueError(f"{name} lists {len(spec)} fields for p={p}")
        return tuple(field(s, params.constants) for s in spec)

    sigma = per_particle(params.sigma, "sigma")
    b = per_particle(params.b, "b")

    if isinstance(params.H, str):
        shared = kernel(params.H, params.constants)
        H = {(i, j): shared for i in range(p) for j in range(i + 1, p)}
    else:
        default = kernel(params.H_default, params.constants)
        H = {(i, j): default for i in range(p) for j in range(i + 1, p)}
        for key, source in params.H.items():
            try:
                i, j = sorted(int(part) - 1 for part in key.split(","))
            except ValueError as e:
                raise ValueError(f"H key {key!r} must look like 'i,j'") from e
            if (i, j) not in H:
                raise ValueError(f"H key {key!r} is not a pair of distinct indices in 1..{p}")
            H[(i, j)] = kernel(source, params.constants)
    return CoefficientSet(p=p, sigma=sigma, b=b, H=H, domain=params.domain, preset_tag=None)


def build_system(params: Any, p: int, allow_single: bool = False) -> CoefficientSet:
    """Dispatch to build_preset or build_custom."""
    if getattr(params, "kind", None) == "custom":
        return build_custom(params, p)
    return build_preset(params, p, allow_single=allow_single)


# ==================== Singular drift ====================

def _check_gaps(cs: CoefficientSet, x: np.ndarray, K: np.ndarray) -> None:
    diff = x[..., :, None] - x[..., None, :]
    scale = np.maximum(1.0, np.abs(x))[..., :, None]
    offdiag = ~np.eye(cs.p, dtype=bool)
    bad = (np.abs(diff) < SINGULARITY_REL_GAP * scale) & (K > 0) & offdiag
    if np.any(bad):
        where = np.argwhere(bad)[0]
        i, j = int(where[-2]), int(where[-1])
        gap = float(np.abs(diff[tuple(where)]))
        raise SingularityError(f"gap between particles {i} and {j} is {gap:.3e}", pair=(i, j), gap=gap)


def singular_drift_all(cs: CoefficientSet, x: np.ndarray) -> np.ndarray:
    """b_i(x_i) + sum_{j != i} H_ij(x_i, x_j) / (x_i - x_j) for every i.

    Args:
        cs: Coefficient set
        x: States of shape (..., p)

    Returns:
        Drift array of the same shape
    """
    x = np.asarray(x, dtype=float)
    K = cs.kernel_matrix(x)
    _check_gaps(cs, x, K)
    diff = x[..., :, None] - x[..., None, :]
    safe = np.where(K != 0.0, diff, 1.0)
    idx = np.arange(cs.p)
    safe[..., idx, idx] = 1.0
    return cs.drift_values(x) + np.sum(K / safe, axis=-1)


def singular_drift(cs: CoefficientSet, i: int, x) -> float:
    """Drift of particle i (0-based) in the original singular system."""
    return float(singular_drift_all(cs, np.asarray(x, dtype=float))[i])
