"""Small arithmetic expression language for coefficient fields.

Config files declare custom coefficients as strings such as
``"2*sqrt(max(x, 0))"`` or ``"beta*(|x| + |y|)"``. Expressions are parsed
once with lark and compiled into vectorised numpy closures. Only the
variables ``x`` and ``y``, named constants and the functions in
``FUNCTIONS`` are accepted, so configs stay portable and never execute
arbitrary code.
"""

import logging
from typing import Callable, Dict, Iterable, Mapping, Optional, Tuple

import numpy as np
from lark import Lark, Transformer, v_args
from lark.exceptions import LarkError

logger = logging.getLogger(__name__)

GRAMMAR = r"""
?start: sum

?sum: product
    | sum "+" product   -> add
    | sum "-" product   -> sub

?product: unary
    | product "*" unary -> mul
    | product "/" unary -> div

?unary: power
    | "-" unary         -> neg
    | "+" unary

?power: atom
    | atom ("^" | "**") unary -> pow

?atom: NUMBER                        -> number
     | NAME                          -> name
     | NAME "(" sum ("," sum)* ")"   -> call
     | "(" sum ")"
     | "|" sum "|"                   -> absval

%import common.NUMBER
%import common.CNAME -> NAME
%import common.WS
%ignore WS
"""


def _sqrt(u):
    return np.sqrt(np.maximum(u, 0.0))


def _coth(u):
    with np.errstate(divide="ignore", invalid="ignore"):
        return 1.0 / np.tanh(u)


def _xcoth(u):
    """u * coth(u), continuously extended by 1 at u = 0."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        value = u / np.tanh(np.where(small, 1.0, u))
    return np.where(small, 1.0 + u * u / 3.0, value)


FUNCTIONS: Dict[str, Tuple[Callable, int]] = {
    "sqrt": (_sqrt, 1),
    "coth": (_coth, 1),
    "xcoth": (_xcoth, 1),
    "abs": (np.abs, 1),
    "exp": (np.exp, 1),
    "max": (np.maximum, 2),
    "min": (np.minimum, 2),
}

CONSTANTS: Dict[str, float] = {"pi": float(np.pi)}

_PARSER = Lark(GRAMMAR, parser="earley", ambiguity="resolve")

Env = Mapping[str, np.ndarray]


@v_args(inline=True)
class _Compiler(Transformer):
    """Turns the parse tree into nested closures taking an environment."""

    def __init__(self, variables: Iterable[str], constants: Mapping[str, float]):
        super().__init__()
        self.variables = set(variables)
        self.constants = dict(CONSTANTS)
        self.constants.update(constants)
        self.used = set()

    def number(self, token):
        value = float(token)
        return lambda env: value

    def name(self, token):
        key = str(token)
        if key in self.variables:
            self.used.add(key)
            return lambda env: env[key]
        if key in self.constants:
            value = float(self.constants[key])
            return lambda env: value
        raise ValueError(f"unknown name {key!r}")

    def call(self, token, *args):
        key = str(token)
        if key not in FUNCTIONS:
            raise ValueError(f"unknown function {key!r}")
        fn, arity = FUNCTIONS[key]
        if len(args) != arity:
            raise ValueError(f"{key}() takes {arity} argument(s), got {len(args)}")
        if arity == 1:
            (a,) = args
            return lambda env: fn(a(env))
        a, b = args
        return lambda env: fn(a(env), b(env))

    def absval(self, a):
        return lambda env: np.abs(a(env))

    def add(self, a, b):
        return lambda env: a(env) + b(env)

    def sub(self, a, b):
        return lambda env: a(env) - b(env)

    def mul(self, a, b):
        return lambda env: a(env) * b(env)

    def div(self, a, b):
        return lambda env: a(env) / b(env)

    def pow(self, a, b):
        return lambda env: np.power(a(env), b(env))

    def neg(self, a):
        return lambda env: -a(env)


class Expression:
    """A compiled, picklable expression in the variables ``x`` (and ``y``).

    Args:
        source: Expression text
        variables: Allowed variable names, in call order
        constants: Extra named constants (e.g. preset parameters)
    """

    def __init__(
        self,
        source: str,
        variables: Tuple[str, ...] = ("x",),
        constants: Optional[Mapping[str, float]] = None,
    ):
        self.source = source
        self.variables = tuple(variables)
        self.constants = dict(constants or {})
        self._fn = self._compile()

    def _compile(self) -> Callable[[Env], np.ndarray]:
        try:
            tree = _PARSER.parse(self.source)
        except LarkError as e:
            raise ValueError(f"cannot parse expression {self.source!r}: {e}") from e
        compiler = _Compiler(self.variables, self.constants)
        try:
            fn = compiler.transform(tree)
        except Exception as e:  # lark wraps transformer errors
            cause = getattr(e, "orig_exc", e)
            raise ValueError(f"invalid expression {self.source!r}: {cause}") from e
        self.used_variables = frozenset(compiler.used)
        return fn

    def __call__(self, *args) -> np.ndarray:
        if len(args) != len(self.variables):
            raise TypeError(f"expected {len(self.variables)} argument(s), got {len(args)}")
        arrays = [np.asarray(a, dtype=float) for a in args]
        shape = np.broadcast_shapes(*(a.shape for a in arrays))
        env = dict(zip(self.variables, arrays))
        with np.errstate(invalid="ignore", over="ignore"):
            value = self._fn(env)
        return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()

    @property
    def is_constant(self) -> bool:
        return not self.used_variables

    def __reduce__(self):
        return (Expression, (self.source, self.variables, self.constants))

    def __repr__(self) -> str:
        if self.constants:
            return f"Expression({self.source!r}, constants={self.constants})"
        return f"Expression({self.source!r})"


def parse_field(source: str, constants: Optional[Mapping[str, float]] = None) -> Expression:
    """Compile a scalar field expression in ``x``."""
    return Expression(source, ("x",), constants)


def parse_kernel(source: str, constants: Optional[Mapping[str, float]] = None) -> Expression:
    """Compile an interaction kernel expression in ``x`` and ``y``."""
    return Expression(source, ("x", "y"), constants)
