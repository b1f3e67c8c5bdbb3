"""Structured scalar expressions over a flat variable vector.

An :class:`Expr` is an affine part plus a tuple of curved terms, each of which
knows its value, gradient and Hessian in closed form:

* :class:`Reciprocal`      ``w / (a.x + b)``
* :class:`QuadOverLinear`  ``w * (p.x + q)^2 / (a.x + b)``
* :class:`Square`          ``w * (p.x + q)^2``

With ``w >= 0`` every term is convex on its domain (positive denominators),
so an expression whose curved terms all carry non-negative weights is convex.
"""

from dataclasses import dataclass, field
from numbers import Real
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    array.setflags(write=False)
    return array


def _format_linear(coef: np.ndarray, const: float, names: Sequence[str]) -> str:
    parts = [f"{c:+.6g}*{names[i]}" for i, c in enumerate(coef) if c != 0.0]
    if const != 0.0 or not parts:
        parts.append(f"{const:+.6g}")
    return " ".join(parts)


@dataclass(frozen=True, eq=False)
class Affine:
    """``coef . x + const``."""

    __array_ufunc__ = None

    coef: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coef", _frozen(self.coef))
        object.__setattr__(self, "const", float(self.const))

    @classmethod
    def constant(cls, size: int, value: float = 0.0) -> "Affine":
        return cls(np.zeros(size), value)

    @property
    def size(self) -> int:
        return int(self.coef.shape[0])

    def __call__(self, x: np.ndarray) -> float:
        return float(self.coef @ x + self.const)

    def __add__(self, other):
        if isinstance(other, Affine):
            return Affine(self.coef + other.coef, self.const + other.const)
        if isinstance(other, Real):
            return Affine(self.coef, self.const + float(other))
        return NotImplemented

    __radd__ = __add__

    def __neg__(self) -> "Affine":
        return Affine(-self.coef, -self.const)

    def __sub__(self, other):
        if isinstance(other, (Affine, Real)):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, Real):
            return (-self) + other
        return NotImplemented

    def __mul__(self, scalar):
        if isinstance(scalar, Real):
            return Affine(self.coef * float(scalar), self.const * float(scalar))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Real):
            return self * (1.0 / float(scalar))
        return NotImplemented

    def describe(self, names: Sequence[str]) -> str:
        return _format_linear(self.coef, self.const, names)


@dataclass(frozen=True, eq=False)
class Reciprocal:
    weight: float
    form: Affine

    def value(self, x: np.ndarray) -> float:
        return self.weight / self.form(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        v = self.form(x)
        return -self.weight / (v * v) * self.form.coef

    def hessian(self, x: np.ndarray) -> np.ndarray:
        v = self.form(x)
        a = self.form.coef
        return (2.0 * self.weight / v ** 3) * np.outer(a, a)

    def in_domain(self, x: np.ndarray) -> bool:
        return self.form(x) > 0.0

    def scaled(self, factor: float) -> "Reciprocal":
        return Reciprocal(self.weight * factor, self.form)

    def describe(self, names: Sequence[str]) -> str:
        return f"{self.weight:+.6g}/({self.form.describe(names)})"


@dataclass(frozen=True, eq=False)
class QuadOverLinear:
    weight: float
    num: Affine
    den: Affine

    def value(self, x: np.ndarray) -> float:
        u = self.num(x)
        return self.weight * u * u / self.den(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        u = self.num(x)
        v = self.den(x)
        ratio = u / v
        return self.weight * (2.0 * ratio * self.num.coef - ratio * ratio * self.den.coef)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        u = self.num(x)
        v = self.den(x)
        q = self.num.coef - (u / v) * self.den.coef
        return (2.0 * self.weight / v) * np.outer(q, q)

    def in_domain(self, x: np.ndarray) -> bool:
        return self.den(x) > 0.0

    def scaled(self, factor: float) -> "QuadOverLinear":
        return QuadOverLinear(self.weight * factor, self.num, self.den)

    def describe(self, names: Sequence[str]) -> str:
        return f"{self.weight:+.6g}*({self.num.describe(names)})^2/({self.den.describe(names)})"


@dataclass(frozen=True, eq=False)
class Square:
    weight: float
    form: Affine

    def value(self, x: np.ndarray) -> float:
        u = self.form(x)
        return self.weight * u * u

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * self.weight * self.form(x) * self.form.coef

    def hessian(self, x: np.ndarray) -> np.ndarray:
        p = self.form.coef
        return 2.0 * self.weight * np.outer(p, p)

    def in_domain(self, x: np.ndarray) -> bool:
        return True

    def scaled(self, factor: float) -> "Square":
        return Square(self.weight * factor, self.form)

    def describe(self, names: Sequence[str]) -> str:
        return f"{self.weight:+.6g}*({self.form.describe(names)})^2"


Term = Union[Reciprocal, QuadOverLinear, Square]
Operand = Union["Expr", Affine, Real]


@dataclass(frozen=True, eq=False)
class Expr:
    """Affine part plus curved terms; supports ``+``, ``-`` and scaling by reals."""

    __array_ufunc__ = None

    affine: Affine
    terms: Tuple[Term, ...] = ()

    @property
    def size(self) -> int:
        return self.affine.size

    def _coerce(self, other: Operand) -> "Expr":
        if isinstance(other, Expr):
            return other
        if isinstance(other, Affine):
            return Expr(other)
        if isinstance(other, Real):
            return Expr(Affine.constant(self.size, float(other)))
        raise TypeError(f"cannot combine Expr with {type(other).__name__}")

    def __add__(self, other: Operand) -> "Expr":
        rhs = self._coerce(other)
        return Expr(self.affine + rhs.affine, self.terms + rhs.terms)

    __radd__ = __add__

    def __neg__(self) -> "Expr":
        return self * -1.0

    def __sub__(self, other: Operand) -> "Expr":
        return self + (-self._coerce(other))

    def __rsub__(self, other: Operand) -> "Expr":
        return self._coerce(other) - self

    def __mul__(self, scalar: Real) -> "Expr":
        if not isinstance(scalar, Real):
            return NotImplemented
        factor = float(scalar)
        return Expr(self.affine * factor, tuple(term.scaled(factor) for term in self.terms))

    __rmul__ = __mul__

    def value(self, x: np.ndarray) -> float:
        return self.affine(x) + sum(term.value(x) for term in self.terms)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        grad = np.array(self.affine.coef, dtype=float)
        for term in self.terms:
            grad += term.gradient(x)
        return grad

    def hessian(self, x: np.ndarray) -> np.ndarray:
        hess = np.zeros((self.size, self.size))
        for term in self.terms:
            hess += term.hessian(x)
        return hess

    def in_domain(self, x: np.ndarray) -> bool:
        return all(term.in_domain(x) for term in self.terms)

    @property
    def is_convex(self) -> bool:
        return all(term.weight >= 0.0 for term in self.terms)

    @property
    def is_concave(self) -> bool:
        return all(term.weight <= 0.0 for term in self.terms)

    def describe(self, names: Sequence[str]) -> str:
        parts = [self.affine.describe(names)]
        parts.extend(term.describe(names) for term in self.terms)
        return " ".join(parts)


def reciprocal(weight: float, form: Affine) -> Expr:
    return Expr(Affine.constant(form.size), (Reciprocal(float(weight), form),))


def quad_over_linear(weight: float, num: Affine, den: Affine) -> Expr:
    return Expr(Affine.constant(num.size), (QuadOverLinear(float(weight), num, den),))


def square(weight: float, form: Affine) -> Expr:
    return Expr(Affine.constant(form.size), (Square(float(weight), form),))


@dataclass(frozen=True)
class VariableLayout:
    """Named blocks of a flat variable vector, in declaration order."""

    blocks: Tuple[Tuple[str, int], ...]
    _offsets: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        offsets: Dict[str, int] = {}
        position = 0
        for name, count in self.blocks:
            if name in offsets:
                raise ValueError(f"duplicate variable block '{name}'.")
            offsets[name] = position
            position += int(count)
        object.__setattr__(self, "_offsets", offsets)

    @property
    def size(self) -> int:
        return sum(count for _, count in self.blocks)

    def count(self, name: str) -> int:
        return dict(self.blocks)[name]

    def slice(self, name: str) -> slice:
        start = self._offsets[name]
        return slice(start, start + self.count(name))

    def index(self, name: str, i: int = 0) -> int:
        count = self.count(name)
        if not 0 <= i < count:
            raise IndexError(f"{name} index {i} out of range for {count} entries.")
        return self._offsets[name] + i

    def variable(self, name: str, i: int = 0) -> Affine:
        coef = np.zeros(self.size)
        coef[self.index(name, i)] = 1.0
        return Affine(coef)

    def block_sum(self, name: str) -> Affine:
        coef = np.zeros(self.size)
        coef[self.slice(name)] = 1.0
        return Affine(coef)

    def constant(self, value: float) -> Affine:
        return Affine.constant(self.size, value)

    def names(self) -> List[str]:
        labels: List[str] = []
        for name, count in self.blocks:
            if count == 1:
                labels.append(name)
            else:
                labels.extend(f"{name}[{i}]" for i in range(count))
        return labels
