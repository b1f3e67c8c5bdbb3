"""Primal log-barrier solver for the smooth convex SCA subproblem.

The program is ``maximize c.x  subject to  g_i(x) <= 0`` where each ``g_i`` is
an :class:`~flmimo.opt.expressions.Expr` with non-negative curved weights.
For a decreasing barrier weight ``mu`` the solver minimizes

    -c.x / mu - sum_i log(-g_i(x))

with damped Newton steps, starting from a strictly feasible point.  Gradients
and Hessians come from the term structure; the terms of all constraints are
stacked into arrays once per program so each Newton step is a handful of
matrix products.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .expressions import Affine, Expr, QuadOverLinear, Reciprocal, Square, VariableLayout

logger = logging.getLogger("flmimo.opt.cvxsolve")

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max-iter"
STATUS_FAILED = "failed"


class InfeasibleStartError(ValueError):
    """The start point does not strictly satisfy every constraint."""

    def __init__(self, tags: List[str]):
        self.tags = list(tags)
        shown = ", ".join(self.tags[:8])
        more = f" (+{len(self.tags) - 8} more)" if len(self.tags) > 8 else ""
        super().__init__(f"start point is not strictly feasible: {shown}{more}")


@dataclass(frozen=True)
class Constraint:
    """``expr <= 0``; ``tag`` names the constraint in logs and dumps."""

    tag: str
    expr: Expr


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-8
    opt: float = 1e-7
    mu0: float = 1.0
    mu_factor: float = 10.0
    newton: float = 1e-10
    max_outer: int = 40
    max_newton: int = 100
    armijo: float = 0.01
    backtrack: float = 0.5


@dataclass(frozen=True)
class Solution:
    values: Dict[str, np.ndarray]
    x: np.ndarray
    objective: float
    kkt_residual: float
    max_violation: float
    status: str
    outer_iterations: int
    newton_iterations: int


class _StackedTerms:
    """All curved terms of one kind across every constraint, as dense arrays."""

    def __init__(self, owners: List[int], weights: List[float], first: List[Affine], second: List[Affine], n: int):
        self.owner = np.asarray(owners, dtype=int)
        self.weight = np.asarray(weights, dtype=float)
        self.count = len(owners)
        self.p = np.array([form.coef for form in first]).reshape(self.count, n)
        self.p0 = np.array([form.const for form in first], dtype=float)
        self.a = np.array([form.coef for form in second]).reshape(self.count, n)
        self.a0 = np.array([form.const for form in second], dtype=float)


class _CompiledProgram:
    def __init__(self, constraints: Tuple[Constraint, ...], n: int):
        m = len(constraints)
        self.m = m
        self.n = n
        self.A = np.zeros((m, n))
        self.b = np.zeros(m)
        collected = {"recip": ([], [], [], []), "qol": ([], [], [], []), "sq": ([], [], [], [])}
        for row, constraint in enumerate(constraints):
            self.A[row] = constraint.expr.affine.coef
            self.b[row] = constraint.expr.affine.const
            for term in constraint.expr.terms:
                if isinstance(term, Reciprocal):
                    bucket, first, second = collected["recip"], term.form, term.form
                elif isinstance(term, QuadOverLinear):
                    bucket, first, second = collected["qol"], term.num, term.den
                elif isinstance(term, Square):
                    bucket, first, second = collected["sq"], term.form, term.form
                else:
                    raise TypeError(f"unsupported term {type(term).__name__}")
                bucket[0].append(row)
                bucket[1].append(term.weight)
                bucket[2].append(first)
                bucket[3].append(second)
        self.recip = _StackedTerms(*collected["recip"], n)
        self.qol = _StackedTerms(*collected["qol"], n)
        self.sq = _StackedTerms(*collected["sq"], n)

    def domain_ok(self, x: np.ndarray) -> bool:
        if self.recip.count and np.any(self.recip.a @ x + self.recip.a0 <= 0.0):
            return False
        if self.qol.count and np.any(self.qol.a @ x + self.qol.a0 <= 0.0):
            return False
        return True

    def values(self, x: np.ndarray) -> np.ndarray:
        g = self.A @ x + self.b
        if self.recip.count:
            v = self.recip.a @ x + self.recip.a0
            np.add.at(g, self.recip.owner, self.recip.weight / v)
        if self.qol.count:
            u = self.qol.p @ x + self.qol.p0
            v = self.qol.a @ x + self.qol.a0
            np.add.at(g, self.qol.owner, self.qol.weight * u * u / v)
        if self.sq.count:
            u = self.sq.p @ x + self.sq.p0
            np.add.at(g, self.sq.owner, self.sq.weight * u * u)
        return g

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        J = self.A.copy()
        if self.recip.count:
            v = self.recip.a @ x + self.recip.a0
            scale = -self.recip.weight / (v * v)
            np.add.at(J, self.recip.owner, scale[:, None] * self.recip.a)
        if self.qol.count:
            ratio = (self.qol.p @ x + self.qol.p0) / (self.qol.a @ x + self.qol.a0)
            w = self.qol.weight
            rows = (2.0 * w * ratio)[:, None] * self.qol.p - (w * ratio * ratio)[:, None] * self.qol.a
            np.add.at(J, self.qol.owner, rows)
        if self.sq.count:
            u = self.sq.p @ x + self.sq.p0
            np.add.at(J, self.sq.owner, (2.0 * self.sq.weight * u)[:, None] * self.sq.p)
        return J

    def curvature(self, x: np.ndarray, multipliers: np.ndarray) -> np.ndarray:
        """``sum_i multipliers[i] * Hessian(g_i)(x)``."""
        H = np.zeros((self.n, self.n))
        if self.recip.count:
            v = self.recip.a @ x + self.recip.a0
            s = multipliers[self.recip.owner] * 2.0 * self.recip.weight / v ** 3
            H += (self.recip.a.T * s) @ self.recip.a
        if self.qol.count:
            u = self.qol.p @ x + self.qol.p0
            v = self.qol.a @ x + self.qol.a0
            q = self.qol.p - (u / v)[:, None] * self.qol.a
            s = multipliers[self.qol.owner] * 2.0 * self.qol.weight / v
            H += (q.T * s) @ q
        if self.sq.count:
            s = multipliers[self.sq.owner] * 2.0 * self.sq.weight
            H += (self.sq.p.T * s) @ self.sq.p
        return H


@dataclass(frozen=True, eq=False)
class ConvexProgram:
    """``maximize objective(x)`` subject to every ``constraint.expr(x) <= 0``."""

    layout: VariableLayout
    objective: Affine
    constraints: Tuple[Constraint, ...]

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        n = self.layout.size
        if self.objective.size != n:
            raise ValueError("objective size does not match the variable layout.")
        for constraint in self.constraints:
            if constraint.expr.size != n:
                raise ValueError(f"constraint '{constraint.tag}' has the wrong size.")
            if not constraint.expr.is_convex:
                raise ValueError(f"constraint '{constraint.tag}' is not convex.")

    @cached_property
    def compiled(self) -> _CompiledProgram:
        return _CompiledProgram(self.constraints, self.layout.size)

    def residuals(self, x: np.ndarray) -> np.ndarray:
        return self.compiled.values(np.asarray(x, dtype=float))

    def violated(self, x: np.ndarray, slack: float = 0.0) -> List[str]:
        """Tags of constraints with ``g >= -slack`` (or outside their domain) at ``x``."""
        x = np.asarray(x, dtype=float)
        tags = []
        for constraint in self.constraints:
            if not constraint.expr.in_domain(x) or constraint.expr.value(x) >= -slack:
                tags.append(constraint.tag)
        return tags

    def unpack(self, x: np.ndarray) -> Dict[str, np.ndarray]:
        return {name: np.array(x[self.layout.slice(name)]) for name, _ in self.layout.blocks}


def _newton_step(H: np.ndarray, grad: np.ndarray) -> Optional[np.ndarray]:
    diag = np.diag(H)
    if np.any(~np.isfinite(diag)) or np.any(diag <= 0.0):
        return None
    d = 1.0 / np.sqrt(diag)
    scaled = H * d[:, None] * d[None, :]
    rhs = -grad * d
    try:
        step = cho_solve(cho_factor(scaled, check_finite=False), rhs, check_finite=False)
    except LinAlgError:
        step = np.linalg.lstsq(scaled, rhs, rcond=None)[0]
    step = step * d
    if not np.all(np.isfinite(step)):
        return None
    return step


def _barrier_value(compiled: _CompiledProgram, c: np.ndarray, x: np.ndarray, mu: float) -> float:
    if not compiled.domain_ok(x):
        return np.inf
    g = compiled.values(x)
    if np.any(g >= 0.0):
        return np.inf
    return float(-(c @ x) / mu - np.sum(np.log(-g)))


@dataclass
class _Centering:
    x: np.ndarray
    decrement: float = np.inf
    steps: int = 0
    ok: bool = True
    notes: List[str] = field(default_factory=list)


def _center(compiled: _CompiledProgram, c: np.ndarray, x: np.ndarray, mu: float, tol: Tolerances) -> _Centering:
    state = _Centering(x=x)
    for _ in range(tol.max_newton):
        g = compiled.values(state.x)
        inv = 1.0 / (-g)
        J = compiled.jacobian(state.x)
        grad = -c / mu + J.T @ inv
        H = (J.T * (inv * inv)) @ J + compiled.curvature(state.x, inv)
        step = _newton_step(H, grad)
        if step is None:
            state.ok = False
            state.notes.append("singular Newton system")
            return state
        state.decrement = float(-(grad @ step))
        if state.decrement / 2.0 <= tol.newton:
            return state

        phi = _barrier_value(compiled, c, state.x, mu)
        alpha = 1.0
        while True:
            candidate = state.x + alpha * step
            value = _barrier_value(compiled, c, candidate, mu)
            if value <= phi - tol.armijo * alpha * state.decrement:
                break
            alpha *= tol.backtrack
            if alpha < 1e-14:
                # Round-off floor: accept the point if the decrement is already tiny.
                state.ok = state.decrement / 2.0 <= 1e3 * tol.newton
                if not state.ok:
                    state.notes.append("line search stalled")
                return state
        state.x = candidate
        state.steps += 1
    return state


def solve(program: ConvexProgram, start: np.ndarray, tol: Optional[Tolerances] = None) -> Solution:
    """Maximize ``program`` from a strictly feasible ``start``.

    Raises :class:`InfeasibleStartError` if ``start`` is on or outside the
    boundary of any constraint.  The returned point is never worse than
    ``start``; when Newton centering breaks down the status is ``"failed"``
    and the best point reached so far comes back.
    """
    tol = tol or Tolerances()
    compiled = program.compiled
    c = np.asarray(program.objective.coef, dtype=float)
    x0 = np.array(start, dtype=float)
    if x0.shape != (program.layout.size,):
        raise ValueError(f"start must have length {program.layout.size}.")
    if not compiled.domain_ok(x0) or np.any(compiled.values(x0) >= 0.0):
        raise InfeasibleStartError(program.violated(x0))

    x = x0.copy()
    mu = tol.mu0
    m = compiled.m
    status = STATUS_MAX_ITER
    residual = np.inf
    newton_total = 0
    outer = 0
    for outer in range(1, tol.max_outer + 1):
        centering = _center(compiled, c, x, mu, tol)
        x = centering.x
        newton_total += centering.steps
        decrement = centering.decrement if np.isfinite(centering.decrement) else 0.0
        residual = m * mu + mu * decrement / 2.0
        logger.debug(
            "outer=%d mu=%.3e newton=%d decrement=%.3e residual=%.3e objective=%.10g",
            outer, mu, centering.steps, centering.decrement, residual, float(c @ x) + program.objective.const,
        )
        if not centering.ok:
            logger.debug("stopping: %s", "; ".join(centering.notes))
            residual = np.inf
            status = STATUS_FAILED
            break
        if residual <= tol.opt:
            status = STATUS_OPTIMAL
            break
        mu /= tol.mu_factor

    if c @ x < c @ x0:
        x = x0
        status = STATUS_FAILED

    g = compiled.values(x)
    return Solution(
        values=program.unpack(x),
        x=x,
        objective=program.objective(x),
        kkt_residual=float(residual),
        max_violation=float(max(0.0, g.max())) if g.size else 0.0,
        status=status,
        outer_iterations=outer,
        newton_iterations=newton_total,
    )
