"""Small dense log-barrier interior-point solver.

Solves

    minimise f0(x)  s.t.  G x <= h,  g_k(x) <= 0,  A x = b

from a strictly feasible start by following the central path: for an
increasing barrier weight ``t`` the function ``t f0(x) - sum log(-g(x))`` is
minimised by equality-constrained Newton with backtracking.  The returned
``gap`` is ``m / t``, an upper bound on the suboptimality.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NoStrictlyFeasibleStartError, SolverError


@dataclass(frozen=True)
class Function:
    """Value / gradient / Hessian callbacks.

    A vector-valued function (several constraints at once) returns shapes
    ``(m,)``, ``(m, n)`` and ``(m, n, n)``.
    """

    value: Callable[[np.ndarray], object]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]


def stack_functions(funcs: Sequence[Function]) -> Function:
    """Combine scalar constraint callbacks into one vector-valued function."""
    funcs = list(funcs)
    return Function(
        value=lambda x: np.array([f.value(x) for f in funcs], dtype=float),
        gradient=lambda x: np.array([f.gradient(x) for f in funcs], dtype=float),
        hessian=lambda x: np.array([f.hessian(x) for f in funcs], dtype=float),
    )


@dataclass
class ConvexProgram:
    n: int
    objective: Function
    x0: np.ndarray
    inequalities: Optional[Function] = None
    linear_ineq: Optional[tuple[np.ndarray, np.ndarray]] = None
    linear_eq: Optional[tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if isinstance(self.inequalities, (list, tuple)):
            self.inequalities = stack_functions(self.inequalities)

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        parts = []
        if self.linear_ineq is not None:
            G, h = self.linear_ineq
            parts.append(G @ x - h)
        if self.inequalities is not None:
            parts.append(np.atleast_1d(self.inequalities.value(x)))
        return np.concatenate(parts) if parts else np.zeros(0)

    @property
    def m(self) -> int:
        return len(self.constraint_values(self.x0))


@dataclass(frozen=True)
class SolverConfig:
    t0: float = 1.0
    mu: float = 10.0
    tol: float = 1e-8
    max_newton: int = 100
    max_outer: int = 60
    newton_tol: float = 1e-10
    alpha: float = 0.01
    beta: float = 0.5
    regularization: float = 1e-10


class Status(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max-iterations"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass
class SolverResult:
    x: np.ndarray
    objective: float
    gap: float
    outer_iterations: int
    newton_iterations: int
    status: Status
    objective_path: list = field(default_factory=list)
    min_slack: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


class _Barrier:
    def __init__(self, prog: ConvexProgram):
        self.prog = prog
        self.G, self.h = prog.linear_ineq if prog.linear_ineq is not None else (None, None)

    def slacks(self, x):
        return -self.prog.constraint_values(x)

    def value(self, x, t):
        s = self.slacks(x)
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            return np.inf
        f = self.prog.objective.value(x)
        return t * f - np.sum(np.log(s))

    def derivatives(self, x, t):
        obj = self.prog.objective
        grad = t * np.asarray(obj.gradient(x), dtype=float)
        hess = t * np.asarray(obj.hessian(x), dtype=float)
        if self.G is not None:
            s = self.h - self.G @ x
            Gs = self.G / s[:, None]
            grad = grad + Gs.sum(axis=0)
            hess = hess + Gs.T @ Gs
        ineq = self.prog.inequalities
        if ineq is not None:
            g = np.atleast_1d(ineq.value(x))
            J = np.atleast_2d(ineq.gradient(x))
            H = np.asarray(ineq.hessian(x)).reshape(len(g), self.prog.n, self.prog.n)
            inv = -1.0 / g
            Js = J * inv[:, None]
            grad = grad + Js.sum(axis=0)
            hess = hess + Js.T @ Js + np.einsum("k,kij->ij", inv, H)
        return grad, hess


def _newton_direction(hess, grad, A, reg0):
    n = len(grad)
    scale = max(np.trace(hess) / n, 1.0)
    for attempt in range(4):
        H = hess if attempt == 0 else hess + reg0 * scale * (100.0 ** (attempt - 1)) * np.eye(n)
        try:
            if A is None:
                dx = np.linalg.solve(H, -grad)
            else:
                p = A.shape[0]
                K = np.block([[H, A.T], [A, np.zeros((p, p))]])
                rhs = np.concatenate([-grad, np.zeros(p)])
                dx = np.linalg.solve(K, rhs)[:n]
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(dx)):
            return dx
    return None


def solve(program: ConvexProgram, config: SolverConfig = SolverConfig()) -> SolverResult:
    """Run the barrier method; raises on an infeasible start or a singular system."""
    x = program.x0.copy()
    barrier = _Barrier(program)
    s0 = barrier.slacks(x)
    if np.any(s0 <= 0) or not np.all(np.isfinite(s0)):
        raise NoStrictlyFeasibleStartError(
            f"start violates {int(np.sum(~(s0 > 0)))} inequality constraint(s)")
    if program.linear_eq is not None:
        A, b = program.linear_eq
        if np.max(np.abs(A @ x - b)) > 1e-9 * max(1.0, np.max(np.abs(b))):
            raise NoStrictlyFeasibleStartError("start violates the equality constraints")
    else:
        A = None
    m = len(s0)
    t = config.t0
    newton_total = 0
    path = []
    status = Status.MAX_ITERATIONS
    outer = 0
    for outer in range(1, config.max_outer + 1):
        for _ in range(config.max_newton):
            grad, hess = barrier.derivatives(x, t)
            dx = _newton_direction(hess, grad, A, config.regularization)
            if dx is None:
                raise SolverError("Newton system singular after regularisation")
            newton_total += 1
            dec2 = -float(grad @ dx)
            if dec2 / 2.0 <= config.newton_tol:
                break
            step = 1.0
            f_x = barrier.value(x, t)
            while True:
                x_new = x + step * dx
                f_new = barrier.value(x_new, t)
                if f_new <= f_x + config.alpha * step * float(grad @ dx):
                    break
                step *= config.beta
                if step < 1e-20:
                    break
            if step < 1e-20 or not f_new < f_x:
                # no progress possible at this precision; treat as centred
                break
            x = x_new
        path.append(float(program.objective.value(x)))
        if m / t < config.tol:
            status = Status.CONVERGED
            break
        t *= config.mu
    slack = barrier.slacks(x)
    return SolverResult(
        x=x,
        objective=float(program.objective.value(x)),
        gap=m / t,
        outer_iterations=outer,
        newton_iterations=newton_total,
        status=status,
        objective_path=path,
        min_slack=float(slack.min()) if len(slack) else np.inf,
    )


def gradient_check(program: ConvexProgram, point, step: float = 1e-5) -> float:
    """Largest central-difference mismatch over objective and nonlinear constraints.

    Gradients are compared to differenced values and Hessians to differenced
    gradients.  Each error is scaled by ``max(1, max|analytic|)`` of the
    quantity being checked.
    """
    x = np.asarray(point, dtype=float)
    n = len(x)
    funcs = [(program.objective, False)]
    if program.inequalities is not None:
        funcs.append((program.inequalities, True))
    worst = 0.0
    eye = np.eye(n)
    for f, vector in funcs:
        g = np.atleast_2d(f.gradient(x)) if vector else np.atleast_2d(f.gradient(x))
        H = np.asarray(f.hessian(x)).reshape(g.shape[0], n, n)
        fd_g = np.empty_like(g)
        fd_H = np.empty_like(H)
        for j in range(n):
            xp, xm = x + step * eye[j], x - step * eye[j]
            fd_g[:, j] = (np.atleast_1d(f.value(xp)) - np.atleast_1d(f.value(xm))) / (2 * step)
            fd_H[:, :, j] = (np.atleast_2d(f.gradient(xp)) - np.atleast_2d(f.gradient(xm))) / (2 * step)
        for row in range(g.shape[0]):
            worst = max(worst, np.max(np.abs(fd_g[row] - g[row])) / max(1.0, np.max(np.abs(g[row]))))
            worst = max(worst, np.max(np.abs(fd_H[row] - H[row])) / max(1.0, np.max(np.abs(H[row]))))
    return float(worst)
