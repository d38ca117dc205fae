"""Dense two-phase simplex for small box-bounded linear programs.

Problems in this library have at most a couple of dozen variables and
constraints, so a plain tableau with Bland's anti-cycling rule is exact
enough and keeps basic (vertex) solutions, which the enumeration oracle and
the polish step rely on. Relations are "<=" or "=="; encode a >= row by
negating it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Constraint", "LinearProgram", "LpResult", "feasible", "maximize"]

_PIVOT_TOL = 1e-11
_MAX_ITER = 10_000

Constraint = tuple[np.ndarray, float, str]  # (coefficients, rhs, "<=" or "==")


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """maximize objective @ x subject to constraints and per-variable bounds."""

    objective: np.ndarray
    constraints: tuple[Constraint, ...]
    bounds: tuple[tuple[float, float | None], ...]

    def __post_init__(self) -> None:
        obj = np.asarray(self.objective, dtype=float)
        n = obj.shape[0]
        rows = []
        for coeffs, rhs, rel in self.constraints:
            coeffs = np.asarray(coeffs, dtype=float)
            if coeffs.shape != (n,):
                raise ValueError("constraint dimension does not match the objective")
            if rel not in ("<=", "=="):
                raise ValueError(f"unsupported relation {rel!r}")
            rows.append((coeffs, float(rhs), rel))
        bounds = tuple((float(lo), None if hi is None else float(hi)) for lo, hi in self.bounds)
        if len(bounds) != n:
            raise ValueError("bounds length does not match the objective")
        for lo, hi in bounds:
            if hi is not None and lo > hi:
                raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "constraints", tuple(rows))
        object.__setattr__(self, "bounds", bounds)


@dataclass(frozen=True, eq=False)
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "feasible"
    value: float | None
    x: np.ndarray | None


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and abs(T[r, col]) > 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run_simplex(T: np.ndarray, basis: list[int], ncols: int) -> str:
    """Pivot until the objective row has no positive reduced cost (maximize).

    The objective row is T[-1, :ncols]; Bland's rule picks the lowest-index
    entering column and the lowest-index basic variable on ratio ties, which
    guarantees termination.
    """
    m = T.shape[0] - 1
    for _ in range(_MAX_ITER):
        enter = -1
        for j in range(ncols):
            if T[-1, j] > _PIVOT_TOL:
                enter = j
                break
        if enter < 0:
            return "optimal"
        leave = -1
        best_ratio = np.inf
        for i in range(m):
            a = T[i, enter]
            if a > _PIVOT_TOL:
                ratio = T[i, -1] / a
                if ratio < best_ratio - _PIVOT_TOL or (
                    abs(ratio - best_ratio) <= _PIVOT_TOL
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            return "unbounded"
        _pivot(T, basis, leave, enter)
    raise RuntimeError("simplex iteration limit exceeded")


def _solve(lp: LinearProgram, want_optimum: bool) -> LpResult:
    n = lp.objective.shape[0]
    lo = np.array([b[0] for b in lp.bounds])

    # Shift variables so every lower bound is zero; finite upper bounds
    # become explicit rows.
    rows: list[tuple[np.ndarray, float, str]] = []
    for coeffs, rhs, rel in lp.constraints:
        rows.append((coeffs.copy(), rhs - float(coeffs @ lo), rel))
    for j, (l, h) in enumerate(lp.bounds):
        if h is not None:
            unit = np.zeros(n)
            unit[j] = 1.0
            rows.append((unit, h - l, "<="))

    m = len(rows)
    kinds: list[str] = []  # per row: "le", "ge" or "eq" after rhs sign fix
    A = np.zeros((m, n))
    b = np.zeros(m)
    for i, (coeffs, rhs, rel) in enumerate(rows):
        if rhs < 0.0:
            coeffs = -coeffs
            rhs = -rhs
            rel = {"<=": ">=", "==": "=="}[rel]
        A[i] = coeffs
        b[i] = rhs
        kinds.append({"<=": "le", ">=": "ge", "==": "eq"}[rel])

    n_slack = sum(1 for k in kinds if k in ("le", "ge"))
    n_art = sum(1 for k in kinds if k in ("ge", "eq"))
    total = n + n_slack + n_art
    T = np.zeros((m + 1, total + 1))
    T[:m, :n] = A
    T[:m, -1] = b

    basis = [-1] * m
    s = n
    a = n + n_slack
    art_cols: list[int] = []
    for i, kind in enumerate(kinds):
        if kind == "le":
            T[i, s] = 1.0
            basis[i] = s
            s += 1
        elif kind == "ge":
            T[i, s] = -1.0
            s += 1
            T[i, a] = 1.0
            basis[i] = a
            art_cols.append(a)
            a += 1
        else:
            T[i, a] = 1.0
            basis[i] = a
            art_cols.append(a)
            a += 1

    # Phase one: maximize -(sum of artificials).
    if art_cols:
        for col in art_cols:
            T[-1, col] = -1.0
        for i in range(m):
            if basis[i] in art_cols:
                T[-1] += T[i]
        status = _run_simplex(T, basis, total)
        # The corner cell carries -z; an infeasible system leaves the
        # artificial sum positive, i.e. a positive corner cell.
        if status != "optimal" or T[-1, -1] > 1e-8:
            return LpResult("infeasible", None, None)
        # Drive leftover artificials out of the basis; a row with no
        # eligible pivot is redundant and can safely keep its zero-valued
        # artificial (its coefficients on real columns are all ~0).
        for i in range(m):
            if basis[i] in art_cols:
                for j in range(n + n_slack):
                    if abs(T[i, j]) > _PIVOT_TOL:
                        _pivot(T, basis, i, j)
                        break

    # Phase two: restore the real objective expressed in the current basis.
    T[-1, :] = 0.0
    T[-1, :n] = lp.objective
    for i in range(m):
        coef = T[-1, basis[i]]
        if coef != 0.0:
            T[-1] -= coef * T[i]
    for col in art_cols:
        T[-1, col] = -np.inf  # never re-enter

    if want_optimum:
        status = _run_simplex(T, basis, n + n_slack)
        if status == "unbounded":
            return LpResult("unbounded", None, None)

    y = np.zeros(total)
    for i in range(m):
        y[basis[i]] = T[i, -1]
    x = y[:n] + lo
    value = float(lp.objective @ x)
    return LpResult("optimal" if want_optimum else "feasible", value, x)


def maximize(lp: LinearProgram) -> LpResult:
    """Solve the LP to optimality; infeasible/unbounded are return states."""
    return _solve(lp, want_optimum=True)


def feasible(
    constraints,
    bounds,
) -> LpResult:
    """Phase-one feasibility check; returns a witness vertex when consistent."""
    constraints = tuple(constraints)
    bounds = tuple(bounds)
    n = len(bounds)
    lp = LinearProgram(np.zeros(n), constraints, bounds)
    return _solve(lp, want_optimum=False)
