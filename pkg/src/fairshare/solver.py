"""Barrier-trajectory solver for entitlement-proportional fair allocation.

The feasible region D = {x >= 0 : sum_i x_i r_ij <= 1 for all j} carries the
barrier value f(x) = -sum_j log(1 - sum_i x_i r_ij), which is 0 at the origin
and diverges on the boundary. Raising the level t sweeps a family of smooth
shells f(x) = t that fill D from inside. On each shell there is a point whose
outward normal nu satisfies x_i * nu_i proportional to e_i; stitching those
points together over t defines a curve x(t) from the origin toward the
boundary. Its limit saturates at least one resource and gives every user at
least their entitlement on some saturated resource, i.e. a fair allocation.

Differentiating the two defining relations in t yields a linear system for
dx/dt (see ``trajectory_derivative``), which an embedded RK4(5) pair
integrates adaptively. After every accepted step a Newton projection pulls
the iterate back onto the exact defining system, so level and
normal-alignment residuals stay at round-off instead of accumulating.
A final polish snaps the numeric endpoint to an exact vertex or face of the
active constraints via the assignment LP, accepted only if it verifies at a
tight tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from . import lp
from .model import (
    DEFAULT_TOLERANCES,
    LiftedInstance,
    ProblemInstance,
    Solution,
    ToleranceConfig,
    Violation,
    build_solution,
    validate_instance,
)
from .reductions import ReductionTrace, lift_solution, preprocess
from .verifier import VerificationReport, verify

__all__ = [
    "DomainBoundaryError",
    "InvalidInstanceError",
    "NumericalDegeneracyError",
    "SolveResult",
    "TrajectoryDirectionError",
    "TrajectoryPoint",
    "gradient",
    "integrate_trajectory",
    "level_value",
    "solve",
    "trajectory_derivative",
]


class DomainBoundaryError(ValueError):
    """Evaluation at a point on or outside the feasible region's boundary."""


class NumericalDegeneracyError(RuntimeError):
    """The trajectory linear system is singular or too ill-conditioned."""


class TrajectoryDirectionError(RuntimeError):
    """The level derivative came out non-positive; never silently flipped."""


class InvalidInstanceError(ValueError):
    """Raised by solve() when the instance fails validation."""

    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


@dataclass(frozen=True, eq=False)
class TrajectoryPoint:
    """One accepted sample of the trajectory, strictly inside the region.

    ``normal`` is the unit outward normal of the level shell at ``x`` and
    ``normalization`` the common ratio kappa with x_i * normal_i = kappa * e_i.
    """

    t: float
    x: np.ndarray
    f_value: float
    normal: np.ndarray
    normalization: float
    slacks: np.ndarray


@dataclass(frozen=True, eq=False)
class SolveResult:
    solution: Solution
    report: VerificationReport
    termination: str  # "converged" | "t_max_reached" | "step_underflow"
    polish_applied: bool
    reductions: ReductionTrace
    trajectory: tuple[TrajectoryPoint, ...] | None

    @property
    def ok(self) -> bool:
        return self.report.passed


def _slacks_or_raise(inst: LiftedInstance, x: np.ndarray) -> np.ndarray:
    s = 1.0 - x @ inst.requirements
    if np.min(s) <= 0.0:
        j = int(np.argmin(s))
        raise DomainBoundaryError(
            f"allocation is not strictly interior: column {inst.column_label(j)} "
            f"has slack {s[j]:.3g}"
        )
    return s


def level_value(inst: LiftedInstance, x: np.ndarray) -> float:
    """Barrier value -sum_j log(slack_j); zero at the origin, +inf on the boundary."""
    x = np.asarray(x, dtype=float)
    s = _slacks_or_raise(inst, x)
    return float(-np.log(s).sum())


def gradient(inst: LiftedInstance, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Raw barrier gradient (sum_j r_ij / slack_j per user) and its unit vector."""
    x = np.asarray(x, dtype=float)
    s = _slacks_or_raise(inst, x)
    g = (inst.requirements / s).sum(axis=1)
    norm = float(np.linalg.norm(g))
    if norm <= 0.0:
        raise NumericalDegeneracyError("zero barrier gradient")
    return g, g / norm


def _system_matrix(r: np.ndarray, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Matrix of the linearized defining system: diag(g) + diag(x) B B^T."""
    b = r / s
    g = b.sum(axis=1)
    return np.diag(g) + x[:, None] * (b @ b.T)


def trajectory_derivative(
    inst: LiftedInstance,
    x: np.ndarray,
    entitlements: np.ndarray | None = None,
) -> np.ndarray:
    """Direction dx/dt of the trajectory through ``x``.

    With b_ij = r_ij / slack_j, solve
        sum_k v_k (delta_ik * sum_j b_ij + x_i * sum_j b_ij b_kj) = e_i
    as a general dense system (the matrix is not manifestly symmetric), then
    rescale v by the level derivative rho = sum_j (sum_k v_k r_kj) / slack_j
    so the barrier value grows at unit rate along the returned direction.

    The point is not required to lie exactly on the trajectory, so the
    operation can probe arbitrary interior points.
    """
    x = np.asarray(x, dtype=float)
    e = inst.entitlements if entitlements is None else np.asarray(entitlements, float)
    r = inst.requirements
    s = _slacks_or_raise(inst, x)
    m = _system_matrix(r, x, s)
    try:
        v = np.linalg.solve(m, e)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(f"trajectory system is singular: {exc}") from exc
    if not np.all(np.isfinite(v)):
        raise NumericalDegeneracyError("trajectory system produced non-finite values")
    residual = float(np.linalg.norm(m @ v - e))
    if residual > 1e-6 * max(1.0, float(np.linalg.norm(e))):
        raise NumericalDegeneracyError(
            f"trajectory system residual {residual:.3g} exceeds threshold"
        )
    rho = float(((v @ r) / s).sum())
    if rho <= 0.0:
        raise TrajectoryDirectionError(
            f"level derivative {rho:.3g} is not positive at this point"
        )
    return v / rho


# Embedded Runge-Kutta-Fehlberg 4(5) pair; the 5th-order solution is
# propagated and the 4th-order one supplies the error estimate.
_RK_A = (
    np.array([]),
    np.array([1 / 4]),
    np.array([3 / 32, 9 / 32]),
    np.array([1932 / 2197, -7200 / 2197, 7296 / 2197]),
    np.array([439 / 216, -8.0, 3680 / 513, -845 / 4104]),
    np.array([-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40]),
)
_RK_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_RK_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])


class _ProjectionError(RuntimeError):
    pass


def _project(
    inst: LiftedInstance,
    e: np.ndarray,
    x0: np.ndarray,
    t: float,
    tol: ToleranceConfig,
) -> tuple[np.ndarray, float]:
    """Newton-correct x onto the defining system {x_i g_i = c e_i, f(x) = t}.

    Returns the corrected point and the raw normalization scalar c. The
    Jacobian block for the alignment equations is the same matrix used for
    the trajectory derivative; one extra row/column handles the level
    constraint and the unknown c.
    """
    n = x0.shape[0]
    r = inst.requirements
    x = x0.copy()
    s = _slacks_or_raise(inst, x)
    b = r / s
    g = b.sum(axis=1)
    c = float(x @ g)
    best = None
    prev_err = np.inf
    for _ in range(10):
        f_res = x * g - c * e
        level_res = float(-np.log(s).sum() - t)
        scale = max(1.0, abs(c))
        # The level residual is held near-absolutely (<= 2e-7 at acceptance):
        # the barrier value itself is only computable to ~eps/min_slack.
        err = max(float(np.max(np.abs(f_res))) / scale, abs(level_res) / 4.0)
        if best is None or err < best[0]:
            best = (err, x.copy(), c)
        if err <= 1e-13 or err > 0.5 * prev_err:
            break  # converged, or conditioning stops further progress
        prev_err = err
        jac = np.zeros((n + 1, n + 1))
        jac[:n, :n] = np.diag(g) + x[:, None] * (b @ b.T)
        jac[:n, n] = -e
        jac[n, :n] = g
        rhs = np.empty(n + 1)
        rhs[:n] = -f_res
        rhs[n] = -level_res
        try:
            delta = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError as exc:
            raise _ProjectionError(str(exc)) from exc
        step = 1.0
        for _ in range(60):
            x_new = x + step * delta[:n]
            s_new = 1.0 - x_new @ r
            if np.min(s_new) > 0.0 and np.min(x_new) > -1e-15:
                break
            step *= 0.5
        else:
            raise _ProjectionError("projection step cannot stay interior")
        x = np.clip(x_new, 0.0, None)
        c += step * delta[n]
        s = 1.0 - x @ r
        b = r / s
        g = b.sum(axis=1)
    err, x, c = best
    # Deep in the boundary layer the Newton system's conditioning caps the
    # attainable residual; 5e-8 still leaves a wide margin under the 1e-6
    # on-trajectory guarantees.
    if err > 5e-8:
        raise _ProjectionError(f"projection stalled at residual {err:.3g}")
    return x, c


def _make_point(
    inst: LiftedInstance, t: float, x: np.ndarray, c: float
) -> TrajectoryPoint:
    s = 1.0 - x @ inst.requirements
    g = (inst.requirements / s).sum(axis=1)
    norm = float(np.linalg.norm(g))
    x_ro = x.copy()
    x_ro.setflags(write=False)
    s_ro = s.copy()
    s_ro.setflags(write=False)
    nu = g / norm
    nu.setflags(write=False)
    return TrajectoryPoint(
        t=t,
        x=x_ro,
        f_value=float(-np.log(s).sum()),
        normal=nu,
        normalization=c / norm,
        slacks=s_ro,
    )


def integrate_trajectory(
    inst: LiftedInstance,
    entitlements: np.ndarray | None = None,
    tol: ToleranceConfig | None = None,
) -> tuple[list[TrajectoryPoint], str]:
    """Integrate the trajectory from the origin toward ``tol.t_max``.

    Expects a preprocessed instance (every retained real column can
    saturate, every user can reach their entitlement on some real column).

    Returns the accepted samples and a termination flag: "converged" when
    the iterate stops moving between level doublings (checked at t = 1, 2,
    4, ...) or when it contacts the boundary, "t_max_reached" when the level
    budget runs out, or "step_underflow" when no acceptable step exists
    above the minimum size (the partial trajectory is still returned).

    ``tol.t_max`` budgets the decay of the saturating slacks; the effective
    budget adds headroom that grows with the column count (each column
    contributes a constant barrier offset -log(final slack)) and with the
    smallest positive entitlement (a saturating column's slack behaves like
    exp(-t/|J|) / e_i, so users entitled to very little approach their limit
    very slowly). Termination almost always comes from the convergence tests
    well before the budget runs out.
    """
    tol = tol or DEFAULT_TOLERANCES
    e = inst.entitlements if entitlements is None else np.asarray(entitlements, float)
    n = inst.n_users
    if n == 0:
        return [], "converged"
    min_e = float(np.min(e[e > 0.0])) if np.any(e > 0.0) else 1.0
    t_budget = tol.t_max + inst.m * (3.0 + max(0.0, np.log(1.0 / max(min_e, 1e-12))))

    def deriv(x: np.ndarray) -> np.ndarray:
        return trajectory_derivative(inst, x, e)

    t = 0.0
    x = np.zeros(n)
    c = 0.0
    h = tol.step_initial
    points = [_make_point(inst, t, x, c)]
    next_checkpoint = 1.0
    checkpoint_x: np.ndarray | None = None
    termination = "t_max_reached"

    while t < t_budget - 1e-12:
        h = min(h, t_budget - t)
        if next_checkpoint > t:
            h = min(h, next_checkpoint - t)
        try:
            k = np.empty((6, n))
            k[0] = deriv(x)
            # The speed along the trajectory only decays as the boundary
            # nears, so once even moving at the current speed for the whole
            # remaining budget could not shift x measurably, the iterate has
            # converged for all practical purposes.
            if t > 0.0 and float(np.max(np.abs(k[0]))) * (t_budget - t) < tol.convergence_tol:
                termination = "converged"
                break
            for stage in range(1, 6):
                xs = x + h * (_RK_A[stage] @ k[:stage])
                k[stage] = deriv(xs)
            x5 = x + h * (_RK_B5 @ k)
            err_vec = h * ((_RK_B5 - _RK_B4) @ k)
            scale = tol.rk_atol + tol.rk_rtol * np.maximum(np.abs(x), np.abs(x5))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if err <= 1.0:
                t_new = t + h
                x_new, c_new = _project(inst, e, x5, t_new, tol)
                cond = float(np.linalg.cond(_system_matrix(
                    inst.requirements, x_new, 1.0 - x_new @ inst.requirements)))
                if not np.isfinite(cond) or cond > tol.max_condition:
                    raise NumericalDegeneracyError(
                        f"condition estimate {cond:.3g} above threshold"
                    )
                t, x, c = t_new, x_new, c_new
                points.append(_make_point(inst, t, x, c))
                # Below the slack floor the barrier value is no longer
                # accurately computable and the iterate can move at most by
                # about the floor itself; treat boundary contact as settled.
                if float(np.min(points[-1].slacks)) < tol.slack_floor:
                    termination = "converged"
                    break
                if err > 0.0:
                    h = min(tol.step_max, h * min(5.0, max(0.2, 0.9 * err ** -0.2)))
                else:
                    h = min(tol.step_max, h * 5.0)
                if abs(t - next_checkpoint) <= 1e-9:
                    if checkpoint_x is not None and (
                        float(np.max(np.abs(x - checkpoint_x))) < tol.convergence_tol
                    ):
                        termination = "converged"
                        break
                    checkpoint_x = x.copy()
                    next_checkpoint *= 2.0
                continue
            h *= max(0.2, 0.9 * err ** -0.2)
        except (
            DomainBoundaryError,
            NumericalDegeneracyError,
            TrajectoryDirectionError,
            _ProjectionError,
        ):
            h *= 0.5
        if h < tol.step_min:
            termination = "step_underflow"
            break
    return points, termination


def _reduced_view(inst: LiftedInstance) -> ProblemInstance:
    """Treat every retained column (including artificial ones) as a resource."""
    return ProblemInstance(
        entitlements=inst.entitlements, requirements=inst.requirements
    )


def _polish(
    inst: LiftedInstance, x: np.ndarray, tol: ToleranceConfig
) -> tuple[np.ndarray, bool]:
    """Snap the numeric endpoint onto the exact active-constraint face.

    Detects near-saturated columns, fixes the justification each user relies
    on, and solves the resulting assignment LP. A zero-dimensional face gives
    an exact vertex; on a positive-dimensional face the endpoint is instead
    projected minimally onto the active equalities so the answer stays next
    to the numeric trajectory, with the LP vertex as fallback. Whatever
    candidate emerges is accepted only if it verifies at ``tol.polish_eps``.

    With k simultaneously saturating columns each slack decays only like
    exp(-t/k), so at the default level budget the endpoint may still sit
    ~1e-4 from the boundary; detection therefore climbs a threshold ladder,
    which is safe because every candidate must pass the tight verification.

    When entitlements span many orders of magnitude the slacks of the
    limit's active columns do too, and no single threshold separates them
    from inactive ones before float precision runs out; as a last resort a
    bounded search over subsets of near-active columns runs, still gated by
    the same verification. If no candidate clears the exact gate, the whole
    search repeats gated at the ordinary verification tolerance, with
    justification constraints waived for users entitled to less than it
    (they pass vacuously anyway).
    """
    for gate in (tol.polish_eps, tol.eps_njc):
        candidate = _polish_pass(inst, x, tol, gate)
        if candidate is not None:
            return candidate, True
    return x, False


def _polish_pass(
    inst: LiftedInstance, x: np.ndarray, tol: ToleranceConfig, gate: float
) -> np.ndarray | None:
    thresholds = [tol.polish_slack_tol, 1e-3, 1e-2]
    seen: set[tuple[int, ...]] = set()
    for threshold in thresholds:
        active = np.flatnonzero(1.0 - x @ inst.requirements <= threshold)
        key = tuple(int(j) for j in active)
        if active.size == 0 or key in seen:
            continue
        seen.add(key)
        candidate = _polish_with_active(inst, x, active, tol, gate)
        if candidate is not None:
            return candidate

    slacks = 1.0 - x @ inst.requirements
    near = [int(j) for j in np.argsort(slacks) if slacks[j] <= 5e-2][:10]
    for size in range(len(near), 0, -1):
        for subset in combinations(sorted(near), size):
            if subset in seen:
                continue
            seen.add(subset)
            candidate = _polish_with_active(inst, x, np.array(subset), tol, gate)
            if candidate is not None:
                return candidate
    return None


def _polish_with_active(
    inst: LiftedInstance,
    x: np.ndarray,
    active: np.ndarray,
    tol: ToleranceConfig,
    gate: float,
) -> np.ndarray | None:
    r = inst.requirements
    e = inst.entitlements
    n = inst.n_users

    constraints: list = []
    active_set = set(int(j) for j in active)
    for j in range(inst.m):
        constraints.append((r[:, j], 1.0, "==" if j in active_set else "<="))
    for i in range(n):
        if e[i] <= gate:
            continue  # justified vacuously at this gate
        shares = x[i] * r[i, active]
        j_star = int(active[int(np.argmax(shares))])
        row = np.zeros(n)
        row[i] = -r[i, j_star]
        constraints.append((row, -float(e[i]), "<="))
    bounds = tuple((0.0, 1.0) for _ in range(n))

    hi = lp.maximize(lp.LinearProgram(np.ones(n), tuple(constraints), bounds))
    if hi.status != "optimal":
        return None
    lo = lp.maximize(lp.LinearProgram(-np.ones(n), tuple(constraints), bounds))
    candidates: list[np.ndarray] = []
    if lo.status == "optimal" and float(np.max(np.abs(hi.x - lo.x))) <= 1e-9:
        candidates.append(hi.x)
    else:
        a = r[:, active].T
        delta = np.linalg.lstsq(a, 1.0 - a @ x, rcond=None)[0]
        candidates.append(np.clip(x + delta, 0.0, 1.0))
        candidates.append(hi.x)

    view = _reduced_view(inst)
    gated = replace(tol, eps_njc=gate)
    for cand in candidates:
        if verify(view, cand, gated).passed:
            return cand
    return None


def solve(
    inst: ProblemInstance,
    tol: ToleranceConfig | None = None,
    *,
    remove_dominated: bool = True,
    record_trajectory: bool = True,
) -> SolveResult:
    """Compute a verified fair allocation for ``inst``.

    Pipeline: validate, reduce, integrate the barrier trajectory until the
    iterate settles between level doublings or the level budget runs out,
    polish the endpoint onto the exact active face, lift back to the
    original instance, and verify. A verification failure is reported in the
    result (with full residuals), never masked as success.
    """
    tol = tol or DEFAULT_TOLERANCES
    violations = validate_instance(inst, tol)
    if violations:
        raise InvalidInstanceError(violations)

    reduced, trace = preprocess(inst, tol, remove_dominated=remove_dominated)
    polish_applied = False
    if reduced.n_users == 0:
        points: list[TrajectoryPoint] = []
        flag = "converged"
        x_reduced = np.zeros(0)
    else:
        points, flag = integrate_trajectory(reduced, tol=tol)
        x_reduced = np.array(points[-1].x)
        x_reduced, polish_applied = _polish(reduced, x_reduced, tol)

    reduced_solution = build_solution(_reduced_view(reduced), x_reduced, tol)
    solution = lift_solution(trace, reduced_solution, tol, require_verified=False)

    zero_rows = ~inst.requirements.any(axis=1)
    if zero_rows.any():
        # Users who request nothing are fully satisfied by definition.
        x_full = np.array(solution.allocation)
        x_full[zero_rows] = 1.0
        solution = build_solution(inst, x_full, tol)

    report = verify(inst, solution.allocation, tol)
    if report.passed:
        termination = "converged"
    else:
        termination = "step_underflow" if flag == "step_underflow" else "t_max_reached"
    return SolveResult(
        solution=solution,
        report=report,
        termination=termination,
        polish_applied=polish_applied,
        reductions=trace,
        trajectory=tuple(points) if record_trajectory else None,
    )
