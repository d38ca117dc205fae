"""Independent ground-truth generators used to validate the trajectory solver.

``enumerate_solutions`` discharges the existential in the fairness condition
by brute force: for every candidate saturated subset and every way of
assigning each user a justifying resource, it asks a small LP whether a
consistent allocation exists. ``grid_search_n2`` walks the feasible
boundary curve for two users. Both are deliberately independent of the
trajectory construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from . import lp
from .model import (
    DEFAULT_TOLERANCES,
    ProblemInstance,
    ToleranceConfig,
    usages,
)

__all__ = [
    "FeasibilityQuery",
    "GridSearchResult",
    "OracleWitness",
    "SizeGuardError",
    "SolutionFamily",
    "enumerate_solutions",
    "grid_search_n2",
    "random_instance",
]

_MAX_ENUM_USERS = 6
_MAX_ENUM_RESOURCES = 6


class SizeGuardError(ValueError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class FeasibilityQuery:
    """One (saturated subset, justification assignment) candidate.

    ``assignment[i]`` is the real resource meant to justify user i, or None
    when the user is to receive everything (x_i = 1). The derived LP fixes
    usage = 1 on the subset, caps the rest, and demands each user's share on
    their assigned resource reach their entitlement.
    """

    bottleneck_subset: tuple[int, ...]
    assignment: tuple[int | None, ...]

    def constraints(self, inst: ProblemInstance) -> tuple[list, list]:
        r = inst.requirements
        e = inst.entitlements
        n = inst.n_users
        subset = set(self.bottleneck_subset)
        rows: list = []
        for j in range(inst.n_real_resources):
            rows.append((r[:, j], 1.0, "==" if j in subset else "<="))
        for i, j in enumerate(self.assignment):
            if j is None:
                unit = np.zeros(n)
                unit[i] = 1.0
                rows.append((unit, 1.0, "=="))
            elif e[i] > 0.0:
                row = np.zeros(n)
                row[i] = -r[i, j]
                rows.append((row, -float(e[i]), "<="))
        bounds = [(0.0, 1.0)] * n
        return rows, bounds

    def satisfied_by(
        self, inst: ProblemInstance, x: np.ndarray, tol: float = 1e-5
    ) -> bool:
        """Whether ``x`` lies on this query's feasible face within ``tol``."""
        x = np.asarray(x, dtype=float)
        if np.min(x) < -tol or np.max(x) > 1.0 + tol:
            return False
        u = usages(inst, x)
        for j in range(inst.n_real_resources):
            if j in self.bottleneck_subset:
                if abs(u[j] - 1.0) > tol:
                    return False
            elif u[j] > 1.0 + tol:
                return False
        for i, j in enumerate(self.assignment):
            if j is None:
                if x[i] < 1.0 - tol:
                    return False
            elif inst.entitlements[i] > 0.0:
                if x[i] * inst.requirements[i, j] < inst.entitlements[i] - tol:
                    return False
        return True


@dataclass(frozen=True, eq=False)
class OracleWitness:
    x: np.ndarray
    bottlenecks: tuple[int, ...]
    query: FeasibilityQuery
    positive_dimension: bool


@dataclass(frozen=True, eq=False)
class SolutionFamily:
    """All witnesses found by enumeration, with non-uniqueness flags."""

    instance: ProblemInstance
    witnesses: tuple[OracleWitness, ...]

    @property
    def has_positive_dimension_face(self) -> bool:
        return any(w.positive_dimension for w in self.witnesses)

    @property
    def shares_bottleneck_sets(self) -> bool:
        """True when distinct witness points sit on identical bottleneck sets."""
        seen: dict[tuple[int, ...], np.ndarray] = {}
        for w in self.witnesses:
            prev = seen.get(w.bottlenecks)
            if prev is not None and float(np.max(np.abs(prev - w.x))) > 1e-7:
                return True
            seen.setdefault(w.bottlenecks, w.x)
        return self.has_positive_dimension_face

    def flagged_queries(self) -> tuple[FeasibilityQuery, ...]:
        return tuple(w.query for w in self.witnesses if w.positive_dimension)

    def contains(self, x: np.ndarray, tol: float = 1e-5) -> bool:
        """Whether ``x`` matches a witness or lies on a flagged family face."""
        x = np.asarray(x, dtype=float)
        for w in self.witnesses:
            if float(np.max(np.abs(w.x - x))) <= tol:
                return True
        return any(q.satisfied_by(self.instance, x, tol) for q in self.flagged_queries())


def _assignment_options(
    inst: ProblemInstance, subset: tuple[int, ...]
) -> list[list[int | None]]:
    options: list[list[int | None]] = []
    for i in range(inst.n_users):
        opts: list[int | None] = [
            j for j in subset if inst.requirements[i, j] > 0.0 or inst.entitlements[i] <= 0.0
        ]
        opts.append(None)  # take everything instead (x_i = 1)
        options.append(opts)
    return options


def enumerate_solutions(
    inst: ProblemInstance, tol: ToleranceConfig | None = None
) -> SolutionFamily:
    """Exhaustively enumerate fair allocations of a desk-size instance.

    Iterates candidate subsets by (size, lexicographic order) and
    justification assignments lexicographically, so output order is stable.
    Every feasible query's face is probed by maximizing +/- sum(x) and
    +/- each coordinate; differing optimizers flag a positive-dimensional
    solution family, all extreme vertices become witnesses, and for flagged
    faces the mean of the distinct vertices is added as a balanced
    representative (faces are convex, so it is itself fair). Witnesses are
    deduplicated at 1e-7.
    """
    tol = tol or DEFAULT_TOLERANCES
    n, m = inst.n_users, inst.n_real_resources
    if n > _MAX_ENUM_USERS or m > _MAX_ENUM_RESOURCES:
        raise SizeGuardError(
            f"enumeration is limited to {_MAX_ENUM_USERS} users and "
            f"{_MAX_ENUM_RESOURCES} resources; instance has {n} and {m}"
        )

    witnesses: list[OracleWitness] = []
    seen: set[tuple] = set()

    def consider(x: np.ndarray, query: FeasibilityQuery, positive: bool) -> None:
        key = tuple(np.round(x, 7))
        if key in seen:
            return
        seen.add(key)
        u = usages(inst, x)
        bn = tuple(
            int(j) for j in np.flatnonzero(u >= 1.0 - tol.eps_bottleneck)
        )
        x_ro = np.array(x)
        x_ro.setflags(write=False)
        witnesses.append(OracleWitness(x_ro, bn, query, positive))

    subsets = [
        tuple(c)
        for size in range(1, m + 1)
        for c in combinations(range(m), size)
    ]
    ones = np.ones(n)
    probes = [ones, -ones]
    for i in range(n):
        unit = np.zeros(n)
        unit[i] = 1.0
        probes.append(unit)
        probes.append(-unit)
    for subset in subsets:
        options = _assignment_options(inst, subset)
        for assignment in product(*options):
            query = FeasibilityQuery(subset, tuple(assignment))
            rows, bounds = query.constraints(inst)
            first = lp.maximize(lp.LinearProgram(probes[0], tuple(rows), tuple(bounds)))
            if first.status != "optimal":
                continue
            vertices = [first.x]
            for objective in probes[1:]:
                res = lp.maximize(lp.LinearProgram(objective, tuple(rows), tuple(bounds)))
                if res.status == "optimal" and all(
                    float(np.max(np.abs(res.x - v))) > 1e-7 for v in vertices
                ):
                    vertices.append(res.x)
            positive = len(vertices) > 1
            for vertex in vertices:
                consider(vertex, query, positive)
            if positive:
                # Balanced representatives: mean of the vertices sharing a
                # total-allocation level (sub-face midpoints), plus the mean
                # of everything found on the face.
                groups: dict[float, list[np.ndarray]] = {}
                for vertex in vertices:
                    groups.setdefault(round(float(vertex.sum()), 6), []).append(vertex)
                for group in groups.values():
                    if len(group) > 1:
                        consider(np.mean(group, axis=0), query, positive)
                consider(np.mean(vertices, axis=0), query, positive)
    return SolutionFamily(instance=inst, witnesses=tuple(witnesses))


@dataclass(frozen=True, eq=False)
class GridSearchResult:
    points: np.ndarray  # passing (x1, x2) pairs, ascending in x1
    interval: tuple[float, float] | None  # x1 range of passing points

    def nearest_distance(self, x: np.ndarray) -> float:
        if self.points.shape[0] == 0:
            return float("inf")
        return float(np.min(np.max(np.abs(self.points - np.asarray(x)), axis=1)))


def grid_search_n2(
    inst: ProblemInstance,
    resolution: float | None = None,
    tol: ToleranceConfig | None = None,
) -> GridSearchResult:
    """Walk the two-user boundary curve and keep the fair points.

    For each grid value of x_1, x_2 is pushed to the boundary:
    min(1, min over requested j of (1 - x_1 r_1j) / r_2j). Verification runs
    with tolerances relaxed by one grid cell (the saturation tolerance also
    absorbs the curve's local slope, so a vertex between two capacity lines
    is still recognized from the neighboring grid point).
    """
    tol = tol or DEFAULT_TOLERANCES
    resolution = tol.grid_resolution if resolution is None else float(resolution)
    if inst.n_users != 2:
        raise ValueError("grid search supports exactly two users")
    r = inst.requirements
    e = inst.entitlements
    x1 = np.arange(0.0, 1.0 + resolution / 2.0, resolution)
    mask2 = r[1] > 0.0
    if mask2.any():
        caps = (1.0 - np.outer(x1, r[0][mask2])) / r[1][mask2]
        x2 = np.minimum(1.0, caps.min(axis=1))
        x2 = np.clip(x2, 0.0, 1.0)
    else:
        x2 = np.ones_like(x1)

    slope = 0.0
    if mask2.any():
        slope = float(np.max(r[0][mask2] / r[1][mask2]))
    eps_njc = max(tol.eps_njc, resolution)
    eps_bn = max(tol.eps_bottleneck, resolution * (1.0 + slope))

    pts = np.column_stack([x1, x2])
    u = pts @ r  # usages, shape (grid, m')
    feasible = np.all(u <= 1.0 + tol.eps_feasible, axis=1)
    bn = u >= 1.0 - eps_bn
    ok = feasible.copy()
    for i in range(2):
        shares = pts[:, i][:, None] * r[i][None, :]
        justified = np.any(bn & (shares >= e[i] - eps_njc), axis=1)
        ok &= justified | (pts[:, i] >= 1.0 - eps_njc)
    passing = pts[ok]
    interval = None
    if passing.shape[0]:
        interval = (float(passing[0, 0]), float(passing[-1, 0]))
    passing.setflags(write=False)
    return GridSearchResult(points=passing, interval=interval)


def random_instance(
    seed: int,
    n_users: int,
    n_resources: int,
    min_column_sum: float | None = 1.0,
) -> ProblemInstance:
    """Deterministic pseudo-random instance for property suites.

    Entitlements are a normalized positive draw; requests are uniform on
    [0, 1]. When ``min_column_sum`` is set, under-demanded columns are scaled
    up to that total (entries stay within [0, 1] because no entry exceeds
    its column sum). Identical seeds give identical instances.
    """
    if n_users < 1 or n_resources < 1:
        raise ValueError("need at least one user and one resource")
    rng = np.random.default_rng(seed)
    e = rng.uniform(0.1, 1.0, n_users)
    e = e / e.sum()
    r = rng.uniform(0.0, 1.0, (n_users, n_resources))
    if min_column_sum is not None:
        sums = r.sum(axis=0)
        for j in range(n_resources):
            if sums[j] <= 0.0:
                r[:, j] = min_column_sum / n_users
            elif sums[j] < min_column_sum:
                r[:, j] *= min_column_sum / sums[j]
    return ProblemInstance(entitlements=e, requirements=r)
