"""Checks that an allocation is fair: capacity, entitlement-on-a-bottleneck
(the no-justified-complaints condition), Pareto pinning, envy, and the
sharing-incentive baseline.

Only capacity and the complaint check gate overall pass/fail; the remaining
attributes are reported for inspection. The verifier works directly on
original (unlifted) instances: a fully allocated user (x_i = 1) is accepted
without needing an artificial resource to saturate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    DEFAULT_TOLERANCES,
    ProblemInstance,
    ToleranceConfig,
    usages,
    utility,
)

__all__ = [
    "CapacityResult",
    "EnvyResult",
    "SharingResult",
    "UserStatus",
    "VerificationReport",
    "check_capacity",
    "check_envy_free",
    "check_njc",
    "check_pareto",
    "check_sharing_incentive",
    "verify",
]

JUSTIFIED = "justified"
FULLY_ALLOCATED = "fully-allocated"
COMPLAINT = "complaint"


@dataclass(frozen=True, eq=False)
class CapacityResult:
    ok: bool
    usages: np.ndarray
    worst_resource: int | None  # 0-based, set when violated
    worst_excess: float


@dataclass(frozen=True)
class UserStatus:
    """Outcome of the complaint check for one user.

    ``margin`` is x_i * r_ij - e_i on the justifying resource (or x_i - 1 for
    a fully allocated user); for complaints it is the best achievable margin
    over the saturated resources. ``non_bottleneck_supports`` lists resources
    where the user does receive their entitlement but which are not
    saturated, i.e. the grounds on which the complaint is justified.
    """

    user: int
    status: str
    resource: int | None
    margin: float
    best_bottleneck: int | None
    non_bottleneck_supports: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return self.status != COMPLAINT


@dataclass(frozen=True, eq=False)
class EnvyResult:
    ok: bool
    worst_pair: tuple[int, int] | None  # (envious user, envied user)
    worst_margin: float
    margins: np.ndarray  # margins[i, j] = x_i - utility(i, bundle_j)


@dataclass(frozen=True, eq=False)
class SharingResult:
    ok: bool
    margins: np.ndarray  # x_i minus what e_i of every resource would yield


@dataclass(frozen=True, eq=False)
class VerificationReport:
    """Residual-level account of every fairness condition for one allocation."""

    passed: bool
    capacity: CapacityResult
    bottlenecks: tuple[int, ...]
    users: tuple[UserStatus, ...]
    njc_ok: bool
    pareto_ok: bool
    envy: EnvyResult
    sharing: SharingResult
    tolerances: ToleranceConfig

    def render(self, inst: ProblemInstance | None = None) -> str:
        def rlabel(j: int | None) -> str:
            if j is None:
                return "-"
            return inst.resource_label(j) if inst is not None else str(j + 1)

        def ulabel(i: int) -> str:
            return inst.user_label(i) if inst is not None else str(i + 1)

        lines = []
        if self.capacity.ok:
            lines.append("capacity: OK")
        else:
            lines.append(
                f"capacity: VIOLATED at resource {rlabel(self.capacity.worst_resource)} "
                f"(excess {self.capacity.worst_excess:.10g})"
            )
        lines.append(
            "bottlenecks: {%s}" % ", ".join(rlabel(j) for j in self.bottlenecks)
        )
        for st in self.users:
            if st.status == FULLY_ALLOCATED:
                lines.append(f"user {ulabel(st.user)}: fully allocated")
            elif st.status == JUSTIFIED:
                lines.append(
                    f"user {ulabel(st.user)}: justified via resource "
                    f"{rlabel(st.resource)} (margin {st.margin:.10g})"
                )
            else:
                msg = (
                    f"user {ulabel(st.user)}: COMPLAINT, best bottleneck share "
                    f"misses entitlement by {-st.margin:.10g}"
                )
                if st.best_bottleneck is not None:
                    msg += f" (closest on resource {rlabel(st.best_bottleneck)})"
                if st.non_bottleneck_supports:
                    msg += ", entitlement met only on non-bottleneck resource(s) " + (
                        "{%s}" % ", ".join(rlabel(j) for j in st.non_bottleneck_supports)
                    )
                lines.append(msg)
        lines.append(f"pareto: {'OK' if self.pareto_ok else 'FAIL'}")
        if self.envy.worst_pair is not None:
            i, j = self.envy.worst_pair
            lines.append(
                f"envy: {'OK' if self.envy.ok else 'FAIL'} "
                f"(worst margin {self.envy.worst_margin:.10g}, "
                f"user {ulabel(i)} vs user {ulabel(j)})"
            )
        else:
            lines.append("envy: OK (single user)")
        lines.append(
            f"sharing incentive: {'OK' if self.sharing.ok else 'FAIL'} "
            f"(min margin {float(np.min(self.sharing.margins)):.10g})"
        )
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        """JSON-ready mirror of the report; indices are 1-based."""
        return {
            "passed": self.passed,
            "capacity_ok": self.capacity.ok,
            "usages": [float(u) for u in self.capacity.usages],
            "worst_capacity": None
            if self.capacity.worst_resource is None
            else {
                "resource": self.capacity.worst_resource + 1,
                "excess": self.capacity.worst_excess,
            },
            "bottlenecks": [j + 1 for j in self.bottlenecks],
            "users": [
                {
                    "user": st.user + 1,
                    "status": st.status,
                    "resource": None if st.resource is None else st.resource + 1,
                    "margin": st.margin,
                    "non_bottleneck_supports": [
                        j + 1 for j in st.non_bottleneck_supports
                    ],
                }
                for st in self.users
            ],
            "njc_ok": self.njc_ok,
            "pareto_ok": self.pareto_ok,
            "envy_ok": self.envy.ok,
            "worst_envy": None
            if self.envy.worst_pair is None
            else {
                "user": self.envy.worst_pair[0] + 1,
                "other": self.envy.worst_pair[1] + 1,
                "margin": self.envy.worst_margin,
            },
            "sharing_ok": self.sharing.ok,
            "sharing_margins": [float(v) for v in self.sharing.margins],
        }


def _bottlenecks(u: np.ndarray, tol: ToleranceConfig) -> tuple[int, ...]:
    return tuple(int(j) for j in np.flatnonzero(u >= 1.0 - tol.eps_bottleneck))


def check_capacity(
    inst: ProblemInstance, x: np.ndarray, tol: ToleranceConfig | None = None
) -> CapacityResult:
    """Pass iff every resource's usage stays within 1 + eps_feasible."""
    tol = tol or DEFAULT_TOLERANCES
    u = usages(inst, x)
    worst = int(np.argmax(u)) if u.size else None
    excess = float(u[worst] - 1.0) if worst is not None else 0.0
    ok = bool(u.size == 0 or u[worst] <= 1.0 + tol.eps_feasible)
    return CapacityResult(
        ok=ok,
        usages=u,
        worst_resource=None if ok else worst,
        worst_excess=0.0 if ok else excess,
    )


def check_njc(
    inst: ProblemInstance, x: np.ndarray, tol: ToleranceConfig | None = None
) -> tuple[UserStatus, ...]:
    """Per-user complaint check: full allocation or entitlement on a bottleneck."""
    tol = tol or DEFAULT_TOLERANCES
    x = np.asarray(x, dtype=float)
    u = usages(inst, x)
    bn = _bottlenecks(u, tol)
    e = inst.entitlements
    r = inst.requirements
    statuses: list[UserStatus] = []
    for i in range(inst.n_users):
        if x[i] >= 1.0 - tol.eps_njc:
            statuses.append(
                UserStatus(i, FULLY_ALLOCATED, None, float(x[i] - 1.0), None, ())
            )
            continue
        best_j: int | None = None
        best_share = -np.inf
        for j in bn:
            share = x[i] * r[i, j]
            if share > best_share:
                best_j, best_share = j, float(share)
        if best_j is not None and best_share >= e[i] - tol.eps_njc:
            statuses.append(
                UserStatus(i, JUSTIFIED, best_j, float(best_share - e[i]), best_j, ())
            )
            continue
        supports = tuple(
            int(j)
            for j in range(inst.n_real_resources)
            if j not in bn and x[i] * r[i, j] >= e[i] - tol.eps_njc
        )
        margin = float(best_share - e[i]) if best_j is not None else float(-e[i])
        statuses.append(UserStatus(i, COMPLAINT, None, margin, best_j, supports))
    return tuple(statuses)


def check_pareto(
    inst: ProblemInstance, x: np.ndarray, tol: ToleranceConfig | None = None
) -> bool:
    """Every partially served user must be pinned by a saturated resource it uses."""
    tol = tol or DEFAULT_TOLERANCES
    x = np.asarray(x, dtype=float)
    u = usages(inst, x)
    slack = 1.0 - u
    r = inst.requirements
    for i in range(inst.n_users):
        if x[i] >= 1.0 - tol.eps_njc:
            continue
        pinned = bool(np.any((r[i] > 0.0) & (slack <= tol.eps_bottleneck)))
        if not pinned:
            return False
    return True


def check_envy_free(inst: ProblemInstance, x: np.ndarray) -> EnvyResult:
    """margins[i, j] = x_i - (what user i could run from user j's bundle)."""
    x = np.asarray(x, dtype=float)
    n = inst.n_users
    margins = np.zeros((n, n))
    worst: tuple[int, int] | None = None
    worst_margin = np.inf
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            bundle = x[j] * inst.requirements[j]
            m = float(x[i] - utility(inst, i, bundle))
            margins[i, j] = m
            if m < worst_margin:
                worst_margin = m
                worst = (i, j)
    ok = worst is None or worst_margin >= -DEFAULT_TOLERANCES.eps_njc
    margins.setflags(write=False)
    return EnvyResult(
        ok=bool(ok),
        worst_pair=worst,
        worst_margin=0.0 if worst is None else worst_margin,
        margins=margins,
    )


def check_sharing_incentive(inst: ProblemInstance, x: np.ndarray) -> SharingResult:
    """Each user must do at least as well as owning e_i of every resource.

    Owning the e_i slice lets user i execute min over requested resources of
    min(1, e_i / r_ij); a user requesting nothing gets baseline 1.
    """
    x = np.asarray(x, dtype=float)
    e = inst.entitlements
    r = inst.requirements
    margins = np.empty(inst.n_users)
    for i in range(inst.n_users):
        mask = r[i] > 0.0
        if mask.any():
            baseline = float(np.min(np.minimum(1.0, e[i] / r[i][mask])))
        else:
            baseline = 1.0
        margins[i] = x[i] - baseline
    ok = bool(np.all(margins >= -DEFAULT_TOLERANCES.eps_njc))
    margins.setflags(write=False)
    return SharingResult(ok=ok, margins=margins)


def verify(
    inst: ProblemInstance, x: np.ndarray, tol: ToleranceConfig | None = None
) -> VerificationReport:
    """Run every check; only capacity and the complaint check gate the verdict.

    Deterministic and side-effect free: the report is a pure function of
    (instance, allocation, tolerances).
    """
    tol = tol or DEFAULT_TOLERANCES
    x = np.asarray(x, dtype=float)
    capacity = check_capacity(inst, x, tol)
    users = check_njc(inst, x, tol)
    njc_ok = all(st.ok for st in users)
    pareto_ok = check_pareto(inst, x, tol)
    envy = check_envy_free(inst, x)
    sharing = check_sharing_incentive(inst, x)
    return VerificationReport(
        passed=bool(capacity.ok and njc_ok),
        capacity=capacity,
        bottlenecks=_bottlenecks(capacity.usages, tol),
        users=users,
        njc_ok=njc_ok,
        pareto_ok=pareto_ok,
        envy=envy,
        sharing=sharing,
        tolerances=tol,
    )
