import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairshare.fixtures import load_fixture
from fairshare.model import (
    InfeasibleAllocationError,
    ProblemInstance,
    ToleranceConfig,
    bottleneck_set,
    resource_usage,
    usages,
    utility,
    validate_instance,
)
from fairshare.oracle import random_instance
from fairshare.reductions import add_dummy_resources


def test_validate_symmetric_instance_ok():
    inst = ProblemInstance(entitlements=[0.5, 0.5], requirements=[[0.5], [0.5]])
    assert validate_instance(inst) == []


def test_validate_rejects_bad_entitlement_sum():
    inst = ProblemInstance(entitlements=[0.6, 0.6], requirements=[[0.5], [0.5]])
    violations = validate_instance(inst)
    assert len(violations) == 1
    assert violations[0].field == "entitlements"
    assert violations[0].residual == pytest.approx(0.2)
    assert "1.2" in violations[0].message


def test_validate_three_user_contention_instance():
    assert validate_instance(load_fixture("greedy3")) == []


def test_validate_flags_negative_and_oversized_requests():
    inst = ProblemInstance(entitlements=[1.0], requirements=[[-0.1, 1.5]])
    violations = validate_instance(inst)
    assert len(violations) == 2
    assert all(v.field == "requirements" for v in violations)
    assert "resource 2" in violations[1].message


def test_validate_is_pure_and_idempotent():
    inst = load_fixture("circle4")
    before_e = inst.entitlements.copy()
    first = validate_instance(inst)
    second = validate_instance(inst)
    assert first == second == []
    np.testing.assert_array_equal(inst.entitlements, before_e)


def test_instance_arrays_are_read_only():
    inst = load_fixture("slope2")
    with pytest.raises(ValueError):
        inst.requirements[0, 0] = 0.9


def test_resource_usage_greedy3_partial_allocation():
    lifted = add_dummy_resources(load_fixture("greedy3"))
    # resource 2 under (3/4, 1, 0): 3/8 + 5/8 = 1
    assert resource_usage(lifted, [0.75, 1.0, 0.0], 1) == pytest.approx(1.0)


def test_resource_usage_zero_allocation_everywhere():
    lifted = add_dummy_resources(load_fixture("circle4"))
    u = usages(lifted, np.zeros(4))
    np.testing.assert_allclose(u, 0.0)


def test_resource_usage_shared_single_resource():
    lifted = add_dummy_resources(load_fixture("slope2"))
    assert resource_usage(lifted, [0.6, 0.9], 0) == pytest.approx(1.0)


def test_resource_usage_index_out_of_range():
    lifted = add_dummy_resources(load_fixture("slope2"))
    with pytest.raises(IndexError):
        resource_usage(lifted, [0.1, 0.1], 99)


def test_bottleneck_set_single_saturated_resource():
    lifted = add_dummy_resources(load_fixture("drf_compare"))
    bn = bottleneck_set(lifted, [1 / 3, 1 / 3, 5 / 6])
    assert bn == {0}


def test_bottleneck_set_interior_point_is_empty():
    lifted = add_dummy_resources(load_fixture("greedy3"))
    assert bottleneck_set(lifted, [0.1, 0.1, 0.1]) == frozenset()


def test_bottleneck_set_two_saturated_resources():
    lifted = add_dummy_resources(load_fixture("nonunique_n3"))
    assert bottleneck_set(lifted, [0.5, 0.5, 0.5]) == {0, 1}


def test_bottleneck_set_rejects_infeasible_allocation():
    lifted = add_dummy_resources(load_fixture("circle4"))
    with pytest.raises(InfeasibleAllocationError):
        bottleneck_set(lifted, [0.5, 0.5, 0.5, 0.5])


def test_utility_of_peer_bundle():
    inst = load_fixture("drf_compare")
    # user 3 evaluating the bundle (1/3, 2/30): min((1/3)/0.4, (1/15)/0.8) = 1/12
    assert utility(inst, 2, np.array([1 / 3, 2 / 30])) == pytest.approx(1 / 12)


def test_utility_all_zero_profile_is_fully_served():
    inst = ProblemInstance(entitlements=[0.5, 0.5], requirements=[[0.0, 0.0], [1.0, 1.0]])
    assert utility(inst, 0, np.zeros(2)) == 1.0


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.integers(1, 5),
    m=st.integers(1, 5),
    scale=st.floats(0.01, 1.0),
)
def test_utility_own_bundle_identity(seed, n, m, scale):
    inst = random_instance(seed, n, m)
    for i in range(n):
        if inst.requirements[i].max() > 0.0:
            bundle = scale * inst.requirements[i]
            assert utility(inst, i, bundle) == pytest.approx(min(1.0, scale), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 5), m=st.integers(1, 5))
def test_feasible_scaled_usages_and_bottlenecks_in_range(seed, n, m):
    inst = random_instance(seed, n, m)
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, n)
    x_feas = x * min(1.0, 1.0 / max(float(usages(inst, x).max()), 1e-12))
    u = usages(inst, x_feas)
    assert np.all(u <= 1.0 + 1e-9)
    assert bottleneck_set(inst, x_feas) <= set(range(m))


def test_tolerance_config_rejects_nonpositive_values():
    with pytest.raises(ValueError):
        ToleranceConfig(eps_njc=0.0)
    with pytest.raises(ValueError):
        ToleranceConfig(t_max=-1.0)


def test_tolerance_config_orders_feasible_below_bottleneck():
    with pytest.raises(ValueError):
        ToleranceConfig(eps_feasible=1e-3, eps_bottleneck=1e-6)
