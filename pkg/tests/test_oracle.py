import numpy as np
import pytest

from auditgames import (
    AgentType,
    InstanceSpec,
    TableScore,
    TopKRule,
    UniformKPolicy,
    UniformPolicy,
    classify_report,
    epsilon_dsic_topk,
    epsilon_exact_threshold,
    oracle_dsic_epsilon,
    oracle_epsilon,
    oracle_expected_gain,
    perturbation_optimality_check,
    skewed_policy,
)
from auditgames.audit import SURE_TRUTH
from auditgames.typespace import enumerate_types
from helpers import and_instance, binary_space, binary_types, random_binary_threshold, random_binary_topk


def test_expected_gain_examples():
    inst = and_instance()
    t = AgentType((1,), (0,))
    assert oracle_expected_gain(inst, UniformPolicy(), t, (1,)) == pytest.approx(0.125, abs=1e-12)
    assert oracle_expected_gain(inst, UniformPolicy(), t, (0,)) == 0.0
    assert oracle_expected_gain(and_instance(c=10), UniformPolicy(), t, (1,)) < 0


def test_expected_gain_unsupported_true_type():
    masses = {AgentType((0,), (0,)): 0.5, AgentType((1,), (1,)): 0.5}
    inst = and_instance(masses=masses)
    with pytest.raises(ValueError):
        oracle_expected_gain(inst, UniformPolicy(), AgentType((1,), (0,)), (1,))


def test_oracle_epsilon_examples():
    e = oracle_epsilon(and_instance(), UniformPolicy())
    assert e.epsilon == pytest.approx(0.125, abs=1e-12)
    t, z, _ = e.argmax
    assert t == AgentType((1,), (0,)) and z == (1.0,)
    assert oracle_epsilon(and_instance(B=2), UniformPolicy()).epsilon == 0.0


def test_oracle_cap():
    with pytest.raises(ValueError):
        oracle_epsilon(and_instance(n=4), UniformPolicy(), cap=10)


def test_oracle_matches_closed_form_random():
    rng = np.random.default_rng(100)
    for _ in range(25):
        inst = random_binary_threshold(rng)
        exact = epsilon_exact_threshold(inst).epsilon
        assert oracle_epsilon(inst, UniformPolicy()).epsilon == pytest.approx(exact, abs=1e-9)


def test_sure_truth_self_report_gain_is_zero():
    rng = np.random.default_rng(101)
    for _ in range(15):
        inst = random_binary_threshold(rng)
        for t in enumerate_types(inst.space, inst.prior):
            if classify_report(inst, t) == SURE_TRUTH:
                assert oracle_expected_gain(inst, UniformPolicy(), t, t.z) == 0.0


def test_dsic_examples():
    space = binary_space()
    types = binary_types(space)
    inst = and_instance(n=3, allocation=TopKRule(2))
    d = oracle_dsic_epsilon(inst, UniformKPolicy())
    assert d.epsilon == pytest.approx(0.5, abs=1e-12)
    assert d.epsilon == pytest.approx(epsilon_dsic_topk(inst).epsilon, abs=1e-12)
    assert oracle_dsic_epsilon(and_instance(n=3, B=2, allocation=TopKRule(2)), UniformKPolicy()).epsilon == 0.0
    flat = InstanceSpec(space, inst.prior, TableScore({a: float(a.x[0]) for a in types}), TopKRule(2), 3, 1, 0)
    assert oracle_dsic_epsilon(flat, UniformKPolicy()).epsilon == 0.0


def test_dsic_dominates_bnic():
    rng = np.random.default_rng(102)
    for _ in range(15):
        inst = random_binary_topk(rng)
        assert (oracle_dsic_epsilon(inst, UniformKPolicy()).epsilon
                >= oracle_epsilon(inst, UniformKPolicy()).epsilon - 1e-12)
        th = random_binary_threshold(rng, max_n=3)
        assert oracle_dsic_epsilon(th, UniformPolicy()).epsilon >= oracle_epsilon(th, UniformPolicy()).epsilon - 1e-12


def test_topk_oracle_needs_uniform_k():
    with pytest.raises(ValueError):
        oracle_epsilon(and_instance(n=3, allocation=TopKRule(2)), UniformPolicy())


def test_perturbation_examples():
    inst = and_instance(n=3)
    res = perturbation_optimality_check(inst, UniformPolicy(), 500, seed=3)
    assert res["passed"] and res["best_found_epsilon"] == res["baseline_epsilon"]
    skew = perturbation_optimality_check(inst, skewed_policy(inst), 500, seed=3)
    assert not skew["passed"] and skew["best_found_epsilon"] < skew["baseline_epsilon"]
    with pytest.raises(ValueError):
        perturbation_optimality_check(inst, UniformPolicy(), 0)
    with pytest.raises(ValueError):
        perturbation_optimality_check(inst, UniformPolicy(), 10, magnitude=0.0)


def _gap_instance(beta, c, tie_rule):
    space = binary_space()
    masses = {a: beta if a.x[0] and a.z[0] else (1 - beta) / 3 for a in binary_types(space)}
    return and_instance(n=3, B=1, c=c, masses=masses, allocation=TopKRule(2, tie_rule))


@pytest.mark.parametrize("beta", [0.05, 0.1, 0.3])
@pytest.mark.parametrize("c", [0.0, 0.5])
def test_gap_tightness_by_tie_rule(beta, c):
    claimed = (1 - beta**2) * (1 - (1 + c) / 2)
    eps = {rule: oracle_epsilon(_gap_instance(beta, c, rule), UniformKPolicy()).epsilon
           for rule in ("worst-case", "uniform-random", "best-case")}
    # only worst-case ties reproduce the stated value; when ties can break in
    # the deviator's favour, truthful score 0 already wins enough slots that
    # lying (and facing the audit) does not pay
    assert eps["worst-case"] == pytest.approx(claimed, abs=1e-12)
    assert eps["uniform-random"] == 0.0
    assert eps["best-case"] == 0.0
