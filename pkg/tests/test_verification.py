import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from auditgames import (
    AgentType,
    Box,
    EpsilonEstimate,
    FeatureDomain,
    InstanceSpec,
    LinearScore,
    LogisticScore,
    PiecewiseLinearScore,
    Prior,
    ScipyMarginal,
    TableScore,
    ThresholdRule,
    TopKRule,
    TypeSpace,
    UniformMarginal,
    classify_report,
    epsilon_dsic_topk,
    epsilon_error_bound,
    epsilon_exact_threshold,
    epsilon_mc_threshold,
    epsilon_uniform_k,
    halfspace_box_probability,
    needs_audit,
    suspicious_probability,
)
from auditgames.audit import SUSPICIOUS
from auditgames.typespace import sample_array
from auditgames.verification import hoeffding_bound, threshold_gain, _vector_classifier
from helpers import UNIT, and_instance, binary_space, binary_types, unit_square, x_plus_z, x_plus_z_topk


def test_estimate_invariant():
    with pytest.raises(ValueError):
        EpsilonEstimate(0.5, 0.2, "oracle")
    e = EpsilonEstimate(0.0, -0.3, "oracle")
    assert e.to_dict()["raw_max_gain"] == -0.3 and "samples" not in e.to_dict()


def test_halfspace_examples():
    prior = Prior.uniform_box(unit_square())
    assert halfspace_box_probability(prior, (1, 1), 1.0) == 0.5
    assert halfspace_box_probability(prior, (1, 1), -10) == 1.0
    assert halfspace_box_probability(prior, (1, 1), 10) == 0.0
    assert halfspace_box_probability(prior, (1, 1), 1.5) == 0.125
    assert halfspace_box_probability(prior, (1, 1), 1.5, "<=") == 0.875


def test_halfspace_rejects_table():
    with pytest.raises(ValueError):
        halfspace_box_probability(and_instance().prior, (1, 1), 0.5)


def test_halfspace_zero_box_renormalized():
    prior = Prior.uniform_box(unit_square(), [Box((0.5, 0.5), (1, 1))])
    # remaining mass 3/4; the halfspace x + z >= 1 keeps 1/2 - 1/4 of it
    assert halfspace_box_probability(prior, (1, 1), 1.0) == pytest.approx(1 / 3, abs=1e-12)


def test_suspicious_probability_examples():
    assert suspicious_probability(x_plus_z(1.0)) == pytest.approx(0.5, abs=1e-12)
    assert suspicious_probability(x_plus_z(1.5)) == pytest.approx(0.125, abs=1e-12)
    assert suspicious_probability(x_plus_z(0.0)) == 0.0
    assert suspicious_probability(and_instance()) == 0.25


def test_epsilon_exact_examples():
    inst = x_plus_z(1.0, n=2, B=1, c=0)
    e = epsilon_exact_threshold(inst)
    assert e.epsilon == pytest.approx(0.25, abs=1e-12) and e.p_U == pytest.approx(0.5, abs=1e-12)
    e0 = epsilon_exact_threshold(x_plus_z(n=2, B=1, c=0.2), p_U=0.0)
    assert e0.raw_max_gain == pytest.approx(-0.2) and e0.epsilon == 0.0
    for p in (0.0, 0.3, 1.0):
        assert epsilon_exact_threshold(x_plus_z(n=3, B=3, c=0.0), p_U=p).epsilon == 0.0
    with pytest.raises(ValueError):
        epsilon_exact_threshold(inst, p_U=1.5)


def test_epsilon_exact_z_independent():
    space = unit_square()
    inst = InstanceSpec(space, Prior.uniform_box(space), LinearScore((1,), (0,)), ThresholdRule(0.5), 4, 1, 0)
    assert epsilon_exact_threshold(inst).epsilon == 0.0


def test_exact_gain_large_n_is_finite():
    g = threshold_gain(10_000, 10, 0.0, 0.5)
    assert 0.99 < g < 1.0


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_monotonicity_grid(n):
    ps = np.linspace(0, 1, 11)
    for c in (0.0, 0.5, 2.0):
        for B in range(n + 1):
            vals = [max(0.0, threshold_gain(n, B, c, p)) for p in ps]
            assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    for p in ps:
        for c in (0.0, 0.5, 2.0):
            byB = [max(0.0, threshold_gain(n, B, c, p)) for B in range(n + 1)]
            assert all(b <= a + 1e-12 for a, b in zip(byB, byB[1:]))
        for B in range(n + 1):
            byc = [max(0.0, threshold_gain(n, B, c, p)) for c in (0.0, 0.5, 1.0, 2.0, 5.0)]
            assert all(b <= a + 1e-12 for a, b in zip(byc, byc[1:]))


def test_error_bound_examples():
    assert epsilon_error_bound(2, 1, 0.5, 0.1) == pytest.approx(0.045, abs=1e-12)
    assert epsilon_error_bound(10, 3, 0.2, 0.0) == 0.0
    for bad in ((10, 0, 0.2, 0.1), (10, 10, 0.2, 0.1), (10, 3, 0.95, 0.1), (10, 3, 0.2, -0.1)):
        with pytest.raises(ValueError):
            epsilon_error_bound(*bad)


@pytest.mark.parametrize("n,B,p,gamma", [(1000, 250, 0.6, 4.44e-4), (1000, 250, 0.5, 4.44e-4),
                                         (50, 7, 0.01, 0.2), (300, 299, 0.4, 0.05)])
def test_error_bound_against_mpmath(n, B, p, gamma):
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 60
    kernel = lambda x: x ** (B - 1) * (1 - x) ** (n - B)  # noqa: E731
    ref = (n - B) * mpmath.binomial(n - 1, B - 1) * mpmath.quad(kernel, [p, p + gamma])
    assert epsilon_error_bound(n, B, p, gamma) == pytest.approx(float(ref), rel=1e-9)


def test_error_bound_far_tail_at_half():
    # the far-tail value the closed form gives at p_U = 0.5 (see the acceptance suite)
    v = epsilon_error_bound(1000, 250, 0.5, 4.44e-4)
    assert 6e-61 <= v <= 6e-59


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 400), data=st.data())
def test_error_bound_additivity(n, data):
    B = data.draw(st.integers(1, n - 1))
    p = data.draw(st.floats(0, 0.8))
    g1 = data.draw(st.floats(0, 0.1))
    g2 = data.draw(st.floats(0, 0.1))
    lhs = epsilon_error_bound(n, B, p, g1) + epsilon_error_bound(n, B, p + g1, g2)
    assert lhs == pytest.approx(epsilon_error_bound(n, B, p, g1 + g2), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 60), data=st.data())
def test_exact_error_bound_covers_gamma(n, data):
    # a caller-supplied uncertainty gamma on p_U widens the estimate by the gain's swing
    B = data.draw(st.integers(1, n - 1))
    p = data.draw(st.floats(0.05, 0.9))
    g = data.draw(st.floats(0, 0.05))
    c = data.draw(st.sampled_from([0.0, 0.5, 2.0]))
    e = epsilon_exact_threshold(x_plus_z(n=n, B=B, c=c), p_U=p, gamma=g)
    for q in (max(0.0, p - g), min(1.0, p + g)):
        assert abs(threshold_gain(n, B, c, q) - e.raw_max_gain) <= e.error_bound + 1e-15


def test_mc_examples():
    e = epsilon_mc_threshold(x_plus_z(1.0, n=2, B=1, c=0), 10**6, 42)
    assert abs(e.epsilon - 0.25) <= 0.005
    assert e.error_bound == pytest.approx(hoeffding_bound(0.0, 10**6, 0.01)) and e.confidence == 0.99
    assert e.samples == 10**6 and e.seed == 42 and e.method == "monte-carlo"
    zero = epsilon_mc_threshold(x_plus_z(0.0, n=3, B=1, c=0.5), 1000, 1)
    assert zero.epsilon == 0.0 and zero.raw_max_gain == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        epsilon_mc_threshold(x_plus_z(), 0, 1)


def test_mc_deterministic_per_seed(monkeypatch):
    inst = x_plus_z(1.2, n=4, B=1, c=0.3)
    a = epsilon_mc_threshold(inst, 20_000, 5)
    monkeypatch.setenv("AUDITGAMES_THREADS", "1")
    b = epsilon_mc_threshold(inst, 20_000, 5)
    assert a == b
    assert epsilon_mc_threshold(inst, 20_000, 6).raw_max_gain != a.raw_max_gain


def test_hoeffding_coverage_small():
    inst = x_plus_z(1.0, n=2, B=1, c=0)
    hits = sum(abs(epsilon_mc_threshold(inst, 2000, s, delta=0.05).raw_max_gain - 0.25)
               <= hoeffding_bound(0.0, 2000, 0.05) for s in range(60))
    assert hits >= 55


def _agree(inst, m, seed=0):
    p = suspicious_probability(inst)
    pts = sample_array(inst.prior, m, seed)
    vec = _vector_classifier(inst)
    if vec is not None:
        emp = float(np.mean(vec(pts)))
    else:
        d = inst.space.d
        emp = float(np.mean([classify_report(inst, AgentType.from_vector(r, d)) == SUSPICIOUS for r in pts]))
    assert abs(emp - p) <= 3 * math.sqrt(max(p * (1 - p), 1e-12) / m) + 1e-9, (emp, p)
    return p


def test_vector_classifier_matches_pointwise():
    rng = np.random.default_rng(0)
    for inst in (x_plus_z(1.3), x_plus_z(0.7, n=3)):
        pts = rng.random((2000, 2))
        vec = _vector_classifier(inst)(pts)
        ref = [classify_report(inst, AgentType((u,), (v,))) == SUSPICIOUS for u, v in pts]
        assert list(map(bool, vec)) == ref


@pytest.mark.parametrize("theta", [0.4, 1.0, 1.5, 1.9])
def test_geometric_vs_sampling_linear(theta):
    _agree(x_plus_z(theta), 10**6)


def test_geometric_vs_sampling_weighted_3d():
    space = TypeSpace((UNIT, FeatureDomain(-1, 2)), (FeatureDomain(0, 3),))
    f = LinearScore((0.7, -0.4), (0.5,), 0.1)
    inst = InstanceSpec(space, Prior.uniform_box(space), f, ThresholdRule(0.6), 3, 1, 0)
    _agree(inst, 10**6)


def test_geometric_vs_sampling_zero_boxes():
    prior = Prior.uniform_box(unit_square(), [Box((0, 0), (0.5, 0.3)), Box((0.6, 0.7), (1, 1))])
    inst = InstanceSpec(unit_square(), prior, LinearScore((1,), (1,)), ThresholdRule(1.0), 2, 1, 0)
    # classified point by point, hence the smaller sample
    _agree(inst, 10**5)


def test_geometric_vs_sampling_piecewise():
    f = PiecewiseLinearScore((
        (Box((0, 0), (0.5, 1)), LinearScore((1,), (2,))),
        (Box((0.5, 0), (1, 1)), LinearScore((0,), (1,), 0.4)),
    ))
    inst = InstanceSpec(unit_square(), Prior.uniform_box(unit_square()), f, ThresholdRule(0.9), 2, 1, 0)
    _agree(inst, 10**5)


def test_geometric_vs_sampling_truncnorm():
    space = unit_square()
    m = ScipyMarginal("truncnorm", (("mu", 0.4), ("sigma", 0.3)), 0.0, 1.0)
    prior = Prior.product(space, [UniformMarginal(0, 1), m])
    inst = InstanceSpec(space, prior, LinearScore((1,), (1,)), ThresholdRule(1.1), 2, 1, 0)
    _agree(inst, 10**6)


def test_geometric_vs_sampling_mixed_lattice():
    # continuous x1, binary x2, z1, z2: the shape of the running example
    bit = FeatureDomain(0, 1, "integer")
    space = TypeSpace((UNIT, bit), (bit, bit))
    prior = Prior.uniform_box(space)
    f = LinearScore((-0.5, 1.0), (-1.0, -1.0))
    inst = InstanceSpec(space, prior, f, ThresholdRule(-0.8), 3, 1, 0)
    p = _agree(inst, 10**6)
    assert 0 < p < 1


def test_logistic_threshold_matches_linear():
    space = unit_square()
    prior = Prior.uniform_box(space)
    lin = InstanceSpec(space, prior, LinearScore((-1,), (-1,)), ThresholdRule(-1.0), 2, 1, 0)
    lg = InstanceSpec(space, prior, LogisticScore((1,), (1,)), ThresholdRule(1 / (1 + math.e)), 2, 1, 0)
    assert suspicious_probability(lg) == pytest.approx(suspicious_probability(lin), abs=1e-12)
    assert epsilon_exact_threshold(lg).epsilon == pytest.approx(epsilon_exact_threshold(lin).epsilon, abs=1e-12)


def test_uniform_k_example():
    e = epsilon_uniform_k(x_plus_z_topk(n=3, k=2, B=1, c=0))
    assert e.epsilon == pytest.approx(0.375, abs=1e-9) and e.method == "topk-closed-form"
    assert epsilon_uniform_k(x_plus_z_topk(n=3, k=2, B=2, c=0)).epsilon == 0.0
    assert epsilon_uniform_k(x_plus_z_topk(n=3, k=2, B=1, c=1.0)).epsilon == 0.0


def test_uniform_k_rejects_non_uniform():
    with pytest.raises(ValueError):
        epsilon_uniform_k(and_instance(n=3, allocation=TopKRule(2)))


def test_uniform_k_bound_dominance_random():
    rng = np.random.default_rng(21)
    for _ in range(100):
        d, s = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        space = TypeSpace((UNIT,) * d, (UNIT,) * s)
        f = LinearScore(tuple(rng.normal(size=d)), tuple(rng.normal(size=s)), float(rng.normal()))
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n + 1))
        B, c = float(rng.uniform(0, k)), float(rng.uniform(0, 2))
        inst = InstanceSpec(space, Prior.uniform_box(space), f, TopKRule(k), n, B, c)
        assert epsilon_uniform_k(inst).epsilon <= max(0.0, 1 - (1 + c) * B / k) + 1e-12


def test_dsic_topk_examples():
    assert epsilon_dsic_topk(x_plus_z_topk(n=3, k=2, B=1, c=0)).epsilon == 0.5
    assert epsilon_dsic_topk(x_plus_z_topk(n=3, k=2, B=2, c=0)).epsilon == 0.0
    space = unit_square()
    flat = InstanceSpec(space, Prior.uniform_box(space), LinearScore((1,), (0,)), TopKRule(2), 3, 1, 0)
    assert epsilon_dsic_topk(flat).epsilon == 0.0


def test_needs_audit_examples():
    space = TypeSpace((UNIT,), (UNIT, UNIT))
    prior = Prior.uniform_box(space)
    assert not needs_audit(LinearScore((1,), (0, 0)), space, prior)
    assert needs_audit(LinearScore((1,), (1,)), unit_square(), Prior.uniform_box(unit_square()))
    bs = binary_space()
    f = TableScore({a: float(a.x[0]) for a in binary_types(bs)})
    assert not needs_audit(f, bs, Prior.uniform_box(bs))
    assert needs_audit(and_instance().score, bs, and_instance().prior)


def test_needs_audit_degenerate_and_zero_box():
    space = TypeSpace((UNIT,), (FeatureDomain(0.3, 0.3),))
    assert not needs_audit(LinearScore((1,), (5,)), space, Prior.uniform_box(space))
    # with z < 0.5 removed for every x the score still varies in z above 0.5
    prior = Prior.uniform_box(unit_square(), [Box((0, 0), (1, 0.5))])
    assert needs_audit(LinearScore((1,), (1,)), unit_square(), prior)
