"""Brute-force ground truth for small enumerable instances.

Expectations over opponents are exact sums over every realization of the
``n - 1`` truthful opponents; audit randomness enters through the audit
probabilities directly.  Threshold instances accept any policy.  Top-k
instances are evaluated for UNIFORM-K, whose audit of the focal agent
depends only on its own top-k membership.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from auditgames.allocation import topk_membership
from auditgames.audit import SUSPICIOUS, TablePolicy, UniformKPolicy, _classifier
from auditgames.instance import InstanceSpec
from auditgames.regions import supported_types
from auditgames.typespace import AgentType, density
from auditgames.verification import EpsilonEstimate, _estimate

DEFAULT_PROFILE_CAP = 1 << 18
IMPROVEMENT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DeviationGain:
    true_type: AgentType
    report_z: tuple[float, ...]
    gain: float
    position: int = 0


def _support(instance: InstanceSpec):
    if not instance.prior.is_enumerable:
        raise ValueError("the oracle needs an enumerable type space")
    return supported_types(instance.prior)


def _opponents(instance: InstanceSpec, cap: int):
    support = _support(instance)
    m = instance.n - 1
    if len(support) ** m > cap:
        raise ValueError(f"{len(support)}^{m} opponent realizations exceed the cap {cap}")
    for combo in itertools.product(support, repeat=m):
        yield tuple(a for a, _ in combo), math.prod(p for _, p in combo)


def _reports_for(instance: InstanceSpec, t: AgentType):
    return [t.with_z(z) for z in instance.space.z_lattice()]


# -- threshold model -----------------------------------------------------------


class ThresholdModel:
    """All single-deviation terms of a threshold instance, indexed so that a
    policy is a ``(profiles, n)`` matrix of audit probabilities."""

    def __init__(self, instance: InstanceSpec, positions, cap: int = DEFAULT_PROFILE_CAP):
        if not instance.is_threshold:
            raise ValueError("ThresholdModel needs a threshold instance")
        self.instance = instance
        self.positions = list(positions)
        opps = list(_opponents(instance, cap))
        self.profiles: list[tuple[AgentType, ...]] = []
        index: dict[tuple, int] = {}
        rows, cols, weights, starts = [], [], [], []
        self.deviations: list[tuple[AgentType, AgentType, int]] = []
        pass_r, pass_t = [], []
        for t, _ in _support(instance):
            for r in _reports_for(instance, t):
                if r == t:
                    continue
                for i in self.positions:
                    starts.append(len(rows))
                    self.deviations.append((t, r, i))
                    pass_r.append(float(instance.passes(r)))
                    pass_t.append(float(instance.passes(t)))
                    for opp, w in opps:
                        prof = opp[:i] + (r,) + opp[i:]
                        j = index.get(prof)
                        if j is None:
                            j = index[prof] = len(self.profiles)
                            self.profiles.append(prof)
                            if len(self.profiles) > cap:
                                raise ValueError("report profiles exceed the cap")
                        rows.append(j)
                        cols.append(i)
                        weights.append(w)
        self.index = index
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.weights = np.asarray(weights)
        self.starts = np.asarray(starts, dtype=np.int64)
        self.pass_r = np.asarray(pass_r)
        self.pass_t = np.asarray(pass_t)

    def policy_matrix(self, policy) -> np.ndarray:
        inst = self.instance
        return np.array([policy(inst, list(p)) for p in self.profiles], dtype=float).reshape(len(self.profiles), inst.n)

    def gains(self, phi: np.ndarray) -> np.ndarray:
        if not len(self.deviations):
            return np.zeros(0)
        c = self.instance.c
        p = phi[self.rows, self.cols]
        pr = np.repeat(self.pass_r, np.diff(np.append(self.starts, len(self.rows))))
        terms = self.weights * ((1.0 - p) * pr - p * c)
        return np.add.reduceat(terms, self.starts) - self.pass_t

    def epsilon(self, phi: np.ndarray) -> tuple[float, int | None]:
        g = self.gains(phi)
        if not len(g):
            return 0.0, None
        k = int(np.argmax(g))
        return (float(g[k]), k) if g[k] > 0 else (0.0, None)


def _positions(instance: InstanceSpec, policy):
    return [0] if getattr(policy, "symmetric", False) else range(instance.n)


# -- top-k (UNIFORM-K) ---------------------------------------------------------


def _membership(instance: InstanceSpec, v: float, opp_scores) -> float:
    greater = sum(s > v for s in opp_scores)
    equal = sum(s == v for s in opp_scores)
    return topk_membership(greater, equal, instance.allocation.k, instance.allocation.tie_rule)


def _topk_utility(instance: InstanceSpec, t: AgentType, r: AgentType, opp_scores) -> float:
    f = instance.score
    if r != t and density(instance.prior, r) <= 0:
        return -instance.c
    member = _membership(instance, f(r), opp_scores)
    if r == t:
        return member
    share = min(1.0, instance.B / instance.allocation.k)
    return member * (1.0 - (1.0 + instance.c) * share)


def _require_uniform_k(policy):
    if not isinstance(policy, UniformKPolicy):
        raise ValueError("the top-k oracle evaluates the UNIFORM-K policy only")


def _topk_gain(instance, t, r, opps) -> float:
    f = instance.score
    terms = []
    for opp, w in opps:
        scores = [f(a) for a in opp]
        terms.append(w * (_topk_utility(instance, t, r, scores) - _topk_utility(instance, t, t, scores)))
    return math.fsum(terms)


# -- public operations -----------------------------------------------------------


def oracle_expected_gain(instance: InstanceSpec, policy, true_type: AgentType, report_z,
                         position: int = 0, cap: int = DEFAULT_PROFILE_CAP) -> float:
    """Exact ``E[u(report)] - E[u(truth)]`` against truthful opponents."""
    r = true_type.with_z(report_z)
    if density(instance.prior, true_type) <= 0:
        raise ValueError(f"{true_type} is not a supported type")
    if r == true_type:
        return 0.0
    opps = list(_opponents(instance, cap))
    if instance.is_topk:
        _require_uniform_k(policy)
        return _topk_gain(instance, true_type, r, opps)
    c = instance.c
    pass_r, pass_t = float(instance.passes(r)), float(instance.passes(true_type))
    terms = []
    for opp, w in opps:
        phi = policy(instance, list(opp[:position] + (r,) + opp[position:]))[position]
        terms.append(w * ((1.0 - phi) * pass_r - phi * c))
    return math.fsum(terms) - pass_t


def oracle_epsilon(instance: InstanceSpec, policy, cap: int = DEFAULT_PROFILE_CAP) -> EpsilonEstimate:
    """Largest single-deviation gain over supported true types, every
    self-report and (for asymmetric policies) every position."""
    if instance.is_topk:
        _require_uniform_k(policy)
        opps = list(_opponents(instance, cap))
        best = (0.0, None)
        for t, _ in _support(instance):
            for r in _reports_for(instance, t):
                if r == t:
                    continue
                g = _topk_gain(instance, t, r, opps)
                if g > best[0]:
                    best = (g, (t, r.z))
        return _estimate(best[0], "oracle", argmax=best[1])
    model = ThresholdModel(instance, _positions(instance, policy), cap)
    value, k = model.epsilon(model.policy_matrix(policy))
    argmax = None
    if k is not None:
        t, r, i = model.deviations[k]
        argmax = (t, r.z, i)
    return _estimate(value, "oracle", argmax=argmax)


def oracle_dsic_epsilon(instance: InstanceSpec, policy, cap: int = DEFAULT_PROFILE_CAP) -> EpsilonEstimate:
    """Largest deviation gain against any profile of (honest) opponent reports."""
    support = [a for a, _ in _support(instance)]
    m = instance.n - 1
    if len(support) ** m > cap:
        raise ValueError("opponent profiles exceed the cap")
    profiles = list(itertools.product(support, repeat=m))
    best = (0.0, None)
    f = instance.score
    if instance.is_topk:
        _require_uniform_k(policy)
    for t in support:
        for r in _reports_for(instance, t):
            if r == t:
                continue
            for opp in profiles:
                if instance.is_topk:
                    scores = [f(a) for a in opp]
                    g = _topk_utility(instance, t, r, scores) - _topk_utility(instance, t, t, scores)
                    cand = [(g, 0)]
                else:
                    cand = []
                    for i in _positions(instance, policy):
                        phi = policy(instance, list(opp[:i] + (r,) + opp[i:]))[i]
                        u = (1.0 - phi) * instance.passes(r) - phi * instance.c
                        cand.append((u - instance.passes(t), i))
                for g, i in cand:
                    if g > best[0]:
                        best = (g, (t, r.z, opp, i))
    return _estimate(best[0], "oracle", argmax=best[1])


def skewed_policy(instance: InstanceSpec, cap: int = DEFAULT_PROFILE_CAP) -> TablePolicy:
    """Table policy spending the budget greedily on suspicious reports in
    index order (sure-lies are still audited with probability 1)."""
    model = ThresholdModel(instance, range(instance.n), cap)
    classify = _classifier(instance)
    table = {}
    for prof in model.profiles:
        left, phi = instance.B, []
        for a in prof:
            tag = classify(a)
            if density(instance.prior, a) <= 0:
                phi.append(1.0)
            elif tag == SUSPICIOUS:
                take = min(1.0, left)
                phi.append(take)
                left -= take
            else:
                phi.append(0.0)
        table[prof] = phi
    return TablePolicy(table)


def perturbation_optimality_check(instance: InstanceSpec, policy, trials: int, magnitude: float = 0.5,
                                  seed: int = 0, cap: int = DEFAULT_PROFILE_CAP) -> dict:
    """Search random budget-preserving shifts of audit mass between
    suspicious reports for a policy with smaller ε.

    Each trial picks a donor and a recipient position and a fraction
    ``U(0, magnitude)`` of the donor's probability, and applies the shift to
    every profile where both positions hold suspicious reports (or to a
    random half of them).  Passes iff no trial beats the baseline by more
    than ``1e-9``.
    """
    if int(trials) != trials or trials < 1:
        raise ValueError("trials must be a positive integer")
    if not 0.0 < magnitude <= 1.0:
        raise ValueError("magnitude must lie in (0, 1]")
    if not instance.is_threshold:
        raise ValueError("the perturbation check is defined for threshold instances")
    if instance.n < 2:
        raise ValueError("perturbations need at least two agents")
    model = ThresholdModel(instance, range(instance.n), cap)
    base_phi = model.policy_matrix(policy)
    baseline, _ = model.epsilon(base_phi)
    classify = _classifier(instance)
    sus = np.array([[classify(a) == SUSPICIOUS for a in p] for p in model.profiles], dtype=bool)
    rng = np.random.default_rng(seed)
    best = baseline
    for _ in range(int(trials)):
        donor, recipient = rng.choice(instance.n, size=2, replace=False)
        eligible = np.flatnonzero(sus[:, donor] & sus[:, recipient])
        if rng.random() < 0.5 and len(eligible) > 1:
            eligible = eligible[rng.random(len(eligible)) < 0.5]
        if not len(eligible):
            continue
        frac = rng.uniform(0.0, magnitude)
        phi = base_phi.copy()
        shift = frac * phi[eligible, donor]
        phi[eligible, donor] -= shift
        phi[eligible, recipient] = np.minimum(1.0, phi[eligible, recipient] + shift)
        eps, _ = model.epsilon(phi)
        best = min(best, eps)
    return {
        "passed": bool(best >= baseline - IMPROVEMENT_TOLERANCE),
        "baseline_epsilon": baseline,
        "best_found_epsilon": best,
        "trials": int(trials),
        "seed": seed,
    }


__all__ = [
    "DeviationGain", "ThresholdModel", "oracle_expected_gain", "oracle_epsilon", "oracle_dsic_epsilon",
    "skewed_policy", "perturbation_optimality_check", "EpsilonEstimate",
]
