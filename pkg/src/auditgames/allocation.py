"""Threshold and top-k allocation rules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import binom

TIE_RULES = ("worst-case", "uniform-random", "best-case")


@dataclass(frozen=True)
class ThresholdRule:
    """Allocate iff ``f(a) >= theta`` (``<=`` when ``direction == "<="``).

    ``theta = -inf`` with direction ``>=`` allocates to everyone.
    """

    theta: float
    direction: str = ">="

    kind = "threshold"

    def __post_init__(self):
        if self.direction not in (">=", "<="):
            raise ValueError(f"unknown threshold direction {self.direction!r}")
        object.__setattr__(self, "theta", float(self.theta))

    def passes(self, value: float) -> bool:
        return value >= self.theta if self.direction == ">=" else value <= self.theta


@dataclass(frozen=True)
class TopKRule:
    k: int
    tie_rule: str = "worst-case"

    kind = "top-k"

    def __post_init__(self):
        if self.tie_rule not in TIE_RULES:
            raise ValueError(f"unknown tie rule {self.tie_rule!r}; expected one of {TIE_RULES}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        object.__setattr__(self, "k", int(self.k))


AllocationRule = ThresholdRule | TopKRule


def allocate_threshold(scores: Sequence[float], theta: float, direction: str = ">=") -> list[bool]:
    rule = ThresholdRule(theta, direction)
    return [rule.passes(s) for s in scores]


def rank_order(scores: Sequence[float], tie_rule: str = "worst-case", seed=None) -> list[int]:
    """Indices from best to worst score with ties realized per ``tie_rule``.

    Worst-case realizes ties against lower indices (a tied agent with a lower
    index ranks below its tied peers); best-case does the opposite.
    """
    n = len(scores)
    if tie_rule == "worst-case":
        return sorted(range(n), key=lambda i: (-scores[i], -i))
    if tie_rule == "best-case":
        return sorted(range(n), key=lambda i: (-scores[i], i))
    if tie_rule == "uniform-random":
        perm = np.random.default_rng(seed).permutation(n)
        return sorted(range(n), key=lambda i: (-scores[i], int(perm[i])))
    raise ValueError(f"unknown tie rule {tie_rule!r}")


def allocate_topk(scores: Sequence[float], k: int, tie_rule: str = "worst-case", seed=None) -> list[bool]:
    if not 1 <= k <= len(scores):
        raise ValueError(f"k={k} out of range for {len(scores)} scores")
    chosen = set(rank_order(scores, tie_rule, seed)[:k])
    return [i in chosen for i in range(len(scores))]


def topk_membership(greater: int, equal: int, k: int, tie_rule: str) -> float:
    """P(focal agent is in the top k) given the number of others scoring
    strictly above it and exactly equal to it."""
    if tie_rule == "worst-case":
        return 1.0 if greater + equal < k else 0.0
    if tie_rule == "best-case":
        return 1.0 if greater < k else 0.0
    if greater >= k:
        return 0.0
    return min(1.0, (k - greater) / (equal + 1))


def prob_in_top_k(instance, score_value: float) -> float:
    """P(a truthful-opponent field leaves ``score_value`` inside the top k).

    The other ``n - 1`` agents are i.i.d. from the prior.  Worst-case ties
    give ``BinomCDF(k - 1; n - 1, P(f >= v))``; best-case uses ``P(f > v)``;
    uniform-random ties sum over the strictly-greater and equal counts.
    """
    from auditgames.regions import score_tail

    rule = instance.allocation
    if rule.kind != "top-k":
        raise ValueError("prob_in_top_k needs a top-k instance")
    n, k = instance.n, rule.k
    if k >= n:
        return 1.0
    m = n - 1
    if rule.tie_rule == "worst-case":
        q = score_tail(instance.prior, instance.score, score_value, strict=False)
        return float(binom.cdf(k - 1, m, q))
    q_gt = score_tail(instance.prior, instance.score, score_value, strict=True)
    if rule.tie_rule == "best-case":
        return float(binom.cdf(k - 1, m, q_gt))
    q_ge = score_tail(instance.prior, instance.score, score_value, strict=False)
    q_eq = max(0.0, q_ge - q_gt)
    q_lt = max(0.0, 1.0 - q_ge)
    terms = []
    for g in range(min(k, m + 1)):
        for e in range(m - g + 1):
            lo = m - g - e
            coef = math.comb(m, g) * math.comb(m - g, e)
            terms.append(coef * q_gt ** g * q_eq ** e * q_lt ** lo * topk_membership(g, e, k, "uniform-random"))
    return min(1.0, math.fsum(terms))
