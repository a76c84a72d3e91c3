"""Incentive-to-lie computations: exact, Monte Carlo, top-k and DSIC.

All threshold results share one structure: a lone deviator whose report is
suspicious is audited with probability ``min(1, B / (L + 1))`` where ``L``
counts the suspicious reports among ``n - 1`` truthful opponents, so its
best gain is ``1 - (1 + c) E[min(1, B / (L + 1))]``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special, stats

from auditgames.audit import SUSPICIOUS, _classifier, classify_report
from auditgames.geometry import Halfspace
from auditgames.instance import InstanceSpec
from auditgames.allocation import prob_in_top_k
from auditgames.regions import supported_types, suspicious_mass, z_dependent
from auditgames.scoring import LinearScore, score_extremes
from auditgames.typespace import AgentType, Prior, TypeSpace, sample_array

MC_CHUNK = 4096
DEFAULT_DELTA = 0.01
CANCELLATION_RATIO = 1e-6


@dataclass(frozen=True)
class EpsilonEstimate:
    epsilon: float
    raw_max_gain: float
    method: str
    error_bound: float | None = None
    confidence: float | None = None
    samples: int | None = None
    seed: int | None = None
    p_U: float | None = None
    argmax: tuple | None = None

    def __post_init__(self):
        if self.epsilon != max(0.0, self.raw_max_gain):
            raise ValueError("epsilon must equal max(0, raw_max_gain)")

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if v is not None}
        if self.argmax is not None:
            out["argmax"] = _jsonable(self.argmax)
        return out


def _jsonable(v):
    if isinstance(v, AgentType):
        return {"x": list(v.x), "z": list(v.z)}
    if isinstance(v, (tuple, list)):
        return [_jsonable(u) for u in v]
    return v


def _estimate(raw: float, method: str, **kw) -> EpsilonEstimate:
    raw = float(raw)
    return EpsilonEstimate(max(0.0, raw), raw, method, **kw)


# -- probabilities -----------------------------------------------------------


def halfspace_box_probability(prior: Prior, w: Sequence[float], t: float, direction: str = ">=") -> float:
    """``P(w . a >= t)`` (or ``<= t``) under a box-based prior."""
    if prior.is_table:
        raise ValueError("discrete-table priors use the enumeration path")
    if len(w) != prior.space.dim:
        raise ValueError("weight vector length must equal d + s")
    if direction == ">=":
        h = Halfspace(tuple(w), t)
    elif direction == "<=":
        h = Halfspace(tuple(-v for v in w), -t)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return prior.region_mass(prior.space.bounds, [h])[0]


def suspicious_probability_with_error(instance: InstanceSpec) -> tuple[float, float]:
    if not instance.is_threshold:
        raise ValueError("the suspicious set is defined for threshold instances")
    prior = instance.prior
    if prior.is_enumerable:
        classify = _classifier(instance)
        mass = math.fsum(p for a, p in supported_types(prior) if classify(a) == SUSPICIOUS)
        return min(1.0, mass), 0.0
    g, theta = instance.oriented_linear()
    return suspicious_mass(prior, g, theta)


def suspicious_probability(instance: InstanceSpec) -> float:
    """Prior mass ``p_U`` of the suspicious set."""
    return suspicious_probability_with_error(instance)[0]


def needs_audit(f, space: TypeSpace, prior: Prior) -> bool:
    """False iff the score ignores z on the support, in which case truthful
    reporting is an equilibrium without any audits."""
    if prior.space != space:
        raise ValueError("prior is defined over a different type space")
    if isinstance(f, LinearScore) and not prior.zero_boxes:
        return any(w != 0 and not dm.degenerate and (not dm.is_lattice or len(dm.lattice) > 1)
                   for w, dm in zip(f.w_z, space.self_reported))
    return z_dependent(prior, f)


# -- threshold: exact ----------------------------------------------------------


def expected_audit_share(n: int, B: float, p: float) -> float:
    """``E[min(1, B / (L + 1))]`` for ``L ~ Binomial(n - 1, p)``."""
    return 1.0 - _excess(n, B, p)


def _excess(n: int, B: float, p: float) -> float:
    # T = E[(L + 1 - B)_+ / (L + 1)] keeps the small-gain regime free of 1 - (1 - tiny)
    ell = np.arange(n)
    mask = ell + 1 > B
    if not mask.any():
        return 0.0
    ell = ell[mask]
    pmf = np.exp(stats.binom.logpmf(ell, n - 1, p))
    return math.fsum(pmf * (ell + 1 - B) / (ell + 1))


def threshold_gain(n: int, B: float, c: float, p: float) -> float:
    """Best deviation gain ``1 - (1 + c) E[min(1, B / (L + 1))]``."""
    t = _excess(n, B, p)
    return t - c * (1.0 - t)


def epsilon_exact_threshold(instance: InstanceSpec, p_U: float | None = None, gamma: float = 0.0) -> EpsilonEstimate:
    """Exact ε under UNIFORM from the binomial sum.

    ``p_U`` defaults to :func:`suspicious_probability`; ``gamma`` is an extra
    absolute uncertainty on a caller-supplied ``p_U``.  The reported
    ``error_bound`` is the swing of the (monotone) gain over
    ``[p_U - err, p_U + err]``.
    """
    if not instance.is_threshold:
        raise ValueError("epsilon_exact_threshold needs a threshold instance")
    err = gamma
    if p_U is None:
        p_U, q_err = suspicious_probability_with_error(instance)
        err += q_err
    if not 0.0 <= p_U <= 1.0:
        raise ValueError(f"p_U must lie in [0, 1], got {p_U}")
    if not needs_audit(instance.score, instance.space, instance.prior):
        return _estimate(0.0, "exact-closed-form", error_bound=0.0, p_U=p_U)
    n, B, c = instance.n, instance.B, instance.c
    raw = threshold_gain(n, B, c, p_U)
    if p_U == 0.0:
        # an empty suspicious set leaves nothing to gain by lying
        raw = min(raw, 0.0)
    bound = 0.0
    if err > 0:
        lo = threshold_gain(n, B, c, max(0.0, p_U - err))
        hi = threshold_gain(n, B, c, min(1.0, p_U + err))
        bound = max(hi - raw, raw - lo, 0.0)
    return _estimate(raw, "exact-closed-form", error_bound=bound, p_U=p_U)


def epsilon_error_bound(n: int, B: int, p_U: float, gamma: float) -> float:
    """``(n - B) C(n-1, B-1) * integral_{p_U}^{p_U + gamma} x^(B-1) (1-x)^(n-B) dx``.

    Equal to ``(n - B) / n`` times a difference of regularized incomplete
    beta functions ``I_x(B, n - B + 1)``; the difference is taken on the
    upper-tail side past the mode, and by direct quadrature of the
    rescaled kernel when the two values nearly cancel.
    """
    if int(n) != n or int(B) != B:
        raise ValueError("n and B must be integers")
    if not 1 <= B < n:
        raise ValueError("need 1 <= B < n")
    if gamma < 0 or not 0.0 <= p_U <= p_U + gamma <= 1.0:
        raise ValueError("need 0 <= p_U <= p_U + gamma <= 1")
    if gamma == 0:
        return 0.0
    a, b = float(B), float(n - B + 1)
    lo, hi = p_U, p_U + gamma
    mode = (a - 1) / (a + b - 2)
    if lo >= mode:
        big, small = special.betaincc(a, b, lo), special.betaincc(a, b, hi)
    else:
        big, small = special.betainc(a, b, hi), special.betainc(a, b, lo)
    diff = big - small
    scale = (n - B) / n
    if big > 0 and diff > CANCELLATION_RATIO * big:
        return scale * diff
    # nearly equal tails: integrate the density scaled by its value at an endpoint
    ref = max(stats.beta.logpdf(lo, a, b), stats.beta.logpdf(hi, a, b))
    if not np.isfinite(ref):
        return 0.0
    val, _ = integrate.quad(lambda x: math.exp(stats.beta.logpdf(x, a, b) - ref), lo, hi,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return scale * val * math.exp(ref)


# -- threshold: Monte Carlo ------------------------------------------------------


def worker_count() -> int:
    env = os.environ.get("AUDITGAMES_THREADS")
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def _vector_classifier(instance: InstanceSpec):
    """A function mapping an ``(m, d + s)`` array of truthful types to a
    boolean suspicious mask, or ``None`` when only per-point checks apply."""
    prior = instance.prior
    if prior.is_enumerable:
        classify = _classifier(instance)
        lookup = {a.vector: classify(a) == SUSPICIOUS for a, _ in supported_types(prior)}
        return lambda pts: np.fromiter((lookup[tuple(r)] for r in pts.tolist()), dtype=bool, count=len(pts))
    if isinstance(instance.score, LinearScore) and not prior.zero_boxes:
        g, theta = instance.oriented_linear()
        w = np.asarray(g.weights)
        d = instance.space.d
        mu = math.fsum(min(wj * dm.lo, wj * dm.hi) for wj, dm in zip(g.w_z, instance.space.self_reported)) + g.bias
        w_x = np.asarray(g.w_x)

        def mask(pts):
            allocated = pts @ w + g.bias >= theta
            sure = (pts[:, :d] @ w_x if d else np.zeros(len(pts))) + mu >= theta
            return allocated & ~sure

        return mask
    return None


def _mc_chunk(instance: InstanceSpec, classify, size: int, seed) -> float:
    n, B = instance.n, instance.B
    if n == 1:
        return size * min(1.0, B)
    pts = sample_array(instance.prior, size * (n - 1), seed)
    if classify is not None:
        flags = classify(pts)
    else:
        d = instance.space.d
        flags = np.array([classify_report(instance, AgentType.from_vector(r, d)) == SUSPICIOUS for r in pts])
    counts = flags.reshape(size, n - 1).sum(axis=1)
    return math.fsum(np.minimum(1.0, B / (counts + 1.0)))


def hoeffding_bound(c: float, samples: int, delta: float) -> float:
    return (1.0 + c) * math.sqrt(math.log(2.0 / delta) / (2.0 * samples))


def epsilon_mc_threshold(instance: InstanceSpec, samples: int, seed: int, delta: float = DEFAULT_DELTA) -> EpsilonEstimate:
    """Monte Carlo ε under UNIFORM with a Hoeffding bound at confidence ``1 - delta``.

    Samples are split into fixed-size chunks with spawned seeds, so the
    result does not depend on the worker count.
    """
    if not instance.is_threshold:
        raise ValueError("epsilon_mc_threshold needs a threshold instance")
    if int(samples) != samples or samples < 1:
        raise ValueError("samples must be a positive integer")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    samples = int(samples)
    bound = hoeffding_bound(instance.c, samples, delta)
    common = dict(error_bound=bound, confidence=1.0 - delta, samples=samples, seed=seed)
    if not needs_audit(instance.score, instance.space, instance.prior):
        return _estimate(0.0, "monte-carlo", **common)
    sizes = [MC_CHUNK] * (samples // MC_CHUNK)
    if samples % MC_CHUNK:
        sizes.append(samples % MC_CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    classify = _vector_classifier(instance)
    workers = worker_count()
    if workers == 1 or len(sizes) == 1:
        sums = [_mc_chunk(instance, classify, s, q) for s, q in zip(sizes, seeds)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sums = list(pool.map(lambda args: _mc_chunk(instance, classify, *args), zip(sizes, seeds)))
    phi_bar = math.fsum(sums) / samples
    raw = 1.0 - (1.0 + instance.c) * phi_bar
    return _estimate(raw, "monte-carlo", **common)


# -- top-k ----------------------------------------------------------------------


def epsilon_uniform_k(instance: InstanceSpec) -> EpsilonEstimate:
    """ε of UNIFORM-K on a uniform-box prior with a linear or logistic score.

    Candidates ``v1 (1 - (1 + c) b) - v2`` with ``b = min(1, B / k)``, where
    ``v1`` and ``v2`` are the top-k probabilities of the highest and lowest
    self-report at the two extremal known parts.
    """
    if not instance.is_topk:
        raise ValueError("epsilon_uniform_k needs a top-k instance")
    prior, f = instance.prior, instance.score
    if prior.kind != "uniform-box" or prior.zero_boxes:
        raise ValueError("epsilon_uniform_k needs a uniform-box prior without zero boxes; use the oracle or Monte Carlo")
    if not isinstance(f, LinearScore):
        raise ValueError("epsilon_uniform_k needs a linear or logistic score")
    k, B, c = instance.allocation.k, instance.B, instance.c
    if (1.0 + c) * B / k >= 1.0:
        return _estimate(0.0, "topk-closed-form")
    share = min(1.0, B / k)
    ext = score_extremes(f, instance.space)
    best = None
    for x in (ext.x_min, ext.x_max):
        v1 = prob_in_top_k(instance, f(AgentType(x, ext.z_max)))
        v2 = prob_in_top_k(instance, f(AgentType(x, ext.z_min)))
        gain = v1 * (1.0 - (1.0 + c) * share) - v2
        if best is None or gain > best[0]:
            best = (gain, (AgentType(x, ext.z_min), ext.z_max))
    return _estimate(best[0], "topk-closed-form", argmax=best[1])


def epsilon_dsic_topk(instance: InstanceSpec) -> EpsilonEstimate:
    """DSIC ε of UNIFORM-K under worst-case ties."""
    if not instance.is_topk:
        raise ValueError("epsilon_dsic_topk needs a top-k instance")
    if instance.allocation.tie_rule != "worst-case":
        raise ValueError("the DSIC closed form assumes worst-case tie-breaking")
    k, B, c = instance.allocation.k, instance.B, instance.c
    flip = k < instance.n and needs_audit(instance.score, instance.space, instance.prior)
    raw = 1.0 - (1.0 + c) * min(1.0, B / k) if flip else 0.0
    return _estimate(raw, "dsic")


__all__ = [
    "EpsilonEstimate", "halfspace_box_probability", "suspicious_probability",
    "suspicious_probability_with_error", "needs_audit", "expected_audit_share", "threshold_gain",
    "epsilon_exact_threshold", "epsilon_error_bound", "epsilon_mc_threshold", "hoeffding_bound",
    "epsilon_uniform_k", "epsilon_dsic_topk", "worker_count",
]
