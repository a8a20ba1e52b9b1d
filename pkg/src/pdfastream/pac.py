"""Sample-size and sketch-dimension calculators for the learner's guarantees.

Pure closed-form helpers: the false-accept envelope f(m), the minimum
sample size past which it stays under a budget, the batch-size lower bound,
a normal-approximation bound on per-row hash collisions, and the cell-wise
variant's sample-size bound.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .sketch import sketch_dimensions


@dataclass(frozen=True)
class PacParams:
    mu: float
    alpha: float = 0.05
    beta: float = 0.01
    gamma: float = 0.01
    epsilon: float = 0.1
    delta_prime: float = 0.05
    n_states: int = 10
    alphabet_size: int = 4
    f_s: int = 4

    def __post_init__(self):
        if not 0.0 < self.mu <= 1.0:
            raise ValueError("mu must be in (0, 1]; distinguishability cannot be zero or negative")
        for name in ("alpha", "beta", "gamma", "epsilon", "delta_prime"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {val}")
        if self.beta >= self.mu:
            raise ValueError("the sketch error bound beta must stay below mu")
        if self.n_states < 1 or self.alphabet_size < 1 or self.f_s < 1:
            raise ValueError("n, alphabet size and window length must be >= 1")


def f_m0(m: float, mu: float, alpha: float) -> float:
    """False-accept envelope at sample size m.

    Rises to a single interior maximum (where the widening test threshold
    crosses mu) and then decays to zero as evidence accumulates.
    """
    if m < 1:
        raise ValueError("sample size must be >= 1")
    half = 1.0 / (2.0 * m)
    gap = mu - math.sqrt((2.0 / m) * math.log(2.0 / alpha))
    return half / (half + gap * gap)


def min_m0(mu: float, alpha: float, bound: float) -> int:
    """Smallest m such that f(m') <= bound for every m' >= m.

    Scans past the interior maximum, then bisects on the decreasing tail.
    """
    if bound <= 0.0:
        raise ValueError("bound must be positive")
    # climb past the maximum: f is unimodal, so once it decreases we are on the tail
    m = 1
    prev = f_m0(1, mu, alpha)
    while True:
        nxt = f_m0(m + 1, mu, alpha)
        if nxt < prev:
            break
        m += 1
        prev = nxt
    peak = m
    if f_m0(peak, mu, alpha) <= bound:
        return 1  # the bound holds at the maximum, hence everywhere
    # find an upper bracket on the tail
    hi = max(peak + 1, 2)
    while f_m0(hi, mu, alpha) > bound:
        hi *= 2
    lo = peak
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if f_m0(mid, mu, alpha) > bound:
            lo = mid
        else:
            hi = mid
    return hi


def batch_lower_bound(n: int, alphabet_size: int, epsilon: float, delta_prime: float,
                      m0: int) -> int:
    """Batch size guaranteeing (probabilistically) that every significant
    target transition and state materializes in the streamed tree."""
    if n < 1 or alphabet_size < 1 or m0 < 1:
        raise ValueError("n, alphabet size and m0 must be >= 1")
    if not 0.0 < epsilon < 1.0 or not 0.0 < delta_prime < 1.0:
        raise ValueError("epsilon and delta' must be in (0, 1)")
    ns2 = n * n * alphabet_size * alphabet_size
    term1 = (8.0 * ns2 / (epsilon * epsilon)) * math.log(2.0 * ns2 / delta_prime)
    term2 = 4.0 * m0 * n * alphabet_size / epsilon
    return math.ceil(max(term1, term2))


def batch_bound_terms(n: int, alphabet_size: int, epsilon: float, delta_prime: float,
                      m0: int) -> tuple[float, float]:
    ns2 = n * n * alphabet_size * alphabet_size
    term1 = (8.0 * ns2 / (epsilon * epsilon)) * math.log(2.0 * ns2 / delta_prime)
    term2 = 4.0 * m0 * n * alphabet_size / epsilon
    return term1, term2


def collision_bound(alphabet_size: int, w: int, t: int) -> float:
    """P(collisions per row <= t) under a normal approximation to
    Binomial(alphabet_size, 1/w); reliable only for alphabets much larger
    than the row width."""
    if alphabet_size < 1 or w < 1:
        raise ValueError("alphabet size and width must be >= 1")
    if alphabet_size < 10 * w:
        warnings.warn(
            f"normal approximation unreliable: alphabet {alphabet_size} < 10*w={10 * w}",
            RuntimeWarning,
            stacklevel=2,
        )
    if t >= alphabet_size:
        return 1.0
    if t < 0:
        return 0.0
    p = 1.0 / w
    mean = alphabet_size * p
    var = alphabet_size * p * (1.0 - p)
    sd = math.sqrt(var)
    # sum of the normal density over the integer support 0..t
    acc = 0.0
    for x in range(0, t + 1):
        z = (x - mean) / sd
        acc += math.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))
    return min(acc, 1.0)


def cellwise_m0_bound(n_c: int, n: int, alphabet_size: int, mu: float,
                      delta_prime: float) -> int:
    """Sample size making the cell-wise test safe given at most n_c
    colliding keys per cell."""
    if n_c < 1:
        raise ValueError("n_c must be >= 1")
    if not 0.0 < mu <= 1.0 or not 0.0 < delta_prime < 1.0:
        raise ValueError("mu in (0,1] and delta' in (0,1) required")
    per_cell = (mu / (4.0 * n_c)) ** 2
    return math.ceil(n_c * n * n * alphabet_size * alphabet_size / (per_cell * delta_prime))


@dataclass
class PacReport:
    params: PacParams
    w: int
    d: int
    m0: int
    batch_bound: int
    term_coverage: float
    term_evidence: float

    def dominating_term(self) -> str:
        return "coverage" if self.term_coverage >= self.term_evidence else "evidence"


def parameter_report(params: PacParams) -> PacReport:
    """Suggested sketch dimensions, minimum per-state sample size and batch
    size for a target automaton of the given shape."""
    w, d = sketch_dimensions(params.beta, params.gamma)
    wd2 = (w * d) ** 2
    budget = params.delta_prime / (
        2.0 * params.n_states**2 * params.alphabet_size**2 * wd2 * params.f_s
    )
    m0 = min_m0(params.mu, params.alpha, budget)
    bound = batch_lower_bound(
        params.n_states, params.alphabet_size, params.epsilon, params.delta_prime, m0
    )
    t1, t2 = batch_bound_terms(
        params.n_states, params.alphabet_size, params.epsilon, params.delta_prime, m0
    )
    return PacReport(params, w, d, m0, bound, t1, t2)


def format_report(report: PacReport) -> str:
    p = report.params
    lines = [
        "PAC parameter report",
        f"  target: n={p.n_states} states, alphabet={p.alphabet_size}, mu={p.mu}",
        f"  budgets: epsilon={p.epsilon}, delta'={p.delta_prime}, alpha={p.alpha}",
        f"  sketch: beta={p.beta}, gamma={p.gamma} -> w={report.w}, d={report.d}",
        f"  minimum per-state sample size m0 = {report.m0}",
        f"  batch size B >= {report.batch_bound}",
        f"    coverage term: {report.term_coverage:.6g}",
        f"    evidence term: {report.term_evidence:.6g}",
        f"    dominating: {report.dominating_term()}",
    ]
    return "\n".join(lines) + "\n"
