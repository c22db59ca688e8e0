"""Variance bounds, power and dataset capacity for allocation designs.

For egalitarian subsampling with per-study fraction ``r`` the expected error
count variance is bounded by

    C a(1-a) + C(C-1) [a(1-a) p_mixed(rho0) + R(rho0, c)]

for any threshold ``rho0``: a pair either has correlation above ``rho0``
(probability at most ``p_mixed``, excess at most ``a(1-a)``) or below it
(excess at most ``R(rho0)`` by monotonicity).  The per-pair term
``eps(rho0)`` is minimized by grid search, and inverting
``EVR <= 1 + delta`` gives the capacity ``1 + floor(delta a(1-a) / eps)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr
from scipy.stats import nct
from scipy.stats import t as student_t

from .rejection_calculus import Level, _level, equicorrelated_variance, excess_R
from .tail_bounds import OverlapGeometry, log_bounds, p_mixed

__all__ = [
    "RULES",
    "CapacityResult",
    "CertificationRecord",
    "DesignSpec",
    "PerformanceCriteria",
    "PowerQuery",
    "capacity",
    "certify_performant",
    "epsilon_term",
    "evr_bound",
    "expected_variance_bound",
    "min_sample_size",
    "optimize_rho0",
    "power_two_sample_t",
    "power_two_sample_z",
    "power_unbalanced_z",
]

RULES = ("gluttony", "splitting", "egalitarian")


@dataclass(frozen=True)
class DesignSpec:
    """A portfolio of ``num_studies`` tests sharing ``n_total`` observations.

    Egalitarian designs take exactly one of ``b`` (``r = b / sqrt(N)``) or
    ``fixed_rate``.  ``kappa`` bounds the association of the studies'
    influence functions; it is 1/2 when studies share only a control arm.
    """

    n_total: int
    num_studies: int
    level: Level
    rule: str = "egalitarian"
    b: Optional[float] = None
    fixed_rate: Optional[float] = None
    kappa: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "level", _level(self.level))
        if self.n_total < 1 or self.num_studies < 1:
            raise ValueError("n_total and num_studies must be positive")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")
        if self.rule == "egalitarian":
            if (self.b is None) == (self.fixed_rate is None):
                raise ValueError("egalitarian designs need exactly one of b or fixed_rate")
            if self.b is not None and self.b <= 0:
                raise ValueError("b must be positive")
            if self.fixed_rate is not None and not 0.0 < self.fixed_rate <= 1.0:
                raise ValueError("fixed_rate must lie in (0, 1]")
            if self.n_sub < 1 or self.n_sub > self.n_total:
                raise ValueError(f"implied subsample size {self.n_sub} is outside [1, N]")
        if self.rule == "splitting" and self.num_studies > self.n_total:
            raise ValueError("splitting needs num_studies <= n_total")

    @property
    def rate(self) -> float:
        """Nominal per-study fraction of the data."""
        if self.rule == "gluttony":
            return 1.0
        if self.rule == "splitting":
            return 1.0 / self.num_studies
        if self.b is not None:
            return self.b / math.sqrt(self.n_total)
        return float(self.fixed_rate)

    @property
    def n_sub(self) -> int:
        if self.rule == "splitting":
            return self.n_total // self.num_studies
        return int(round(self.n_total * self.rate))

    def geometry(self, rho0: float) -> OverlapGeometry:
        return OverlapGeometry(self.n_total, self.n_sub, self.kappa, rho0)

    def with_studies(self, num_studies: int) -> "DesignSpec":
        return DesignSpec(self.n_total, num_studies, self.level, self.rule,
                          self.b, self.fixed_rate, self.kappa)


@dataclass(frozen=True)
class PerformanceCriteria:
    rho0: float
    beta0: float = 0.01
    gamma: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.rho0 <= 1.0:
            raise ValueError("rho0 must lie in (0, 1]")
        if not 0.0 < self.beta0 < 1.0:
            raise ValueError("beta0 must lie in (0, 1)")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")


@dataclass(frozen=True)
class CapacityResult:
    max_studies: int
    delta: float
    rho0_used: Optional[float]
    epsilon: float
    binding: str


@dataclass(frozen=True)
class PowerQuery:
    effect_size: float
    level: Level
    n_per_arm: int

    def __post_init__(self):
        object.__setattr__(self, "level", _level(self.level))
        if self.effect_size <= 0:
            raise ValueError("effect_size must be positive")
        if self.n_per_arm < 1:
            raise ValueError("n_per_arm must be positive")


@dataclass(frozen=True)
class CertificationRecord:
    large_pair_budget: float
    large_pair_expected: float
    budget_ok: bool
    power: float
    power_target: float
    power_ok: bool

    @property
    def performant(self) -> bool:
        return self.budget_ok and self.power_ok


# ---------------------------------------------------------------------------
# variance bounds

def _large_pair_prob(spec: DesignSpec, rho0: float) -> float:
    """Probability that a pair's correlation bound exceeds ``rho0``."""
    if spec.rule == "splitting":
        return 0.0
    if spec.rule == "gluttony":
        return 1.0 if spec.kappa > rho0 else 0.0
    return p_mixed(spec.geometry(rho0)).p_mixed


def epsilon_term(spec: DesignSpec, rho0) -> np.ndarray | float:
    """``a(1-a) p_mixed(rho0) + R(rho0, c)`` for an egalitarian design, vectorized over ``rho0``."""
    lv = spec.level
    rho0 = np.asarray(rho0, dtype=float)
    rate = spec.n_sub / spec.n_total
    lc, lh, lm = log_bounds(spec.n_total, rate, spec.kappa, rho0)
    p = np.exp(np.minimum(np.minimum(lc, lh), lm))
    eps = lv.bernoulli_variance * p + np.asarray(excess_R(rho0, lv))
    return float(eps) if eps.ndim == 0 else eps


def expected_variance_bound(spec: DesignSpec, crit: Optional[PerformanceCriteria] = None) -> float:
    """Upper bound on the expected error-count variance of the design.

    Splitting is exact at ``C a(1-a)``; gluttony is exact with pairwise
    correlation ``kappa``.  Egalitarian designs need ``crit.rho0``.
    """
    lv, C = spec.level, spec.num_studies
    if spec.rule == "splitting":
        return C * lv.bernoulli_variance
    if spec.rule == "gluttony":
        return equicorrelated_variance(C, spec.kappa, lv)
    if crit is None:
        raise ValueError("egalitarian bounds need a threshold rho0")
    base = C * lv.bernoulli_variance
    if C == 1:
        return base
    return base + C * (C - 1) * epsilon_term(spec, crit.rho0)


def evr_bound(spec: DesignSpec, crit: Optional[PerformanceCriteria] = None) -> float:
    """Expected variance ratio bound, relative to ``C a(1-a)``."""
    lv, C = spec.level, spec.num_studies
    if spec.rule == "splitting" or C == 1:
        return 1.0
    if spec.rule == "gluttony":
        return 1.0 + (C - 1) * excess_R(spec.kappa, lv) / lv.bernoulli_variance
    if crit is None:
        raise ValueError("egalitarian bounds need a threshold rho0")
    return 1.0 + (C - 1) * epsilon_term(spec, crit.rho0) / lv.bernoulli_variance


def optimize_rho0(spec: DesignSpec, grid_step: float = 1e-4) -> tuple[float, float]:
    """Grid minimizer of ``eps(rho0)`` over ``{kappa r + k step} intersect (kappa r, 1]``.

    Ties go to the smallest ``rho0``.
    """
    if spec.rule != "egalitarian":
        raise ValueError("rho0 search applies to egalitarian designs only")
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    start = spec.kappa * spec.n_sub / spec.n_total
    n_steps = math.floor((1.0 - start) / grid_step + 1e-9)
    if n_steps < 1:
        raise ValueError("empty rho0 grid: kappa * r leaves no room below 1")
    # rounding keeps the grid values on clean decimals
    grid = np.round(start + grid_step * np.arange(1, n_steps + 1), 12)
    grid = grid[grid <= 1.0]
    eps = epsilon_term(spec, grid)
    k = int(np.argmin(eps))
    return float(grid[k]), float(eps[k])


# ---------------------------------------------------------------------------
# power

def power_unbalanced_z(effect_size: float, level, n1: int, n2: int) -> float:
    """Two-sided z-test power for a mean contrast with arm sizes ``n1`` and ``n2``."""
    lv = _level(level)
    nc = effect_size / math.sqrt(1.0 / n1 + 1.0 / n2)
    return float(ndtr(nc - lv.c) + ndtr(-nc - lv.c))


def power_two_sample_z(q: PowerQuery) -> float:
    """Power of the balanced two-sided z-test with ``n_per_arm`` per arm."""
    return power_unbalanced_z(q.effect_size, q.level, q.n_per_arm, q.n_per_arm)


def _power_t(effect_size: float, lv: Level, n: int) -> float:
    df = 2 * n - 2
    nc = effect_size * math.sqrt(n / 2.0)
    crit = student_t.isf(lv.alpha / 2.0, df)
    # lower tail by reflection; nct.cdf returns nan far below the mode
    return float(nct.sf(crit, df, nc) + nct.sf(crit, df, -nc))


def power_two_sample_t(q: PowerQuery) -> float:
    """Power of the balanced two-sided pooled-variance t-test (noncentral t).

    Needs at least two observations per arm.
    """
    if q.n_per_arm < 2:
        raise ValueError("the t-test needs n_per_arm >= 2")
    return _power_t(q.effect_size, q.level, q.n_per_arm)


def min_sample_size(effect_size: float, level, power_target: float, model: str = "t") -> int:
    """Smallest per-arm size reaching ``power_target`` (integer bisection).

    ``model="t"`` uses the exact t-test power and starts at 2 per arm;
    ``model="z"`` uses the normal approximation and starts at 1.
    """
    lv = _level(level)
    if effect_size <= 0:
        raise ValueError("target power is unreachable with a nonpositive effect size")
    if not lv.alpha < power_target < 1.0:
        raise ValueError("power_target must lie strictly between alpha and 1")
    if model == "t":
        def power(n):
            return _power_t(effect_size, lv, n)
        lo = 2
    elif model == "z":
        def power(n):
            return power_unbalanced_z(effect_size, lv, n, n)
        lo = 1
    else:
        raise ValueError("model must be 't' or 'z'")

    if power(lo) >= power_target:
        return lo
    hi = 2 * lo
    while power(hi) < power_target:
        lo, hi = hi, hi * 2
        if hi > 1 << 62:
            raise ValueError("target power is unreachable at representable sample sizes")
    # invariant: power(lo) < target <= power(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if power(mid) >= power_target:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# certification and capacity

def certify_performant(spec: DesignSpec, crit: PerformanceCriteria,
                       effect_size: float) -> CertificationRecord:
    """Check the large-correlation pair budget and per-study power."""
    C = spec.num_studies
    pairs = C * (C - 1) / 2.0
    expected = pairs * _large_pair_prob(spec, crit.rho0) if C > 1 else 0.0
    if spec.rule == "gluttony":
        n = spec.n_total
    else:
        n = spec.n_sub
    pw = power_unbalanced_z(effect_size, spec.level, n, n)
    target = 1.0 - crit.beta0
    return CertificationRecord(
        large_pair_budget=crit.gamma,
        large_pair_expected=expected,
        budget_ok=expected <= crit.gamma,
        power=pw,
        power_target=target,
        power_ok=pw >= target,
    )


def capacity(spec: DesignSpec, delta: float, crit: Optional[PerformanceCriteria] = None,
             min_per_study: Optional[int] = None, grid_step: float = 1e-4) -> CapacityResult:
    """Largest number of studies keeping ``EVR <= 1 + delta`` and ``n_sub >= M``.

    Splitting is limited only by sample size, ``floor(N / M)``.  Subsampling
    designs solve ``(C - 1) eps <= delta a(1-a)``; ``rho0`` comes from
    ``crit`` when given and from :func:`optimize_rho0` otherwise.  An
    underpowered subsample yields capacity 0 with a warning.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if min_per_study is not None and min_per_study < 1:
        raise ValueError("min_per_study must be positive")
    lv = spec.level
    if spec.rule == "splitting":
        if min_per_study is None:
            raise ValueError("splitting capacity needs min_per_study")
        return CapacityResult(spec.n_total // min_per_study, delta, None, 0.0, "sample-size")

    if spec.rule == "gluttony":
        rho0, eps = spec.kappa, excess_R(spec.kappa, lv)
        n_sub = spec.n_total
    else:
        if crit is None:
            rho0, eps = optimize_rho0(spec, grid_step)
        else:
            rho0, eps = crit.rho0, epsilon_term(spec, crit.rho0)
        n_sub = spec.n_sub
    if min_per_study is not None and n_sub < min_per_study:
        warnings.warn(f"subsample size {n_sub} is below the per-study minimum {min_per_study}; "
                      "capacity is 0", RuntimeWarning, stacklevel=2)
        return CapacityResult(0, delta, rho0, eps, "sample-size")
    if eps <= 0:
        raise ValueError("per-pair excess is zero; capacity is unbounded")
    return CapacityResult(1 + math.floor(delta * lv.bernoulli_variance / eps), delta, rho0, eps, "evr")
