"""Error-count calculus for jointly normal two-sided tests under the global null.

For ``C`` two-sided z-tests at level ``alpha`` the Type I error count
``E = sum(1{|T_i| > c})`` always has mean ``C * alpha``.  Its variance is

    V(E) = C alpha (1 - alpha) + 2 * sum_{i<j} R(rho_ij, c)

where ``R(rho, c) = P(both reject) - alpha**2`` is the excess joint
rejection probability of a pair with correlation ``rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .gaussian_core import bvn_upper, std_normal_quantile
from .matrix_io import CorrelationMatrix

__all__ = [
    "EquicorrDesign",
    "Level",
    "equicorrelated_variance",
    "error_count_variance",
    "excess_R",
    "fwer_equicorrelated",
    "fwer_vs_sd_curve",
    "joint_rejection_prob",
    "quadratic_bound_gap",
]


@dataclass(frozen=True)
class Level:
    """Two-sided test level and its critical value ``c = Phi^{-1}(1 - alpha/2)``."""

    alpha: float
    c: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "c", std_normal_quantile(1.0 - self.alpha / 2.0))

    @property
    def bernoulli_variance(self) -> float:
        return self.alpha * (1.0 - self.alpha)


def _level(level) -> Level:
    return level if isinstance(level, Level) else Level(float(level))


@dataclass(frozen=True)
class EquicorrDesign:
    num_tests: int
    rho: float
    level: Level

    def __post_init__(self):
        if self.num_tests < 1:
            raise ValueError("num_tests must be positive")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"equicorrelation must lie in [0, 1], got {self.rho}")


def excess_R(rho, level):
    """``R(rho, c) = P(R_i and R_j) - alpha**2`` for correlation ``rho``.

    Written in terms of upper-quadrant probabilities,
    ``P(R_i and R_j) = 2 L(rho) + 2 L(-rho)`` with ``L(rho) = P(Z1 > c, Z2 > c)``,
    which avoids cancelling two numbers close to one.  ``|rho| = 1`` returns
    the limit ``alpha (1 - alpha)`` and ``rho = 0`` returns exactly zero.
    """
    lv = _level(level)
    rho = np.asarray(rho, dtype=float)
    if np.any(np.abs(rho) > 1.0):
        raise ValueError("correlation must lie in [-1, 1]")
    a = lv.alpha
    out = np.full(rho.shape, a * (1.0 - a))
    out[rho == 0.0] = 0.0
    inner = (np.abs(rho) < 1.0) & (rho != 0.0)
    if inner.any():
        r = rho[inner]
        joint = 2.0 * (bvn_upper(lv.c, lv.c, r) + bvn_upper(lv.c, lv.c, -r))
        out[inner] = np.maximum(joint - a * a, 0.0)
    return float(out) if out.ndim == 0 else out


def joint_rejection_prob(rho, level):
    """Probability that two two-sided level-alpha tests with correlation rho both reject."""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(np.abs(rho_arr) >= 1.0):
        raise ValueError("joint_rejection_prob needs |rho| < 1; use alpha for the rho -> 1 limit")
    lv = _level(level)
    return lv.alpha ** 2 + excess_R(rho, lv)


def error_count_variance(corr, level) -> float:
    """Variance of the Type I error count for tests with correlation matrix ``corr``.

    ``R`` is evaluated once per distinct off-diagonal value, so equicorrelated
    matrices cost a single bivariate-normal evaluation.
    """
    lv = _level(level)
    m = corr if isinstance(corr, CorrelationMatrix) else CorrelationMatrix.from_array(corr)
    base = m.dim * lv.bernoulli_variance
    if m.dim == 1:
        return base
    values, counts = np.unique(m.offdiag(), return_counts=True)
    excess = np.atleast_1d(excess_R(np.clip(values, -1.0, 1.0), lv))
    return float(base + 2.0 * np.dot(counts, excess))


def equicorrelated_variance(num_tests: int, rho: float, level) -> float:
    """Closed form ``C a(1-a) + C(C-1) R(rho)`` without building the matrix."""
    lv = _level(level)
    return num_tests * lv.bernoulli_variance + num_tests * (num_tests - 1) * excess_R(rho, lv)


# One-factor FWER integral: composite Gauss-Legendre on [-8.5, 8.5], with
# breakpoints bracketing the acceptance boundaries z = +-c/sqrt(rho).
_FWER_LIMIT = 8.5
_FWER_SEGMENT_PANELS = 10
_FWER_ORDER = 10
_GL_T, _GL_W = np.polynomial.legendre.leggauss(_FWER_ORDER)


def _fwer_nodes(c: float, s: float, t: float) -> tuple[np.ndarray, np.ndarray]:
    edge = c / s
    width = 12.0 * t / s
    cuts = np.clip([-edge - width, -edge + width, edge - width, edge + width],
                   -_FWER_LIMIT, _FWER_LIMIT)
    breaks = np.unique(np.concatenate([[-_FWER_LIMIT, _FWER_LIMIT], cuts]))
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        edges = np.linspace(a, b, _FWER_SEGMENT_PANELS + 1)
        lo, hi = edges[:-1, None], edges[1:, None]
        half = (hi - lo) / 2.0
        nodes.append((half * _GL_T + (hi + lo) / 2.0).ravel())
        weights.append((half * _GL_W).ravel())
    z = np.concatenate(nodes)
    w = np.concatenate(weights) * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return z, w


def fwer_equicorrelated(design: EquicorrDesign) -> float:
    """Familywise error rate of ``C`` equicorrelated two-sided tests.

    Uses the one-factor representation ``T_i = sqrt(rho) Z + sqrt(1 - rho) e_i``:
    conditional on ``Z`` the tests are independent, so
    ``1 - FWER = E_Z[(P(|T_i| <= c | Z))**C]``.
    """
    lv = design.level
    C, rho = design.num_tests, design.rho
    if rho == 0.0:
        return 1.0 - (1.0 - lv.alpha) ** C
    if rho == 1.0:
        return lv.alpha
    s, t = math.sqrt(rho), math.sqrt(1.0 - rho)
    z, w = _fwer_nodes(lv.c, s, t)
    accept = ndtr((lv.c - s * z) / t) - ndtr((-lv.c - s * z) / t)
    with np.errstate(divide="ignore"):
        prob_none = float(np.dot(w, np.exp(C * np.log(accept))))
    fwer = 1.0 - prob_none
    return min(max(fwer, lv.alpha), 1.0 - (1.0 - lv.alpha) ** C)


def fwer_vs_sd_curve(C: int, level, rho_grid) -> list[tuple[float, float, float]]:
    """Rows ``(rho, fwer, sd)`` for equicorrelated designs along ``rho_grid``."""
    lv = _level(level)
    rows = []
    for rho in rho_grid:
        rho = float(rho)
        if not 0.0 <= rho <= 1.0:
            raise ValueError(f"rho grid values must lie in [0, 1], got {rho}")
        fwer = fwer_equicorrelated(EquicorrDesign(C, rho, lv))
        sd = math.sqrt(equicorrelated_variance(C, rho, lv))
        rows.append((rho, fwer, sd))
    return rows


def quadratic_bound_gap(rho, level):
    """``alpha (1 - alpha) rho**2 - R(rho, c)``; nonnegative when R is subquadratic."""
    lv = _level(level)
    rho = np.asarray(rho, dtype=float)
    gap = lv.bernoulli_variance * rho ** 2 - np.asarray(excess_R(rho, lv))
    return float(gap) if gap.ndim == 0 else gap
