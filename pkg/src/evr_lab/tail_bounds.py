"""Overlap tail probabilities for independent uniform subsamples.

Two independent uniform subsamples of size ``n`` from ``N`` observations share
``|D_i & D_j| ~ Hypergeometric(N, n, n)`` observations, with mean ``N r**2``
where ``r = n / N``.  A pair's correlation is at most ``kappa * overlap / n``
when ``|E[psi_i psi_j]| <= kappa``, so the event of interest is

    overlap >= t = N r rho0 / kappa = (1 + delta) * N r**2,
    delta = rho0 / (kappa r) - 1.

Each bound below is evaluated in log space and clipped to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp

__all__ = [
    "EXACT_SIZE_LIMIT",
    "InfeasibleSizeError",
    "OverlapGeometry",
    "TailBoundReport",
    "chernoff_bound",
    "expected_overlap",
    "hoeffding_bound",
    "hypergeom_pmf",
    "hypergeom_tail_exact",
    "log_bounds",
    "markov_bound",
    "p_mixed",
]

EXACT_SIZE_LIMIT = 10_000


class InfeasibleSizeError(ValueError):
    """Exact enumeration was requested for a dataset above the size guard."""


@dataclass(frozen=True)
class OverlapGeometry:
    n_total: int
    n_sub: int
    kappa: float = 1.0
    rho0: float = 1.0

    def __post_init__(self):
        if self.n_total < 1:
            raise ValueError("n_total must be positive")
        if not 1 <= self.n_sub <= self.n_total:
            raise ValueError(f"n_sub must lie in [1, n_total], got {self.n_sub}")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")
        if not 0.0 < self.rho0 <= 1.0:
            raise ValueError(f"rho0 must lie in (0, 1], got {self.rho0}")

    @property
    def rate(self) -> float:
        return self.n_sub / self.n_total

    @property
    def threshold(self) -> float:
        """Overlap count at which the correlation bound reaches ``rho0``."""
        return self.n_sub * self.rho0 / self.kappa

    @property
    def delta(self) -> float:
        return self.rho0 / (self.kappa * self.rate) - 1.0


@dataclass(frozen=True)
class TailBoundReport:
    threshold_count: float
    delta: float
    p_chernoff: float
    p_hoeffding: float
    p_markov: float
    p_mixed: float
    p_exact: Optional[float] = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def expected_overlap(geom: OverlapGeometry) -> float:
    return geom.n_total * geom.rate ** 2


def _log_chernoff(n_total, rate, delta):
    # exponent N r^2 (delta - (1 + delta) log(1 + delta)); zero when vacuous
    delta = np.asarray(delta, dtype=float)
    pos = np.maximum(delta, 0.0)
    val = n_total * rate ** 2 * (pos - (1.0 + pos) * np.log1p(pos))
    return np.where(delta > 0.0, val, 0.0)


def _log_hoeffding(n_total, rate, delta):
    delta = np.asarray(delta, dtype=float)
    return np.where(delta > 0.0, -2.0 * delta ** 2 * n_total * rate ** 3, 0.0)


def _log_markov(rate, kappa, rho0):
    return np.minimum(np.log(kappa * rate) - np.log(rho0), 0.0)


def log_bounds(n_total: int, rate: float, kappa: float, rho0):
    """Log Chernoff, Hoeffding and Markov bounds, vectorized over ``rho0``."""
    rho0 = np.asarray(rho0, dtype=float)
    delta = rho0 / (kappa * rate) - 1.0
    return (
        _log_chernoff(n_total, rate, delta),
        _log_hoeffding(n_total, rate, delta),
        _log_markov(rate, kappa, rho0),
    )


def chernoff_bound(geom: OverlapGeometry) -> float:
    return float(np.exp(_log_chernoff(geom.n_total, geom.rate, geom.delta)))


def hoeffding_bound(geom: OverlapGeometry) -> float:
    return float(np.exp(_log_hoeffding(geom.n_total, geom.rate, geom.delta)))


def markov_bound(geom: OverlapGeometry) -> float:
    return min(1.0, geom.kappa * geom.rate / geom.rho0)


def _log_pmf(n_total: int, n_sub: int) -> tuple[np.ndarray, np.ndarray]:
    lo = max(0, 2 * n_sub - n_total)
    k = np.arange(lo, n_sub + 1)
    logp = (
        _log_comb(n_sub, k)
        + _log_comb(n_total - n_sub, n_sub - k)
        - _log_comb(n_total, n_sub)
    )
    # gammaln differences lose ~1e-11 of mass at large N; renormalize
    return k, logp - logsumexp(logp)


def hypergeom_pmf(n_total: int, n_sub: int) -> tuple[np.ndarray, np.ndarray]:
    """Support and pmf of the overlap of two independent size-``n_sub`` subsamples."""
    k, logp = _log_pmf(n_total, n_sub)
    return k, np.exp(logp)


def _log_comb(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def hypergeom_tail_exact(geom: OverlapGeometry, threshold: float | None = None) -> float:
    """``P(overlap >= ceil(t))`` by exact summation of the hypergeometric pmf.

    ``threshold`` overrides the geometry's ``t = n rho0 / kappa``.

    Raises
    ------
    InfeasibleSizeError
        If ``n_total`` exceeds ``EXACT_SIZE_LIMIT``; use the bounds instead.
    """
    if geom.n_total > EXACT_SIZE_LIMIT:
        raise InfeasibleSizeError(
            f"exact tail needs n_total <= {EXACT_SIZE_LIMIT}; use p_mixed for larger datasets"
        )
    t = geom.threshold if threshold is None else float(threshold)
    # guard against t landing a hair above an integer through rounding
    k_min = math.ceil(t - 1e-9)
    lo = max(0, 2 * geom.n_sub - geom.n_total)
    if k_min <= lo:
        return 1.0
    if k_min > geom.n_sub:
        return 0.0
    k, logp = _log_pmf(geom.n_total, geom.n_sub)
    return float(min(1.0, math.exp(logsumexp(logp[k >= k_min]))))


def p_mixed(geom: OverlapGeometry) -> TailBoundReport:
    """All three bounds, their minimum, and the exact tail when affordable."""
    lc, lh, lm = log_bounds(geom.n_total, geom.rate, geom.kappa, geom.rho0)
    pc, ph, pm = (float(np.exp(v)) for v in (lc, lh, lm))
    exact = hypergeom_tail_exact(geom) if geom.n_total <= EXACT_SIZE_LIMIT else None
    return TailBoundReport(
        threshold_count=geom.threshold,
        delta=geom.delta,
        p_chernoff=pc,
        p_hoeffding=ph,
        p_markov=pm,
        p_mixed=min(1.0, max(0.0, min(pc, ph, pm))),
        p_exact=exact,
    )
