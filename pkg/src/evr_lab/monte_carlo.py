"""Replicated global-null simulations of Type I error counts.

Two scenarios are simulated, each under several allocation rules that share
one dataset per replication:

* ``control_group``: ``C`` treatment arms compared with one control arm by
  balanced z statistics (unit variance known);
* ``sur``: ``C`` simple regressions ``X_i ~ Y_i`` with ``X ~ N(0, Sigma_X)``
  independent of ``Y ~ N(0, Sigma_Y)``, tested by the slope t statistic
  against the normal critical value.

Replication ``k`` draws its data from ``PCG64(derive_seed(seed, k))`` and its
subsamples from ``egalitarian_draw(..., derive_seed(seed, k), study_id)``, so
the count matrix does not depend on how replications are spread over workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .allocation import AllocationError, derive_seed, egalitarian_draw, split_uniform
from .matrix_io import CorrelationMatrix, factorize
from .rejection_calculus import Level, _level

__all__ = [
    "SCENARIOS",
    "ErrorCountSummary",
    "JointCovCheck",
    "Rule",
    "SimConfig",
    "clt_joint_cov_check",
    "cumulant_scale",
    "cumulant_scale_exact",
    "error_counts",
    "jackknife_variance_se",
    "simulate",
    "simulate_control_group",
    "simulate_sur",
    "summarize_counts",
    "sur_table",
    "worker_count",
]

SCENARIOS = ("control_group", "sur")
_CHUNK = 100  # replications per task; fixed so the work split never depends on workers


@dataclass(frozen=True)
class Rule:
    """An allocation rule; egalitarian rules carry ``b`` with ``n = round(b sqrt(N))``."""

    kind: str
    b: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("gluttony", "splitting", "egalitarian"):
            raise ValueError(f"unknown rule {self.kind!r}")
        if self.kind == "egalitarian" and (self.b is None or self.b <= 0):
            raise ValueError("egalitarian rules need a positive b")

    @property
    def label(self) -> str:
        if self.kind == "egalitarian":
            return f"egalitarian(b={self.b:g})"
        return self.kind

    def n_sub(self, n_total: int) -> int:
        return int(round(self.b * math.sqrt(n_total)))


@dataclass(frozen=True)
class SimConfig:
    scenario: str
    n_total: int
    num_studies: int
    level: Level
    rules: tuple
    replications: int
    seed: int
    sigma_x: Optional[CorrelationMatrix] = None
    sigma_y: Optional[CorrelationMatrix] = None
    contiguous: bool = False

    def __post_init__(self):
        object.__setattr__(self, "level", _level(self.level))
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")
        if self.n_total < 3 or self.num_studies < 1 or self.replications < 2:
            raise ValueError("need n_total >= 3, num_studies >= 1 and replications >= 2")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not self.rules:
            raise ValueError("at least one rule is required")
        has_sigma = self.sigma_x is not None or self.sigma_y is not None
        if self.scenario == "sur":
            if self.sigma_x is None or self.sigma_y is None:
                raise ValueError("the sur scenario needs sigma_x and sigma_y")
            if self.sigma_x.dim != self.num_studies or self.sigma_y.dim != self.num_studies:
                raise ValueError("sigma_x and sigma_y must have dimension num_studies")
        elif has_sigma:
            raise ValueError("correlation matrices apply to the sur scenario only")
        for rule in self.rules:
            if rule.kind == "splitting":
                min_block = self.n_total // self.num_studies
                if min_block < 3:
                    raise AllocationError("splitting leaves fewer than 3 observations per study")
            if rule.kind == "egalitarian":
                n = rule.n_sub(self.n_total)
                if not 3 <= n <= self.n_total:
                    raise AllocationError(f"{rule.label} implies subsample size {n} outside [3, N]")


@dataclass(frozen=True)
class ErrorCountSummary:
    per_rule_label: str
    replications: int
    num_studies: int
    mean_errors: float
    se_mean: float
    variance_errors: float
    se_variance: float
    evr: float
    fwer_hat: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class JointCovCheck:
    target_cov: np.ndarray
    empirical_cov: np.ndarray
    empirical_corr: np.ndarray
    max_abs_dev: float
    se_scale: float
    max_corr_dev_se: float = field(default=0.0)


# ---------------------------------------------------------------------------
# summaries

def jackknife_variance_se(x: np.ndarray) -> float:
    """Leave-one-out jackknife SE of the plug-in variance ``mean((x - xbar)**2)``."""
    x = np.asarray(x, dtype=float)
    B = x.size
    s1, s2 = x.sum(), np.dot(x, x)
    loo_mean = (s1 - x) / (B - 1)
    loo_var = (s2 - x * x) / (B - 1) - loo_mean ** 2
    dev = loo_var - loo_var.mean()
    return float(math.sqrt((B - 1) / B * np.dot(dev, dev)))


def summarize_counts(counts, num_studies: int, level, label: str) -> ErrorCountSummary:
    lv = _level(level)
    e = np.asarray(counts, dtype=float)
    B = e.size
    mean = float(e.mean())
    var = float(np.mean((e - mean) ** 2))
    return ErrorCountSummary(
        per_rule_label=label,
        replications=B,
        num_studies=num_studies,
        mean_errors=mean,
        se_mean=float(math.sqrt(var * B / (B - 1) / B)),
        variance_errors=var,
        se_variance=jackknife_variance_se(e),
        evr=var / (num_studies * lv.bernoulli_variance),
        fwer_hat=float(np.mean(e > 0)),
    )


# ---------------------------------------------------------------------------
# per-replication kernels

def _subsets(cfg: SimConfig, rule: Rule, draw_seed: int, offset: int = 0) -> list[np.ndarray]:
    n = rule.n_sub(cfg.n_total)
    return [egalitarian_draw(cfg.n_total, n, draw_seed, offset + i).indices
            for i in range(cfg.num_studies)]


def _control_counts(cfg: SimConfig, k: int, blocks) -> np.ndarray:
    N, C, c = cfg.n_total, cfg.num_studies, cfg.level.c
    s = derive_seed(cfg.seed, k)
    rng = np.random.Generator(np.random.PCG64(s))
    ctrl = rng.standard_normal(N)
    treat = rng.standard_normal((C, N))
    treat_means = treat.mean(axis=1)
    out = np.empty(len(cfg.rules), dtype=np.int64)
    for r, rule in enumerate(cfg.rules):
        if rule.kind == "gluttony":
            z = (treat_means - ctrl.mean()) / math.sqrt(2.0 / N)
        elif rule.kind == "splitting":
            z = np.array([(treat_means[i] - ctrl[b].mean()) / math.sqrt(1.0 / N + 1.0 / b.size)
                          for i, b in enumerate(blocks)])
        else:
            n = rule.n_sub(N)
            ctrl_idx = _subsets(cfg, rule, s)
            treat_idx = _subsets(cfg, rule, s, offset=C)
            z = np.array([(treat[i, treat_idx[i]].mean() - ctrl[ctrl_idx[i]].mean())
                          for i in range(C)]) / math.sqrt(2.0 / n)
        out[r] = int(np.count_nonzero(np.abs(z) > c))
    return out


def _slope_t(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Slope t statistics of column-wise simple regressions of ``x`` on ``y``."""
    n = x.shape[0]
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    sxy = np.einsum("i...,i...->...", xc, yc)
    r = sxy / np.sqrt(np.einsum("i...,i...->...", xc, xc) * np.einsum("i...,i...->...", yc, yc))
    return r * math.sqrt(n - 2) / np.sqrt(1.0 - r * r)


def _sur_counts(cfg: SimConfig, k: int, blocks, lx, ly) -> np.ndarray:
    N, C, c = cfg.n_total, cfg.num_studies, cfg.level.c
    s = derive_seed(cfg.seed, k)
    rng = np.random.Generator(np.random.PCG64(s))
    X = rng.standard_normal((N, C)) @ lx.T
    Y = rng.standard_normal((N, C)) @ ly.T
    out = np.empty(len(cfg.rules), dtype=np.int64)
    for r, rule in enumerate(cfg.rules):
        if rule.kind == "gluttony":
            t = _slope_t(X, Y)
        elif rule.kind == "splitting":
            t = np.array([_slope_t(X[b, i], Y[b, i]) for i, b in enumerate(blocks)])
        else:
            idx = _subsets(cfg, rule, s)
            t = np.array([_slope_t(X[d, i], Y[d, i]) for i, d in enumerate(idx)])
        out[r] = int(np.count_nonzero(np.abs(t) > c))
    return out


def _run_chunk(cfg: SimConfig, start: int, stop: int) -> np.ndarray:
    blocks = split_uniform(cfg.n_total, cfg.num_studies, cfg.contiguous).blocks()
    out = np.empty((stop - start, len(cfg.rules)), dtype=np.int64)
    if cfg.scenario == "control_group":
        for k in range(start, stop):
            out[k - start] = _control_counts(cfg, k, blocks)
    else:
        lx, ly = factorize(cfg.sigma_x), factorize(cfg.sigma_y)
        for k in range(start, stop):
            out[k - start] = _sur_counts(cfg, k, blocks, lx, ly)
    return out


def worker_count() -> int:
    """Worker processes to use: ``EVR_LAB_THREADS`` if set, else the CPU count."""
    env = os.environ.get("EVR_LAB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError("EVR_LAB_THREADS must be a positive integer") from None
        if n < 1:
            raise ValueError("EVR_LAB_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def error_counts(cfg: SimConfig, workers: Optional[int] = None) -> np.ndarray:
    """``(replications, len(rules))`` matrix of Type I error counts."""
    workers = worker_count() if workers is None else workers
    bounds = [(a, min(a + _CHUNK, cfg.replications)) for a in range(0, cfg.replications, _CHUNK)]
    if workers <= 1 or len(bounds) == 1:
        parts = [_run_chunk(cfg, a, b) for a, b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(bounds))) as pool:
            parts = list(pool.map(_run_chunk, [cfg] * len(bounds), *zip(*bounds)))
    return np.concatenate(parts, axis=0)


def simulate(cfg: SimConfig, workers: Optional[int] = None) -> list[ErrorCountSummary]:
    """One summary per rule, in ``cfg.rules`` order."""
    counts = error_counts(cfg, workers)
    return [summarize_counts(counts[:, j], cfg.num_studies, cfg.level, rule.label)
            for j, rule in enumerate(cfg.rules)]


def simulate_control_group(cfg: SimConfig, workers: Optional[int] = None) -> list[ErrorCountSummary]:
    """Shared-control design: each study contrasts its own treatment arm with the control arm.

    Gluttony uses both full arms; splitting keeps the full treatment arm and
    gives each study one control block; egalitarian rules subsample both the
    control arm and the study's treatment arm to ``round(b sqrt(N))``.
    """
    if cfg.scenario != "control_group":
        raise ValueError("config is not a control_group scenario")
    return simulate(cfg, workers)


def simulate_sur(cfg: SimConfig, workers: Optional[int] = None) -> list[ErrorCountSummary]:
    """Regression family: study ``i`` tests the slope of ``X_i`` on ``Y_i`` using its rows."""
    if cfg.scenario != "sur":
        raise ValueError("config is not a sur scenario")
    return simulate(cfg, workers)


def sur_table(matrices: dict, n_total: int, num_studies: int, level, rules: Sequence[Rule],
              replications: int, seed: int, workers: Optional[int] = None) -> list:
    """Regression-family summaries for each ``tag -> (sigma_x, sigma_y)`` pair.

    The ``j``-th pair (in mapping order) runs under ``derive_seed(seed, j)``.
    Returns ``(tag, ErrorCountSummary)`` tuples grouped by tag.
    """
    rows = []
    for j, (tag, (sx, sy)) in enumerate(matrices.items()):
        cfg = SimConfig("sur", n_total, num_studies, level, tuple(rules), replications,
                        derive_seed(seed, j), sx, sy)
        rows.extend((tag, summary) for summary in simulate(cfg, workers))
    return rows


# ---------------------------------------------------------------------------
# joint normality and cumulant diagnostics

def clt_joint_cov_check(n_total: int, subsets: Sequence, replications: int, seed: int,
                        chunk: int = 1000) -> JointCovCheck:
    """Empirical covariance of standardized subset means ``sqrt(n_i) mean(X[D_i])``.

    The limit is ``|D_i & D_j| / sqrt(n_i n_j)``.  Only observations in the
    union of the subsets are generated.  ``max_corr_dev_se`` is the largest
    off-diagonal correlation error in units of ``(1 - rho**2) / sqrt(B)``.
    """
    sets = [np.unique(np.asarray(s, dtype=np.int64)) for s in subsets]
    if not sets or any(s.size == 0 for s in sets):
        raise ValueError("subsets must be nonempty")
    if any(s.min() < 0 or s.max() >= n_total for s in sets):
        raise ValueError(f"subset indices must lie in [0, {n_total})")
    if replications < 2:
        raise ValueError("need at least 2 replications")
    union = np.unique(np.concatenate(sets))
    C = len(sets)
    W = np.zeros((union.size, C))
    sizes = np.array([s.size for s in sets], dtype=float)
    for i, s in enumerate(sets):
        W[np.searchsorted(union, s), i] = 1.0 / math.sqrt(s.size)
    member = (W > 0).astype(float)
    target = (member.T @ member) / np.sqrt(np.outer(sizes, sizes))

    total = np.zeros(C)
    cross = np.zeros((C, C))
    for j, a in enumerate(range(0, replications, chunk)):
        m = min(chunk, replications - a)
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, j)))
        S = rng.standard_normal((m, union.size)) @ W
        total += S.sum(axis=0)
        cross += S.T @ S
    B = replications
    mean = total / B
    cov = (cross - B * np.outer(mean, mean)) / (B - 1)
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    off = ~np.eye(C, dtype=bool)
    se = (1.0 - target ** 2) / math.sqrt(B)
    dev = np.abs(corr - target)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, dev / se, 0.0)
    return JointCovCheck(
        target_cov=target,
        empirical_cov=cov,
        empirical_corr=corr,
        max_abs_dev=float(np.max(np.abs(cov - target))),
        se_scale=1.0 / math.sqrt(B),
        max_corr_dev_se=float(z[off].max()) if C > 1 else 0.0,
    )


def cumulant_scale(n_total: int, rate: float, order: int) -> float:
    """Order-``j`` joint cumulant scale ``N**(1 - j/2) r**(j/2)`` of standardized subset sums."""
    if order < 2:
        raise ValueError("order must be at least 2")
    if not 0.0 < rate <= 1.0:
        raise ValueError("rate must lie in (0, 1]")
    return float(n_total ** (1.0 - order / 2.0) * rate ** (order / 2.0))


def cumulant_scale_exact(subsets: Sequence) -> float:
    """``|D_1 & ... & D_j| / sqrt(|D_1| ... |D_j|)`` for explicit subsets (``j >= 2``)."""
    sets = [np.unique(np.asarray(s, dtype=np.int64)) for s in subsets]
    if len(sets) < 2:
        raise ValueError("need at least two subsets")
    if any(s.size == 0 for s in sets):
        raise ValueError("subsets must be nonempty")
    common = sets[0]
    for s in sets[1:]:
        common = np.intersect1d(common, s, assume_unique=True)
    log_norm = 0.5 * sum(math.log(s.size) for s in sets)
    return float(common.size * math.exp(-log_norm))
