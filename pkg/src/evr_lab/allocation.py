"""Data-allocation procedures and realized-overlap accounting.

Three ways to hand ``C`` studies their data from one pool of ``N``
observations:

* splitting: disjoint residue-class blocks, ``block i = {j : j mod C = i}``;
* egalitarian subsampling: each study draws its own uniform subsample of a
  common size from a seeded stream keyed by ``(seed, study_id)``;
* gluttony: every study uses everything.

Randomness comes from a SplitMix64 stream so that draws are reproducible
across processes, platforms and worker counts without coordination.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np
from numba import njit

__all__ = [
    "AllocationError",
    "OverlapMatrix",
    "SplitPlan",
    "SubsampleDraw",
    "derive_seed",
    "draw_from_json",
    "draw_from_text",
    "draw_to_json",
    "draw_to_text",
    "egalitarian_draw",
    "gluttony_plan",
    "overlap_stats",
    "reference_draw",
    "split_uniform",
    "splitting_are",
]

MASK64 = (1 << 64) - 1
_MAX32 = (1 << 32) - 1
_GOLDEN = 0x9E3779B97F4A7C15
# above this fraction of N the dense Fisher-Yates pass beats Floyd's set-based walk
_DENSE_FRACTION = 64


class AllocationError(ValueError):
    """Requested allocation cannot be realized for the given sizes."""


def _mix64(z: int) -> int:
    # SplitMix64 finalizer
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Fold nonnegative integer ``keys`` into a 64-bit ``seed``.

    Each step mixes the running state with a golden-ratio offset of the key,
    so ``derive_seed(s, k)`` and ``derive_seed(s, k, j)`` give unrelated
    streams for every distinct key path.
    """
    if seed < 0 or seed > MASK64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    h = _mix64((seed + _GOLDEN) & MASK64)
    for key in keys:
        if key < 0:
            raise ValueError("seed keys must be nonnegative")
        h = _mix64((h ^ _mix64((key * _GOLDEN + 1) & MASK64)) + _GOLDEN & MASK64)
    return h


# ---------------------------------------------------------------------------
# samplers

class _SplitMix:
    """Pure-Python SplitMix64 stream; the reference for the compiled kernels."""

    def __init__(self, state: int):
        self.state = state & MASK64

    def next(self) -> int:
        self.state = (self.state + _GOLDEN) & MASK64
        return _mix64(self.state)

    def below(self, m: int) -> int:
        # unbiased draw from [0, m); see _nb_below
        if m <= _MAX32:
            prod = (self.next() >> 32) * m
            low = prod & _MAX32
            if low < m:
                threshold = (_MAX32 + 1 - m) % m
                while low < threshold:
                    prod = (self.next() >> 32) * m
                    low = prod & _MAX32
            return prod >> 32
        threshold = ((1 << 64) - m) % m
        while True:
            x = self.next()
            if x >= threshold:
                return x % m


def _reference_fisher_yates(rng: _SplitMix, n_total: int, n_sub: int) -> list[int]:
    pool = list(range(n_total))
    for i in range(n_sub):
        j = i + rng.below(n_total - i)
        pool[i], pool[j] = pool[j], pool[i]
    return sorted(pool[:n_sub])


def _reference_floyd(rng: _SplitMix, n_total: int, n_sub: int) -> list[int]:
    chosen: set[int] = set()
    for j in range(n_total - n_sub, n_total):
        t = rng.below(j + 1)
        chosen.add(j if t in chosen else t)
    return sorted(chosen)


def reference_draw(n_total: int, n_sub: int, seed: int, study_id: int) -> list[int]:
    """Slow pure-Python twin of :func:`egalitarian_draw` (same output)."""
    _check_draw_sizes(n_total, n_sub)
    rng = _SplitMix(derive_seed(seed, study_id))
    if n_sub * _DENSE_FRACTION > n_total:
        return _reference_fisher_yates(rng, n_total, n_sub)
    return _reference_floyd(rng, n_total, n_sub)


@njit(cache=True)
def _nb_next(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _nb_below(state, m):
    # Lemire's multiply-shift on the top 32 bits: exact, and divides only
    # when the low word lands in the biased sliver.  Larger ranges reject on
    # the final partial bucket of 2**64.
    mu = np.uint64(m)
    if mu <= np.uint64(0xFFFFFFFF):
        state, x = _nb_next(state)
        prod = (x >> np.uint64(32)) * mu
        low = prod & np.uint64(0xFFFFFFFF)
        if low < mu:
            threshold = (np.uint64(0x100000000) - mu) % mu
            while low < threshold:
                state, x = _nb_next(state)
                prod = (x >> np.uint64(32)) * mu
                low = prod & np.uint64(0xFFFFFFFF)
        return state, np.int64(prod >> np.uint64(32))
    threshold = (np.uint64(0) - mu) % mu
    while True:
        state, x = _nb_next(state)
        if x >= threshold:
            return state, np.int64(x % mu)


@njit(cache=True)
def _nb_fisher_yates(state, n_total, n_sub):
    pool = np.arange(n_total)
    for i in range(n_sub):
        state, r = _nb_below(state, n_total - i)
        j = i + r
        tmp = pool[i]
        pool[i] = pool[j]
        pool[j] = tmp
    return np.sort(pool[:n_sub])


@njit(cache=True)
def _nb_floyd(state, n_total, n_sub):
    out = np.empty(n_sub, dtype=np.int64)
    chosen = set()
    chosen.add(np.int64(-1))
    k = 0
    for j in range(n_total - n_sub, n_total):
        state, t = _nb_below(state, j + 1)
        pick = np.int64(j) if t in chosen else t
        chosen.add(pick)
        out[k] = pick
        k += 1
    return np.sort(out)


def _check_draw_sizes(n_total: int, n_sub: int) -> None:
    if n_total < 1:
        raise AllocationError("n_total must be positive")
    if n_sub < 0:
        raise AllocationError("n_sub must be nonnegative")
    if n_sub > n_total:
        raise AllocationError(f"cannot draw {n_sub} of {n_total} observations without replacement")


def _draw_indices(n_total: int, n_sub: int, state: int) -> np.ndarray:
    if n_sub == 0:
        return np.empty(0, dtype=np.int64)
    s = np.uint64(state)
    if n_sub * _DENSE_FRACTION > n_total:
        return _nb_fisher_yates(s, n_total, n_sub)
    return _nb_floyd(s, n_total, n_sub)


# ---------------------------------------------------------------------------
# allocation records

@dataclass(frozen=True)
class SplitPlan:
    n_total: int
    num_studies: int
    assignment: dict = field(repr=False)

    def block(self, i: int) -> np.ndarray:
        return self.assignment[i]

    def blocks(self) -> list[np.ndarray]:
        return [self.assignment[i] for i in range(self.num_studies)]

    @property
    def rates(self) -> np.ndarray:
        return np.array([len(b) for b in self.blocks()]) / self.n_total


@dataclass(frozen=True)
class SubsampleDraw:
    n_total: int
    n_sub: int
    study_id: int
    seed: int
    indices: np.ndarray = field(repr=False)

    def regenerate(self) -> "SubsampleDraw":
        return egalitarian_draw(self.n_total, self.n_sub, self.seed, self.study_id)


@dataclass(frozen=True)
class OverlapMatrix:
    """``omega[i, j] = |D_i & D_j| / N`` and the implied correlation bound."""

    omega: np.ndarray
    rates: np.ndarray
    corr_bound: np.ndarray
    counts: np.ndarray


def split_uniform(n_total: int, num_studies: int, contiguous: bool = False) -> SplitPlan:
    """Partition ``range(n_total)`` into ``num_studies`` blocks.

    Blocks are residue classes by default; ``contiguous=True`` gives runs of
    consecutive indices instead.  Either way the first ``N mod C`` blocks get
    one extra observation.
    """
    if n_total < 1 or num_studies < 1:
        raise AllocationError("n_total and num_studies must be positive")
    if num_studies > n_total:
        raise AllocationError(f"cannot split {n_total} observations into {num_studies} nonempty blocks")
    idx = np.arange(n_total)
    if contiguous:
        base, extra = divmod(n_total, num_studies)
        sizes = [base + (i < extra) for i in range(num_studies)]
        edges = np.concatenate([[0], np.cumsum(sizes)])
        assignment = {i: idx[edges[i]:edges[i + 1]] for i in range(num_studies)}
    else:
        assignment = {i: idx[i::num_studies] for i in range(num_studies)}
    return SplitPlan(n_total, num_studies, assignment)


def gluttony_plan(n_total: int, num_studies: int) -> list[np.ndarray]:
    """Every study receives every observation."""
    full = np.arange(n_total)
    return [full] * num_studies


def egalitarian_draw(n_total: int, n_sub: int, seed: int, study_id: int) -> SubsampleDraw:
    """Uniform size-``n_sub`` subsample of ``range(n_total)``, keyed by ``(seed, study_id)``.

    Partial Fisher-Yates is used when ``n_sub > n_total / 64`` and Floyd's
    algorithm otherwise; both consume one SplitMix64 stream and return sorted
    indices.
    """
    _check_draw_sizes(n_total, n_sub)
    state = derive_seed(seed, study_id)
    indices = _draw_indices(n_total, n_sub, state)
    indices.setflags(write=False)
    return SubsampleDraw(n_total, n_sub, study_id, seed, indices)


def _as_index_array(d) -> np.ndarray:
    if isinstance(d, SubsampleDraw):
        return d.indices
    return np.asarray(d, dtype=np.int64).ravel()


def overlap_stats(draws: Sequence, n_total: int) -> OverlapMatrix:
    """Pairwise overlap fractions for a list of index sets.

    ``corr_bound[i, j] = omega_ij / sqrt(r_i r_j)`` bounds the correlation of
    two asymptotically linear statistics with unit-variance influence
    functions; empty sets get a zero row.
    """
    sets = [_as_index_array(d) for d in draws]
    C = len(sets)
    member = np.zeros((C, n_total), dtype=np.float64)
    for i, s in enumerate(sets):
        if s.size and (s.min() < 0 or s.max() >= n_total):
            raise AllocationError(f"index set {i} has entries outside [0, {n_total})")
        if np.unique(s).size != s.size:
            raise AllocationError(f"index set {i} repeats an observation")
        member[i, s] = 1.0
    counts = member @ member.T
    omega = counts / n_total
    rates = np.diag(omega).copy()
    scale = np.sqrt(np.outer(rates, rates))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(scale > 0, omega / scale, 0.0)
    corr = np.clip(corr, 0.0, 1.0)
    return OverlapMatrix(omega, rates, corr, counts.astype(np.int64))


def splitting_are(rates: Iterable[float]) -> float:
    """Maximin asymptotic relative efficiency ``min_i r_i`` of an allocation."""
    r = np.asarray(list(rates), dtype=float)
    if r.size == 0 or np.any(r <= 0):
        raise ValueError("rates must be a nonempty vector of positive fractions")
    return float(r.min())


# ---------------------------------------------------------------------------
# serialization

def draw_to_text(draw: SubsampleDraw, stream: TextIO | None = None) -> str:
    text = "".join(f"{int(i)}\n" for i in draw.indices)
    if stream is not None:
        stream.write(text)
    return text


def draw_from_text(text: str) -> np.ndarray:
    """Parse newline-delimited decimal indices."""
    out = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise AllocationError(f"line {line_no} is not an integer index") from None
    return np.array(out, dtype=np.int64)


def draw_to_json(draw: SubsampleDraw) -> str:
    return json.dumps({
        "n_total": draw.n_total,
        "n_sub": draw.n_sub,
        "seed": draw.seed,
        "study_id": draw.study_id,
        "indices": [int(i) for i in draw.indices],
    })


def draw_from_json(text: str) -> SubsampleDraw:
    rec = json.loads(text)
    try:
        idx = np.array(rec["indices"], dtype=np.int64)
        draw = SubsampleDraw(int(rec["n_total"]), int(rec["n_sub"]), int(rec["study_id"]),
                             int(rec["seed"]), idx)
    except (KeyError, TypeError, ValueError):
        raise AllocationError("draw record needs n_total, n_sub, seed, study_id and indices") from None
    if idx.size != draw.n_sub:
        raise AllocationError("draw record size does not match n_sub")
    return draw
