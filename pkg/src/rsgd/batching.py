"""Batch-forming schemes and their exact expectation / variance by enumeration.

Three schemes produce the averaged stochastic gradient used at each step:

* ``SegmentPlan``: one i.i.d. outcome stream per trajectory, cut into
  consecutive segments by strictly increasing cut points; repetitions inside
  a batch are possible.
* ``SubsetPlan``: a uniformly random size-b subset of the outcomes, drawn
  without repetition via a partial Fisher-Yates shuffle (exactly uniform over
  all C(N, b) subsets); requires uniform outcome weights.
* ``StratifiedPlan``: the outcome set is partitioned into strata and each
  stratum contributes a fixed number of i.i.d. conditional draws, weighted by
  stratum probability over per-stratum count.

Every scheme knows its own outcome space, so its expectation and variance at
a step can be computed exactly by exhaustive enumeration; this is how the
unbiasedness of each scheme is certified in tests.

Draws are pure functions of (seed, t): see :mod:`rsgd.rng`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, islice

import numpy as np

from . import rng as crng
from .errors import EnumerationBudgetExceeded, InvalidPlan
from .problems import FiniteSampleSpace, GradientOracle

_STREAM_SEGMENT = 1 << 36
_STREAM_SUBSET = 1 << 40
_STREAM_STRATIFIED = 1 << 41

_ENUM_CHUNK = 1 << 15


@dataclass(frozen=True)
class BatchSizes:
    """Per-iteration batch size sequence: constant, capped geometric, or explicit."""

    kind: str
    base: int = 1
    growth: float = 1.0
    cap: int | None = None
    values: tuple[int, ...] = ()

    @classmethod
    def constant(cls, b: int) -> "BatchSizes":
        if b < 1:
            raise InvalidPlan("batch size must be >= 1")
        return cls("constant", base=b)

    @classmethod
    def geometric(cls, base: int, growth: float, cap: int) -> "BatchSizes":
        if base < 1 or cap < base or growth < 1.0:
            raise InvalidPlan("geometric sizes need base >= 1, cap >= base, growth >= 1")
        return cls("geometric", base=base, growth=growth, cap=cap)

    @classmethod
    def explicit(cls, values) -> "BatchSizes":
        vals = tuple(int(v) for v in values)
        if not vals or any(v < 1 for v in vals):
            raise InvalidPlan("explicit sizes must be a nonempty list of ints >= 1")
        return cls("explicit", values=vals)

    def at(self, t: int) -> int:
        if t < 0:
            raise InvalidPlan("iteration index must be >= 0")
        if self.kind == "constant":
            return self.base
        if self.kind == "geometric":
            return min(self.cap, int(self.base * self.growth**t))
        if t >= len(self.values):
            raise InvalidPlan(f"explicit size list has no entry for t={t}")
        return self.values[t]


@dataclass(frozen=True)
class BatchDraw:
    """One realized batch: outcome indices plus their averaging weights."""

    t: int
    outcomes: np.ndarray
    weights: np.ndarray

    @property
    def batch_size(self) -> int:
        return self.outcomes.shape[-1]

    @property
    def equal_weights(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))


class BatchPlan:
    """Interface shared by the three schemes."""

    space: FiniteSampleSpace
    seed: int
    scheme: str

    def batch_size(self, t: int) -> int:
        raise NotImplementedError

    def weights_at(self, t: int) -> np.ndarray:
        """Averaging weights of the batch at step t (fixed given t)."""
        raise NotImplementedError

    def draw_block(self, t: int, seeds) -> np.ndarray:
        """Outcome indices of shape (len(seeds), batch_size(t))."""
        raise NotImplementedError

    def outcome_count(self, t: int) -> int:
        """Exact size of the scheme's outcome space at step t (Python int)."""
        raise NotImplementedError

    def iter_outcome_chunks(self, t: int, chunk: int = _ENUM_CHUNK):
        """Yield (indices (c, B), probabilities (c,)) covering the outcome space."""
        raise NotImplementedError


class SegmentPlan(BatchPlan):
    """I.i.d. stream cut into segments; batch t covers stream slots S_t .. S_{t+1}-1."""

    scheme = "segment"

    def __init__(self, space: FiniteSampleSpace, sizes: BatchSizes, seed: int = 0):
        self.space = space
        self.sizes = sizes
        self.seed = int(seed)
        self._cuts = [0]

    def cut(self, t: int) -> int:
        while len(self._cuts) <= t:
            k = len(self._cuts) - 1
            self._cuts.append(self._cuts[-1] + self.sizes.at(k))
        return self._cuts[t]

    def batch_size(self, t: int) -> int:
        return self.sizes.at(t)

    def weights_at(self, t: int) -> np.ndarray:
        b = self.batch_size(t)
        return np.full(b, 1.0 / b)

    def draw_block(self, t: int, seeds) -> np.ndarray:
        b = self.batch_size(t)
        keys = crng.stream_keys(seeds, _STREAM_SEGMENT)
        slots = self.cut(t) + np.arange(b)
        if self.space.is_uniform:
            return crng.randints(keys, slots, self.space.size)
        return crng.weighted_indices(keys, slots, self.space.cumulative)

    def outcome_count(self, t: int) -> int:
        return int(self.space.size) ** self.batch_size(t)

    def iter_outcome_chunks(self, t: int, chunk: int = _ENUM_CHUNK):
        n, b = self.space.size, self.batch_size(t)
        w = self.space.weights
        total = n**b
        for start in range(0, total, chunk):
            k = np.arange(start, min(start + chunk, total), dtype=np.int64)
            idx = np.empty((k.size, b), dtype=np.int64)
            rem = k
            for pos in range(b - 1, -1, -1):
                idx[:, pos] = rem % n
                rem = rem // n
            yield idx, np.prod(w[idx], axis=1)


class SubsetPlan(BatchPlan):
    """Uniform size-b subsets without repetition; uniform weights required."""

    scheme = "no_repetition"

    def __init__(self, space: FiniteSampleSpace, sizes: BatchSizes, seed: int = 0):
        if not space.is_uniform:
            raise InvalidPlan(
                "no-repetition batches need uniform outcome weights; "
                "the subset average is biased otherwise"
            )
        self.space = space
        self.sizes = sizes
        self.seed = int(seed)

    def batch_size(self, t: int) -> int:
        b = self.sizes.at(t)
        if b > self.space.size:
            raise InvalidPlan(f"batch size {b} exceeds {self.space.size} outcomes")
        return b

    def weights_at(self, t: int) -> np.ndarray:
        b = self.batch_size(t)
        return np.full(b, 1.0 / b)

    def draw_block(self, t: int, seeds) -> np.ndarray:
        b = self.batch_size(t)
        n = self.space.size
        keys = crng.stream_keys(seeds, _STREAM_SUBSET + t)
        pool = np.broadcast_to(np.arange(n), (keys.size, n)).copy()
        rows = np.arange(keys.size)
        for j in range(b):
            r = crng.randints(keys, np.array([j]), n - j)[:, 0]
            pos = j + r
            tmp = pool[rows, pos].copy()
            pool[rows, pos] = pool[rows, j]
            pool[rows, j] = tmp
        # canonical sorted order: the draw is a set
        return np.sort(pool[:, :b], axis=1)

    def outcome_count(self, t: int) -> int:
        return math.comb(self.space.size, self.batch_size(t))

    def iter_outcome_chunks(self, t: int, chunk: int = _ENUM_CHUNK):
        n, b = self.space.size, self.batch_size(t)
        prob = 1.0 / math.comb(n, b)
        it = combinations(range(n), b)
        while True:
            block = list(islice(it, chunk))
            if not block:
                return
            idx = np.asarray(block, dtype=np.int64)
            yield idx, np.full(idx.shape[0], prob)


class StratifiedPlan(BatchPlan):
    """Per-stratum conditional draws, weighted by stratum probability.

    The partition is fixed across iterations by default; ``overrides`` maps an
    iteration index to a replacement (strata, counts) pair for that step only.
    """

    scheme = "stratified"

    def __init__(self, space: FiniteSampleSpace, strata, counts, seed: int = 0,
                 overrides: dict | None = None):
        self.space = space
        self.seed = int(seed)
        self.strata, self.counts = self._validated(strata, counts)
        self.overrides = {}
        for t, (s, c) in (overrides or {}).items():
            self.overrides[int(t)] = self._validated(s, c)

    def _validated(self, strata, counts):
        groups = tuple(tuple(int(i) for i in g) for g in strata)
        cnts = tuple(int(c) for c in counts)
        if len(groups) != len(cnts) or not groups:
            raise InvalidPlan("need one positive count per stratum")
        if any(c < 1 for c in cnts):
            raise InvalidPlan("per-stratum counts must be >= 1")
        if any(len(g) == 0 for g in groups):
            raise InvalidPlan("every stratum must be nonempty")
        flat = sorted(i for g in groups for i in g)
        if flat != list(range(self.space.size)):
            raise InvalidPlan("strata must partition the outcome set exactly")
        return groups, cnts

    def strata_at(self, t: int):
        return self.overrides.get(t, (self.strata, self.counts))

    def batch_size(self, t: int) -> int:
        _, counts = self.strata_at(t)
        return sum(counts)

    def _layout(self, t: int):
        strata, counts = self.strata_at(t)
        members = [np.asarray(g, dtype=np.int64) for g in strata]
        mu = [float(self.space.weights[m].sum()) for m in members]
        return strata, counts, members, mu

    def weights_at(self, t: int) -> np.ndarray:
        _, counts, _, mu = self._layout(t)
        return np.concatenate([np.full(c, m / c) for m, c in zip(mu, counts)])

    def draw_block(self, t: int, seeds) -> np.ndarray:
        _, counts, members, mu = self._layout(t)
        keys = crng.stream_keys(seeds, _STREAM_STRATIFIED + t)
        cols = []
        offset = 0
        for m, muj, c in zip(members, mu, counts):
            slots = offset + np.arange(c)
            if self.space.is_uniform:
                pos = crng.randints(keys, slots, m.size)
            else:
                cond = np.cumsum(self.space.weights[m]) / muj
                pos = crng.weighted_indices(keys, slots, cond)
            cols.append(m[pos])
            offset += c
        return np.concatenate(cols, axis=1)

    def outcome_count(self, t: int) -> int:
        _, counts, members, _ = self._layout(t)
        total = 1
        for m, c in zip(members, counts):
            total *= int(m.size) ** c
        return total

    def iter_outcome_chunks(self, t: int, chunk: int = _ENUM_CHUNK):
        _, counts, members, mu = self._layout(t)
        pos_members, pos_cond = [], []
        for m, muj, c in zip(members, mu, counts):
            cond = self.space.weights[m] / muj
            for _ in range(c):
                pos_members.append(m)
                pos_cond.append(cond)
        radices = [m.size for m in pos_members]
        total = self.outcome_count(t)
        b = len(pos_members)
        for start in range(0, total, chunk):
            k = np.arange(start, min(start + chunk, total), dtype=np.int64)
            idx = np.empty((k.size, b), dtype=np.int64)
            prob = np.ones(k.size)
            rem = k
            for pos in range(b - 1, -1, -1):
                digit = rem % radices[pos]
                rem = rem // radices[pos]
                idx[:, pos] = pos_members[pos][digit]
                prob *= pos_cond[pos][digit]
            yield idx, prob


def draw_batch(plan: BatchPlan, t: int, seed: int | None = None) -> BatchDraw:
    """The scheme's batch at step t; deterministic given (plan, seed, t)."""
    s = plan.seed if seed is None else int(seed)
    outcomes = plan.draw_block(t, np.array([s]))[0]
    return BatchDraw(t=t, outcomes=outcomes, weights=plan.weights_at(t))


def combine_batch(weights: np.ndarray, grads: np.ndarray, equal: bool) -> np.ndarray:
    """Weighted average over the batch axis (next-to-last axis of grads)."""
    if equal:
        return grads.mean(axis=-2)
    return (weights[..., None] * grads).sum(axis=-2)


def batch_gradient(oracle: GradientOracle, x, draw: BatchDraw) -> np.ndarray:
    """The averaged stochastic gradient sum_i w_i H(x, outcome_i)."""
    if np.any(draw.outcomes < 0) or np.any(draw.outcomes >= oracle.space.size):
        raise InvalidPlan("draw contains outcomes outside the oracle's sample space")
    grads = oracle.sample_gradients(x, draw.outcomes)
    return combine_batch(draw.weights, grads, draw.equal_weights)


def _enumerated_vectors(oracle, x, plan, t, budget):
    count = plan.outcome_count(t)
    if count > budget:
        raise EnumerationBudgetExceeded(
            f"{count} outcomes at t={t} exceed the enumeration budget {budget}"
        )
    x = np.asarray(x, dtype=float)
    table = oracle.sample_gradients(x, np.arange(oracle.space.size))
    w = plan.weights_at(t)
    equal = bool(np.all(w == w[0]))
    for idx, prob in plan.iter_outcome_chunks(t):
        yield combine_batch(w, table[idx], equal), prob


def enumerate_expectation(oracle: GradientOracle, x, plan: BatchPlan, t: int = 0,
                          budget: int = 10**6) -> np.ndarray:
    """Exact expectation of the batch gradient at step t, by full enumeration.

    This is the independent certificate that a scheme is unbiased: the result
    must coincide with ``oracle.full_gradient(x)``.
    """
    acc = np.zeros(np.shape(x)[-1])
    for vecs, prob in _enumerated_vectors(oracle, x, plan, t, budget):
        acc += (prob[:, None] * vecs).sum(axis=0)
    return acc


def variance_report(oracle: GradientOracle, x, plan: BatchPlan, t: int = 0,
                    budget: int = 10**6) -> float:
    """Exact E ||batch_gradient - full_gradient||^2 at step t, by enumeration."""
    g = oracle.full_gradient(np.asarray(x, dtype=float))
    acc = 0.0
    for vecs, prob in _enumerated_vectors(oracle, x, plan, t, budget):
        dev = vecs - g
        acc += float((prob * (dev * dev).sum(axis=1)).sum())
    return acc


def make_plan(scheme: str, space: FiniteSampleSpace, *, sizes: BatchSizes | None = None,
              strata=None, counts=None, seed: int = 0,
              overrides: dict | None = None) -> BatchPlan:
    """Factory used by the config front end."""
    if scheme == "segment":
        return SegmentPlan(space, sizes or BatchSizes.constant(1), seed)
    if scheme == "no_repetition":
        return SubsetPlan(space, sizes or BatchSizes.constant(1), seed)
    if scheme == "stratified":
        if strata is None or counts is None:
            raise InvalidPlan("stratified plan needs strata and per-stratum counts")
        return StratifiedPlan(space, strata, counts, seed, overrides)
    raise InvalidPlan(f"unknown scheme {scheme!r}")
