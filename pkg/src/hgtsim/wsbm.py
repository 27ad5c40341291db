"""Latent-type pairwise production model: data types, samplers, and exact
likelihood oracles.

Agents carry a latent type in {1,…,K}; a pairing assigns agents into edges and
each edge produces a binary outcome whose success probability depends only on
the endpoint types (a K×K production matrix). Outcomes here are Bernoulli
only; continuous edge weights are an extension point, not implemented.

Conventions
-----------
- Type indices are 0-based everywhere in code; 1-based labels appear only at
  I/O boundaries (CLI output, file schemas).
- Log-domain arithmetic with log-sum-exp wherever likelihoods are combined.
  Impossible configurations (log of zero) yield a ``-inf`` sentinel rather
  than an exception so brute-force sums stay well-defined.
- All containers are immutable values after construction; samplers take an
  explicit RNG (seed or ``numpy.random.Generator``) and are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

NEG_INF = float("-inf")

#: Largest K**n allowed in the brute-force marginal likelihood.
BRUTEFORCE_LIMIT = 10**7


def as_rng(seed: int | np.random.Generator | np.random.SeedSequence) -> np.random.Generator:
    """Coerce an int seed, SeedSequence, or Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _as_float_matrix(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ProductionMatrix:
    """K×K matrix of pairwise success probabilities, optionally symmetric."""

    values: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        vals = _as_float_matrix(self.values)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError(f"production matrix must be square, got shape {vals.shape}")
        if not np.all((vals >= 0.0) & (vals <= 1.0)):
            raise ValueError("production matrix entries must lie in [0, 1]")
        if self.symmetric and not np.array_equal(vals, vals.T):
            raise ValueError("symmetric flag set but matrix is not symmetric")

    @property
    def k(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class TypeDistribution:
    """Probability vector over the K latent types."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("type distribution must be a nonempty vector")
        if np.any(p < 0.0):
            raise ValueError("type probabilities must be nonnegative")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise ValueError(f"type probabilities must sum to 1, got {p.sum()!r}")

    @property
    def k(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class TypeVector:
    """Latent type assignment for n agents (0-based types in {0,…,K-1})."""

    types: np.ndarray
    k: int

    def __post_init__(self):
        t = np.asarray(self.types, dtype=np.int64)
        t.setflags(write=False)
        object.__setattr__(self, "types", t)
        if t.ndim != 1:
            raise ValueError("type vector must be one-dimensional")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if t.size and (t.min() < 0 or t.max() >= self.k):
            raise ValueError(f"types must lie in [0, {self.k - 1}]")

    @property
    def n(self) -> int:
        return self.types.size

    def counts(self) -> np.ndarray:
        """Number of agents of each type, length K."""
        return np.bincount(self.types, minlength=self.k)


@dataclass(frozen=True)
class PairingPlan:
    """Simple-graph edge list: m unordered pairs (i1 < i2) over n agents."""

    edges: np.ndarray
    n: int

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if e.size:
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError("edge endpoints out of range")
            if np.any(e[:, 0] >= e[:, 1]):
                raise ValueError("edges must satisfy i1 < i2")
            keys = e[:, 0] * self.n + e[:, 1]
            if np.unique(keys).size != keys.size:
                raise ValueError("duplicate edges are not allowed")

    @property
    def m(self) -> int:
        return self.edges.shape[0]


@dataclass(frozen=True)
class OutcomeVector:
    """Binary outcome per edge, aligned index-for-index with a PairingPlan."""

    outcomes: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.outcomes, dtype=np.int64)
        y.setflags(write=False)
        object.__setattr__(self, "outcomes", y)
        if y.ndim != 1:
            raise ValueError("outcomes must be one-dimensional")
        if y.size and not np.all((y == 0) | (y == 1)):
            raise ValueError("outcomes must be 0 or 1")

    @property
    def m(self) -> int:
        return self.outcomes.size


def sample_types(n: int, pi: TypeDistribution, seed) -> TypeVector:
    """Draw n i.i.d. latent types from ``pi``.

    Deterministic given the seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = as_rng(seed)
    draws = rng.choice(pi.k, size=n, p=pi.probs)
    return TypeVector(types=draws, k=pi.k)


def sample_outcomes(plan: PairingPlan, z: TypeVector, theta: ProductionMatrix, seed) -> OutcomeVector:
    """Draw one Bernoulli outcome per edge with mean theta[z_i1, z_i2]."""
    if z.n != plan.n:
        raise ValueError(f"plan has n={plan.n} but type vector has n={z.n}")
    if z.k != theta.k:
        raise ValueError("type vector and production matrix disagree on K")
    rng = as_rng(seed)
    probs = theta.values[z.types[plan.edges[:, 0]], z.types[plan.edges[:, 1]]]
    y = (rng.random(plan.m) < probs).astype(np.int64)
    return OutcomeVector(outcomes=y)


def expected_weight(theta: ProductionMatrix, a: int, b: int) -> float:
    """Expected output of a type-(a, b) pair; for Bernoulli this is theta[a, b]."""
    k = theta.k
    if not (0 <= a < k and 0 <= b < k):
        raise IndexError(f"type indices ({a}, {b}) out of range for K={k}")
    return float(theta.values[a, b])


def _edge_term_log(y: int, p: float) -> float:
    # log p^y (1-p)^(1-y) with the -inf sentinel at contradicting boundaries
    if y == 1:
        return np.log(p) if p > 0.0 else NEG_INF
    return np.log1p(-p) if p < 1.0 else NEG_INF


def complete_loglik(
    y: OutcomeVector,
    plan: PairingPlan,
    z: TypeVector,
    pi: TypeDistribution,
    theta: ProductionMatrix,
) -> float:
    """Joint log-likelihood of (outcomes, types) at a known type assignment.

    Returns ``-inf`` when a type has zero prior probability or a boundary
    theta entry contradicts an observed outcome.
    """
    if y.m != plan.m:
        raise ValueError("outcomes and plan disagree on edge count")
    if z.n != plan.n or z.k != pi.k or pi.k != theta.k:
        raise ValueError("inconsistent dimensions")
    total = 0.0
    for t in z.types:
        p = pi.probs[t]
        if p <= 0.0:
            return NEG_INF
        total += np.log(p)
    for j in range(plan.m):
        a = z.types[plan.edges[j, 0]]
        b = z.types[plan.edges[j, 1]]
        term = _edge_term_log(int(y.outcomes[j]), float(theta.values[a, b]))
        if term == NEG_INF:
            return NEG_INF
        total += term
    return float(total)


def marginal_loglik_bruteforce(
    y: OutcomeVector,
    plan: PairingPlan,
    pi: TypeDistribution,
    theta: ProductionMatrix,
) -> float:
    """Exact marginal log-likelihood by summing over all K**n type vectors.

    Test-scale oracle; refuses instances with K**n > BRUTEFORCE_LIMIT. The
    summation runs in the log domain with log-sum-exp stabilization.
    """
    if y.m != plan.m:
        raise ValueError("outcomes and plan disagree on edge count")
    if pi.k != theta.k:
        raise ValueError("inconsistent dimensions")
    n, k = plan.n, pi.k
    if k**n > BRUTEFORCE_LIMIT:
        raise ValueError(f"instance too large for brute force: K^n = {k}^{n}")

    # Enumerate assignments in blocks; vectorized complete log-likelihood.
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi.probs)
        log_p1 = np.log(theta.values)
        log_p0 = np.log1p(-theta.values)
    i1, i2 = plan.edges[:, 0], plan.edges[:, 1]
    yv = y.outcomes
    total = k**n
    block = 1 << 14
    parts = []
    assignment = np.empty((min(block, total), n), dtype=np.int64)
    for start in range(0, total, block):
        stop = min(start + block, total)
        codes = np.arange(start, stop, dtype=np.int64)
        rows = assignment[: stop - start]
        c = codes.copy()
        for pos in range(n - 1, -1, -1):
            rows[:, pos] = c % k
            c //= k
        ll = log_pi[rows].sum(axis=1)
        if plan.m:
            za = rows[:, i1]
            zb = rows[:, i2]
            edge_ll = np.where(yv == 1, log_p1[za, zb], log_p0[za, zb])
            ll = ll + edge_ll.sum(axis=1)
        parts.append(logsumexp(ll))
    return float(logsumexp(parts))
