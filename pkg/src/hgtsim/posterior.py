"""Cross-batch belief aggregation.

Each batch emits a Gaussian signal per production-matrix cell (the variational
estimate with its standard error) and a categorical signal per agent (the
local variational row). Beliefs update conjugately: precision-weighted
Gaussian combination per cell, elementwise product with renormalization per
agent. Uninformative Gaussian priors are represented exactly as precision
zero (infinite variance), so the first finite-precision signal passes through
unchanged.

Batch estimates are identified only up to a relabeling of the latent types, so
before updating, each estimate is aligned to the running posterior by the
permutation minimizing the precision-weighted squared distance between the
estimated and believed production cells.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .variational import BatchEstimate, VariationalPosterior
from .wsbm import ProductionMatrix, TypeDistribution, TypeVector

logger = logging.getLogger(__name__)

STATE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GaussianBelief:
    """Mean/variance pair; variance=inf marks the uninformative (zero-precision) case."""

    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0.0:
            raise ValueError("variance must be positive (inf = uninformative)")

    @property
    def informative(self) -> bool:
        return math.isfinite(self.variance)

    @classmethod
    def uninformative(cls) -> "GaussianBelief":
        return cls(mean=0.0, variance=math.inf)


@dataclass(frozen=True)
class LabelPermutation:
    """Bijection on type labels; ``perm[new_label] = old_label`` (0-based)."""

    perm: tuple

    def __post_init__(self):
        if sorted(self.perm) != list(range(len(self.perm))):
            raise ValueError(f"not a permutation: {self.perm}")

    @property
    def is_identity(self) -> bool:
        return self.perm == tuple(range(len(self.perm)))


@dataclass(frozen=True)
class PosteriorState:
    """Running beliefs: Gaussian per production cell, categorical per agent.

    Stored struct-of-arrays: ``theta_mean``/``theta_var`` are K×K (var=inf =
    uninformative cell, mean then carries no meaning), ``type_beliefs`` is
    n×K with rows summing to one. States are values; updates return new ones.
    """

    theta_mean: np.ndarray
    theta_var: np.ndarray
    type_beliefs: np.ndarray
    batch_index: int = 0

    def __post_init__(self):
        tm = np.asarray(self.theta_mean, dtype=float)
        tv = np.asarray(self.theta_var, dtype=float)
        tb = np.asarray(self.type_beliefs, dtype=float)
        for arr in (tm, tv, tb):
            arr.setflags(write=False)
        object.__setattr__(self, "theta_mean", tm)
        object.__setattr__(self, "theta_var", tv)
        object.__setattr__(self, "type_beliefs", tb)
        if tm.shape != tv.shape or tm.ndim != 2 or tm.shape[0] != tm.shape[1]:
            raise ValueError("theta belief arrays must be matching K×K matrices")
        if np.any(tv <= 0.0):
            raise ValueError("theta variances must be positive (inf = uninformative)")
        if tb.ndim != 2 or tb.shape[1] != tm.shape[0]:
            raise ValueError("type_beliefs must be n×K")
        if np.any(tb < 0.0) or (tb.size and np.max(np.abs(tb.sum(axis=1) - 1.0)) > 1e-10):
            raise ValueError("type belief rows must be distributions (sum 1 within 1e-10)")

    @property
    def n(self) -> int:
        return self.type_beliefs.shape[0]

    @property
    def k(self) -> int:
        return self.theta_mean.shape[0]

    def theta_belief(self, a: int, b: int) -> GaussianBelief:
        return GaussianBelief(mean=float(self.theta_mean[a, b]), variance=float(self.theta_var[a, b]))


def uninformative_state(n: int, k: int) -> PosteriorState:
    """Cold-start beliefs: zero precision on every cell, uniform type rows."""
    return PosteriorState(
        theta_mean=np.zeros((k, k)),
        theta_var=np.full((k, k), math.inf),
        type_beliefs=np.full((n, k), 1.0 / k),
        batch_index=0,
    )


def update_gaussian(prior: GaussianBelief, signal_mean: float, signal_se: float) -> GaussianBelief:
    """Conjugate Gaussian update; precision-weighted combination.

    An infinite signal standard error returns the prior unchanged; an
    uninformative prior passes the signal through exactly. Both uninformative
    yields the uninformative belief (documented, not an error).
    """
    if not signal_se > 0.0:
        raise ValueError("signal_se must be positive (inf = no signal)")
    if math.isinf(signal_se):
        return prior
    if not prior.informative:
        return GaussianBelief(mean=float(signal_mean), variance=float(signal_se) ** 2)
    prior_prec = 1.0 / prior.variance
    signal_prec = 1.0 / (signal_se * signal_se)
    post_prec = prior_prec + signal_prec
    mean = (prior.mean * prior_prec + signal_mean * signal_prec) / post_prec
    return GaussianBelief(mean=float(mean), variance=1.0 / post_prec)


def update_categorical(prior_row: np.ndarray, signal_row: np.ndarray) -> np.ndarray:
    """Elementwise product of prior and signal, renormalized.

    An identically-zero product (disjoint hard supports, an upstream
    degeneracy) returns the prior unchanged with a logged warning.
    """
    prior_row = np.asarray(prior_row, dtype=float)
    signal_row = np.asarray(signal_row, dtype=float)
    for row in (prior_row, signal_row):
        if row.ndim != 1 or np.any(row < 0) or abs(row.sum() - 1.0) > 1e-10:
            raise ValueError("rows must be probability distributions")
    product = prior_row * signal_row
    total = product.sum()
    if total <= 0.0:
        logger.warning("categorical update with disjoint supports; keeping prior")
        return prior_row.copy()
    return product / total


def align_labels(estimate: BatchEstimate, state: PosteriorState) -> tuple[BatchEstimate, LabelPermutation]:
    """Relabel a batch estimate onto the running posterior's label frame.

    Primary criterion: maximize the agent-belief overlap
    sum_i sum_a omega_i(a) q_i(s(a)) over permutations s. Ties break by
    minimizing the precision-weighted production distance
    sum_{a,b} w_ab (theta_hat[s(a), s(b)] - mean[a, b])^2 (w_ab = prior
    precision, zero for uninformative cells), then lexicographically, so an
    all-uninformative state yields the identity.

    Overlap leads because it stays meaningful even when one batch's
    production estimate degenerates: agent-level beliefs carry the labeling
    across batches, whereas a garbage theta estimate can drag the
    distance criterion onto the wrong frame and corrupt every later update.
    """
    k = estimate.k
    if k != state.k:
        raise ValueError("estimate and state disagree on K")
    if k > 8:
        raise ValueError("label alignment enumerates permutations; K must be <= 8")
    weights = np.where(np.isfinite(state.theta_var), 1.0 / state.theta_var, 0.0)
    theta = estimate.theta_hat.values
    qv = estimate.q_hat.q
    omega = state.type_beliefs

    tol = 1e-12
    best_cost = math.inf
    best_overlap = -math.inf
    best_perm: tuple | None = None
    # permutations() is lexicographic, so keeping the incumbent on full ties
    # implements the final lexicographic tie-break
    for perm in itertools.permutations(range(k)):
        p = list(perm)
        cost = float((weights * (theta[np.ix_(p, p)] - state.theta_mean) ** 2).sum())
        overlap = float((omega * qv[:, p]).sum())
        if overlap > best_overlap + tol:
            best_cost, best_overlap, best_perm = cost, overlap, perm
        elif overlap >= best_overlap - tol and cost < best_cost - tol:
            best_cost, best_overlap, best_perm = cost, max(overlap, best_overlap), perm
    perm = LabelPermutation(perm=best_perm)
    return apply_permutation(estimate, perm), perm


def apply_permutation(estimate: BatchEstimate, perm: LabelPermutation) -> BatchEstimate:
    """Jointly relabel theta, pi, se, flags, and all q rows of an estimate."""
    p = list(perm.perm)
    theta = ProductionMatrix(
        values=estimate.theta_hat.values[np.ix_(p, p)],
        symmetric=estimate.theta_hat.symmetric,
    )
    pi = TypeDistribution(probs=estimate.pi_hat.probs[p])
    q = VariationalPosterior(q=estimate.q_hat.q[:, p])
    se = estimate.se[np.ix_(p, p)]
    flagged = estimate.flagged[np.ix_(p, p)] if estimate.flagged is not None else None
    return replace(estimate, theta_hat=theta, pi_hat=pi, q_hat=q, se=se, flagged=flagged)


def map_types(state: PosteriorState) -> TypeVector:
    """Per-agent argmax of the categorical posterior; ties go to the lowest type."""
    return TypeVector(types=np.argmax(state.type_beliefs, axis=1), k=state.k)


def reset_agent(state: PosteriorState, agent: int) -> PosteriorState:
    """Reset one agent's type belief to uniform; production beliefs untouched."""
    if not 0 <= agent < state.n:
        raise IndexError(f"agent index {agent} out of range")
    tb = state.type_beliefs.copy()
    tb[agent] = 1.0 / state.k
    return replace(state, type_beliefs=tb)


def absorb_batch(state: PosteriorState, aligned: BatchEstimate) -> PosteriorState:
    """Fold one aligned batch estimate into the running beliefs.

    Production cells with an infinite standard error are skipped; every
    agent's type row is multiplied by its local variational row.
    """
    k = state.k
    mean = state.theta_mean.copy()
    var = state.theta_var.copy()
    for a in range(k):
        for b in range(k):
            belief = update_gaussian(
                state.theta_belief(a, b),
                float(aligned.theta_hat.values[a, b]),
                float(aligned.se[a, b]),
            )
            mean[a, b] = belief.mean
            var[a, b] = belief.variance
    tb = np.empty_like(state.type_beliefs)
    for i in range(state.n):
        tb[i] = update_categorical(state.type_beliefs[i], aligned.q_hat.q[i])
    return PosteriorState(
        theta_mean=mean, theta_var=var, type_beliefs=tb, batch_index=state.batch_index + 1
    )


# ---------------------------------------------------------------------------
# checkpoint schema


def state_to_dict(state: PosteriorState) -> dict:
    """JSON-ready form; uninformative cells carry explicit null mean/variance."""
    k = state.k
    mean_rows = []
    var_rows = []
    for a in range(k):
        mean_rows.append(
            [float(state.theta_mean[a, b]) if math.isfinite(state.theta_var[a, b]) else None for b in range(k)]
        )
        var_rows.append(
            [float(state.theta_var[a, b]) if math.isfinite(state.theta_var[a, b]) else None for b in range(k)]
        )
    return {
        "schema_version": STATE_SCHEMA_VERSION,
        "batch_index": state.batch_index,
        "theta_mean": mean_rows,
        "theta_variance": var_rows,
        "type_beliefs": [[float(x) for x in row] for row in state.type_beliefs],
    }


def state_from_dict(data: dict) -> PosteriorState:
    if data.get("schema_version") != STATE_SCHEMA_VERSION:
        raise ValueError(f"unsupported posterior state schema: {data.get('schema_version')!r}")
    var = np.array(
        [[math.inf if v is None else float(v) for v in row] for row in data["theta_variance"]]
    )
    mean = np.array(
        [[0.0 if v is None else float(v) for v in row] for row in data["theta_mean"]]
    )
    return PosteriorState(
        theta_mean=mean,
        theta_var=var,
        type_beliefs=np.array(data["type_beliefs"], dtype=float),
        batch_index=int(data["batch_index"]),
    )


def state_to_json(state: PosteriorState) -> str:
    return json.dumps(state_to_dict(state), sort_keys=True)


def state_from_json(text: str) -> PosteriorState:
    return state_from_dict(json.loads(text))
