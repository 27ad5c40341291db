"""Batch-level estimation by mean-field variational EM.

Maximizes the evidence lower bound

    J(pi, theta, q) = sum_i sum_a q_i(a) (log pi(a) - log q_i(a))
                    + sum_j sum_{a,b} q_{i1(j)}(a) q_{i2(j)}(b) log p_theta(y_j | a, b)

jointly over the model parameters (pi, theta) and the per-agent factorized
posterior q, alternating a coordinate-ascent E-step (Gauss-Seidel sweeps over
agents) with the closed-form M-step. Multiple random restarts guard against
local optima; the chain with the highest final bound wins.

Numerical strategy
------------------
The public :func:`elbo` keeps exact semantics (0*log 0 = 0, with a ``-inf``
sentinel when a boundary theta entry contradicts an observed outcome). The
EM iteration instead ascends a clamped surrogate: theta is clipped to
[1e-6, 1-1e-6] inside log evaluations only, so transient boundary iterates
never produce infinities while reported parameter values stay exact. Iteration
traces record the surrogate, which is the quantity the ascent guarantees to be
non-decreasing.

Plug-in standard errors use the effective pair count per type cell,
``m_hat[a,b] = sum_j q_{i1(j)}(a) q_{i2(j)}(b)`` (pooled with the mirror cell
under the symmetric convention), giving se = sqrt(theta(1-theta)/m_hat).
Cells with effective count below a threshold report theta=0.5 with infinite
standard error so downstream Bayesian updating skips them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .wsbm import (
    NEG_INF,
    OutcomeVector,
    PairingPlan,
    ProductionMatrix,
    TypeDistribution,
    as_rng,
)

_CLAMP = 1e-6


class EstimationError(RuntimeError):
    """Raised when every EM chain fails numerically."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class VariationalPosterior:
    """n×K matrix; row i is agent i's local categorical approximation."""

    q: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.q, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "q", arr)
        if arr.ndim != 2:
            raise ValueError("q must be an n×K matrix")
        if np.any(arr < 0.0):
            raise ValueError("q rows must be nonnegative")
        if arr.size and np.max(np.abs(arr.sum(axis=1) - 1.0)) > 1e-10:
            raise ValueError("each q row must sum to 1 within 1e-10")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def k(self) -> int:
        return self.q.shape[1]


@dataclass(frozen=True)
class EmSettings:
    """Knobs for the EM loop. Defaults are calibrated for desk-scale runs."""

    max_outer_iters: int = 100
    max_estep_sweeps: int = 50
    tol_elbo: float = 1e-7
    tol_q: float = 1e-7
    restarts: int = 10
    min_effective_count: float = 1.0
    symmetric: bool = True

    def __post_init__(self):
        if self.max_outer_iters < 1 or self.max_estep_sweeps < 1:
            raise ValueError("iteration limits must be at least 1")
        if self.tol_elbo <= 0 or self.tol_q <= 0:
            raise ValueError("tolerances must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.min_effective_count < 0:
            raise ValueError("min_effective_count must be nonnegative")


@dataclass(frozen=True)
class BatchEstimate:
    """One batch's variational output plus plug-in standard errors."""

    theta_hat: ProductionMatrix
    pi_hat: TypeDistribution
    q_hat: VariationalPosterior
    se: np.ndarray
    elbo: float
    converged: bool
    restarts_used: int
    flagged: np.ndarray = field(default=None)
    elbo_trace: tuple = ()
    elbo_traces: tuple = ()

    def __post_init__(self):
        se = np.asarray(self.se, dtype=float)
        se.setflags(write=False)
        object.__setattr__(self, "se", se)
        if self.flagged is not None:
            fl = np.asarray(self.flagged, dtype=bool)
            fl.setflags(write=False)
            object.__setattr__(self, "flagged", fl)

    @property
    def k(self) -> int:
        return self.theta_hat.k


# ---------------------------------------------------------------------------
# array-level engine


class _PlanIndex:
    """CSR-style agent incidence over directed edge slots.

    Entry e in [ptr[i], ptr[i+1]) says agent i sits on edge ``edge_of[e]``
    facing ``partner[e]``; ``side[e]`` is 0 when the agent is i1(j) (its type
    indexes the first production axis) and 1 otherwise.
    """

    def __init__(self, plan: PairingPlan):
        self.i1 = np.ascontiguousarray(plan.edges[:, 0])
        self.i2 = np.ascontiguousarray(plan.edges[:, 1])
        self.m = plan.m
        self.n = plan.n
        deg = np.zeros(plan.n + 1, dtype=np.int64)
        for j in range(plan.m):
            deg[self.i1[j] + 1] += 1
            deg[self.i2[j] + 1] += 1
        ptr = np.cumsum(deg)
        edge_of = np.zeros(2 * plan.m, dtype=np.int64)
        partner = np.zeros(2 * plan.m, dtype=np.int64)
        side = np.zeros(2 * plan.m, dtype=np.int64)
        cursor = ptr[:-1].copy()
        for j in range(plan.m):
            a, b = int(self.i1[j]), int(self.i2[j])
            edge_of[cursor[a]] = j
            partner[cursor[a]] = b
            side[cursor[a]] = 0
            cursor[a] += 1
            edge_of[cursor[b]] = j
            partner[cursor[b]] = a
            side[cursor[b]] = 1
            cursor[b] += 1
        self.adjacency = (edge_of, partner, side, ptr)


def _clamped_logs(theta_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = np.clip(theta_values, _CLAMP, 1.0 - _CLAMP)
    return np.log(t), np.log1p(-t)


def _sweeps(
    q: np.ndarray,
    log_pi: np.ndarray,
    theta_values: np.ndarray,
    yv: np.ndarray,
    index: _PlanIndex,
    tol_q: float,
    max_sweeps: int,
) -> np.ndarray:
    """In-place Gauss-Seidel coordinate ascent over agents; returns q."""
    lt1, lt0 = _clamped_logs(theta_values)
    _kernels.sweep(q, log_pi, lt1, lt0, yv, index.adjacency, max_sweeps, tol_q)
    return q


def _m_step_arrays(
    q: np.ndarray, i1: np.ndarray, i2: np.ndarray, yv: np.ndarray, symmetric: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form stationary point: (pi, theta ratios, effective counts)."""
    pi = q.mean(axis=0)
    k = q.shape[1]
    num, den = _kernels.mstep_sums(q, i1, i2, yv)
    if symmetric:
        dn = np.diag(num).copy()
        dd = np.diag(den).copy()
        num = num + num.T
        den = den + den.T
        np.fill_diagonal(num, dn)
        np.fill_diagonal(den, dd)
    theta = np.full((k, k), 0.5)
    np.divide(num, den, out=theta, where=den > 0)
    return pi, theta, den


def _elbo_clamped(
    q: np.ndarray,
    pi: np.ndarray,
    theta_values: np.ndarray,
    yv: np.ndarray,
    i1: np.ndarray,
    i2: np.ndarray,
) -> float:
    """EM surrogate objective: clamped-theta logs, exact 0*log 0 handling."""
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pi = np.log(pi)
        ent = np.where(q > 0.0, q * (log_pi[None, :] - np.log(q)), 0.0).sum()
    lt1, lt0 = _clamped_logs(theta_values)
    edge = _kernels.elbo_edges(q, lt1, lt0, yv, i1, i2)
    return float(ent + edge)


# ---------------------------------------------------------------------------
# public operations


def elbo(
    y: OutcomeVector,
    plan: PairingPlan,
    pi: TypeDistribution,
    theta: ProductionMatrix,
    q: VariationalPosterior,
) -> float:
    """Evidence lower bound at (pi, theta, q), exact semantics.

    Uses the convention 0*log 0 = 0; returns ``-inf`` when positive q-mass
    meets a zero prior probability or a boundary theta entry that contradicts
    an observed outcome.
    """
    if q.n != plan.n or q.k != pi.k or pi.k != theta.k or y.m != plan.m:
        raise ValueError("inconsistent dimensions")
    qv = q.q
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pi = np.log(pi.probs)
        ent_terms = np.where(qv > 0.0, qv * (log_pi[None, :] - np.log(qv)), 0.0)
        total = float(ent_terms.sum())
        if plan.m:
            lt1 = np.log(theta.values)
            lt0 = np.log1p(-theta.values)
            L = np.where(y.outcomes[:, None, None] == 1, lt1[None], lt0[None])
            coeff = qv[plan.edges[:, 0]][:, :, None] * qv[plan.edges[:, 1]][:, None, :]
            total += float(np.where(coeff > 0.0, coeff * L, 0.0).sum())
    if np.isnan(total):
        return NEG_INF
    return total


def e_step(
    y: OutcomeVector,
    plan: PairingPlan,
    pi: TypeDistribution,
    theta: ProductionMatrix,
    q_init: VariationalPosterior,
    settings: EmSettings,
) -> VariationalPosterior:
    """Coordinate-ascent fixed point of the bound in q at fixed (pi, theta).

    Gauss-Seidel sweeps over agents until the maximum row change drops below
    ``tol_q`` or ``max_estep_sweeps`` is reached; the bound never decreases
    across sweeps. An agent with no incident edges converges to pi exactly.
    """
    if q_init.n != plan.n or q_init.k != pi.k or pi.k != theta.k:
        raise ValueError("inconsistent dimensions")
    index = _PlanIndex(plan)
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi.probs)
    if not np.any(np.isfinite(log_pi)):
        raise EstimationError("all prior type probabilities are zero")
    q = q_init.q.copy()
    q = _sweeps(q, log_pi, theta.values, y.outcomes, index, settings.tol_q, settings.max_estep_sweeps)
    if not np.all(np.isfinite(q)):
        raise EstimationError(
            "non-finite q rows after E-step sweeps",
            diagnostics={"bad_rows": np.where(~np.isfinite(q).all(axis=1))[0].tolist()},
        )
    return VariationalPosterior(q=q)


def m_step(
    y: OutcomeVector,
    plan: PairingPlan,
    q: VariationalPosterior,
    symmetric: bool,
    min_effective_count: float = 1.0,
) -> tuple[TypeDistribution, ProductionMatrix]:
    """Closed-form maximizer of the bound over (pi, theta) at fixed q.

    pi is the mean q row; theta is the q-weighted success rate per type cell,
    with mirror cells pooled before dividing when ``symmetric``. Cells whose
    effective count falls below ``min_effective_count`` report 0.5 (the
    uninformative value; their standard error is flagged infinite downstream).
    """
    if q.n != plan.n or y.m != plan.m:
        raise ValueError("inconsistent dimensions")
    pi, theta, den = _m_step_arrays(q.q, plan.edges[:, 0], plan.edges[:, 1], y.outcomes, symmetric)
    theta = np.where(den < min_effective_count, 0.5, theta)
    pi = pi / pi.sum()
    return TypeDistribution(probs=pi), ProductionMatrix(values=theta, symmetric=symmetric)


def effective_counts(plan: PairingPlan, q: VariationalPosterior, symmetric: bool) -> np.ndarray:
    """q-weighted edge count attributed to each type cell (K×K)."""
    _, _, den = _m_step_arrays(q.q, plan.edges[:, 0], plan.edges[:, 1], np.zeros(plan.m), symmetric)
    return den


def standard_errors(
    theta_hat: ProductionMatrix,
    q_hat: VariationalPosterior,
    plan: PairingPlan,
    min_effective_count: float,
) -> np.ndarray:
    """Plug-in standard errors sqrt(theta(1-theta)/m_hat) per type cell.

    Cells with effective count below ``min_effective_count`` or a boundary
    theta value report +inf (no usable information).
    """
    den = effective_counts(plan, q_hat, theta_hat.symmetric)
    t = theta_hat.values
    usable = (den >= min_effective_count) & (den > 0) & (t > 0.0) & (t < 1.0)
    se = np.full_like(t, np.inf)
    se[usable] = np.sqrt(t[usable] * (1.0 - t[usable]) / den[usable])
    return se


def fit(
    y: OutcomeVector,
    plan: PairingPlan,
    k: int,
    settings: EmSettings,
    seed,
    q_init: np.ndarray | None = None,
) -> BatchEstimate:
    """Variational EM with random restarts; returns the best chain.

    Each of ``settings.restarts`` chains starts from an independent random q
    (rows are normalized positive uniforms, drawn from a per-chain RNG
    substream) and alternates E and M steps until the surrogate bound improves
    by less than ``tol_elbo`` or ``max_outer_iters`` is hit. The chain with
    the highest final bound wins; ties break to the lowest chain index.
    ``q_init`` optionally pins chain 0's starting point.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    n, m = plan.n, plan.m
    yv = y.outcomes
    if yv.size != m:
        raise ValueError("outcomes and plan disagree on edge count")
    index = _PlanIndex(plan)
    i1, i2 = index.i1, index.i2

    # One independent substream per restart chain, derived from the input seed.
    rng = as_rng(seed)
    chain_seeds = rng.integers(0, 2**63 - 1, size=settings.restarts)

    results = []
    traces = []
    for c in range(settings.restarts):
        crng = np.random.default_rng(int(chain_seeds[c]))
        if c == 0 and q_init is not None:
            q = np.array(q_init, dtype=float, copy=True)
            if q.shape != (n, k):
                raise ValueError("q_init has the wrong shape")
        else:
            q = crng.uniform(size=(n, k))
            q /= q.sum(axis=1, keepdims=True)
        pi, theta, den = _m_step_arrays(q, i1, i2, yv, settings.symmetric)
        with np.errstate(divide="ignore"):
            log_pi = np.log(pi)
        trace = [_elbo_clamped(q, pi, theta, yv, i1, i2)]
        converged = False
        for _ in range(settings.max_outer_iters):
            q = _sweeps(q, log_pi, theta, yv, index, settings.tol_q, settings.max_estep_sweeps)
            pi, theta, den = _m_step_arrays(q, i1, i2, yv, settings.symmetric)
            with np.errstate(divide="ignore"):
                log_pi = np.log(pi)
            j_now = _elbo_clamped(q, pi, theta, yv, i1, i2)
            trace.append(j_now)
            if not np.isfinite(j_now):
                break
            if j_now - trace[-2] < settings.tol_elbo:
                converged = True
                break
        traces.append(tuple(trace))
        if np.isfinite(trace[-1]) and np.all(np.isfinite(q)):
            results.append((trace[-1], c, q, pi, theta, den, converged, tuple(trace)))

    if not results:
        raise EstimationError(
            "all EM chains diverged numerically",
            diagnostics={"final_elbos": [t[-1] for t in traces]},
        )
    best = max(results, key=lambda r: (r[0], -r[1]))
    _, _, q, pi, theta, den, converged, trace = best

    flagged = den < settings.min_effective_count
    theta_rep = np.where(flagged, 0.5, theta)
    theta_hat = ProductionMatrix(values=theta_rep, symmetric=settings.symmetric)
    pi_hat = TypeDistribution(probs=pi / pi.sum())
    q_hat = VariationalPosterior(q=q)
    se = standard_errors(theta_hat, q_hat, plan, settings.min_effective_count)
    return BatchEstimate(
        theta_hat=theta_hat,
        pi_hat=pi_hat,
        q_hat=q_hat,
        se=se,
        elbo=elbo(y, plan, pi_hat, theta_hat, q_hat),
        converged=converged,
        restarts_used=settings.restarts,
        flagged=flagged,
        elbo_trace=trace,
        elbo_traces=tuple(traces),
    )
