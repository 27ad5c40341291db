"""Constrained maximum-weight pairing.

Chooses exactly m edges over n agents to maximize total expected output, where
an edge's expected output depends on the endpoint types only, subject to:

- per-agent degree ("workload") bounds [d_low, d_high], and
- optional per-type-cell count ("clipping") bounds keeping every cell sampled.

Because weights are functions of the type pair alone, the agent-level problem
decomposes exactly: an integer program over the <= K(K+1)/2 unordered
type-cell counts, followed by a lossless realization of cell counts into a
simple graph with per-agent degrees inside the workload window.

Numerical strategy
------------------
The cell-count IP is solved exactly by depth-first branch-and-bound with
best-bound pruning over an LP relaxation; the LP solver is a dense two-phase
tableau simplex with Bland's rule (problem sizes are tiny, so robustness
beats speed). Weights are normalized by their largest magnitude on entry,
making every pivot and pruning decision invariant to positive rescaling.

Realization distributes each cell's endpoint slots across that type's agents
as evenly as possible (rotating the remainder across cells so per-agent
totals stay near-even, hence inside the workload window), then constructs
each cell's simple graph by Havel-Hakimi (within-type) or Gale-Ryser greedy
(cross-type). Near-even quota sequences are always graphical under the cell
capacity bounds, so realization never fails on a valid allocation.

Weight matrices are treated as unordered-pair weights: the solver symmetrizes
(W + W^T)/2, since an index-ordered objective is ill-defined once edge
realization picks agent order arbitrarily.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .wsbm import PairingPlan, TypeVector, as_rng

logger = logging.getLogger(__name__)

_EPS = 1e-9
_INT_TOL = 1e-6

#: Enumeration budget for the brute-force oracle.
BRUTEFORCE_COMBO_LIMIT = 5_000_000


class InfeasibleError(Exception):
    """Constraint system admits no feasible assignment; names the violated bound."""

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


@dataclass(frozen=True)
class MatchConstraints:
    """Edge budget plus workload and clipping restrictions."""

    m: int
    d_low: int = 0
    d_high: int = 10**9
    clipping_rate: float | None = None
    workload_enabled: bool = False

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be nonnegative")
        if self.workload_enabled:
            if self.d_low < 0 or self.d_low > self.d_high:
                raise ValueError("workload bounds must satisfy 0 <= d_low <= d_high")
        if self.clipping_rate is not None and not (0.0 <= self.clipping_rate < 0.5):
            raise ValueError("clipping rate must lie in [0, 0.5) or be disabled")


@dataclass(frozen=True)
class TypeAllocation:
    """Integer edge counts per unordered type cell (entries below diagonal zero)."""

    counts: np.ndarray
    lp_bound: float = math.nan

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("counts must be a K×K matrix")
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        if np.any(np.tril(c, -1) != 0):
            raise ValueError("counts live on unordered cells: below-diagonal must be zero")

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def endpoints(self) -> np.ndarray:
        """Endpoint slots per type: 2*c_aa + sum of off-diagonal incident counts."""
        c = self.counts
        return np.diag(c) * 2 + (c.sum(axis=0) + c.sum(axis=1) - 2 * np.diag(c))


@dataclass(frozen=True)
class MatchResult:
    plan: PairingPlan
    allocation: TypeAllocation
    objective: float
    optimality: str = "exact"


# ---------------------------------------------------------------------------
# dense two-phase simplex (Bland's rule)


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for r in range(tab.shape[0]):
        if r != row and tab[r, col] != 0.0:
            tab[r] -= tab[r, col] * tab[row]
    basis[row] = col


def _simplex_iterate(tab: np.ndarray, basis: np.ndarray, ncols: int) -> bool:
    """Run Bland-rule pivots until optimal; returns False on unboundedness.

    The objective row is tab[-1], stored so that entry j > 0 means column j
    improves the maximization objective.
    """
    nrows = tab.shape[0] - 1
    while True:
        col = -1
        for j in range(ncols):
            if tab[-1, j] > _EPS:
                col = j
                break
        if col < 0:
            return True
        row = -1
        best = math.inf
        for i in range(nrows):
            a = tab[i, col]
            if a > _EPS:
                ratio = tab[i, -1] / a
                if ratio < best - _EPS or (ratio < best + _EPS and (row < 0 or basis[i] < basis[row])):
                    best = ratio
                    row = i
        if row < 0:
            return False
        _pivot(tab, basis, row, col)


def _lp_solve(c: np.ndarray, rows: list[tuple[np.ndarray, str, float]]) -> tuple[str, np.ndarray, float]:
    """Maximize c·x subject to the given (coeffs, sense, rhs) rows and x >= 0.

    Returns (status, x, objective) with status in {"optimal", "infeasible",
    "unbounded"}.
    """
    nvar = len(c)
    nrows = len(rows)
    norm = []
    for a, sense, b in rows:
        a = np.asarray(a, dtype=float)
        if b < 0:
            a, b = -a, -b
            sense = {"<=": ">=", ">=": "<=", "==": "=="}[sense]
        norm.append((a, sense, float(b)))

    n_slack = sum(1 for _, s, _ in norm if s in ("<=", ">="))
    n_art = sum(1 for _, s, _ in norm if s in (">=", "=="))
    ncols = nvar + n_slack + n_art
    tab = np.zeros((nrows + 1, ncols + 1))
    basis = np.full(nrows, -1, dtype=int)
    art_cols = []
    s_at = nvar
    a_at = nvar + n_slack
    for i, (a, sense, b) in enumerate(norm):
        tab[i, :nvar] = a
        tab[i, -1] = b
        if sense == "<=":
            tab[i, s_at] = 1.0
            basis[i] = s_at
            s_at += 1
        elif sense == ">=":
            tab[i, s_at] = -1.0
            s_at += 1
            tab[i, a_at] = 1.0
            basis[i] = a_at
            art_cols.append(a_at)
            a_at += 1
        else:
            tab[i, a_at] = 1.0
            basis[i] = a_at
            art_cols.append(a_at)
            a_at += 1

    if art_cols:
        # Phase 1: maximize -(sum of artificials)
        for j in art_cols:
            tab[-1, j] = -1.0
        for i in range(nrows):
            if basis[i] in art_cols:
                tab[-1] += tab[i]
        if not _simplex_iterate(tab, basis, ncols):
            return "infeasible", np.zeros(nvar), math.nan
        # rhs of the objective row equals the artificial mass still in play
        if tab[-1, -1] > 1e-7:
            return "infeasible", np.zeros(nvar), math.nan
        # Drive any residual artificials out of the basis; drop redundant rows.
        art_set = set(art_cols)
        for i in range(nrows):
            if basis[i] in art_set:
                piv = -1
                for j in range(nvar + n_slack):
                    if abs(tab[i, j]) > _EPS:
                        piv = j
                        break
                if piv >= 0:
                    _pivot(tab, basis, i, piv)
                else:
                    tab[i, :] = 0.0  # redundant constraint
        for j in art_cols:
            tab[:, j] = 0.0

    # Phase 2 objective: reduced costs of the true objective at current basis.
    tab[-1, :] = 0.0
    tab[-1, :nvar] = c
    for i in range(nrows):
        bj = basis[i]
        if 0 <= bj < ncols and tab[-1, bj] != 0.0:
            tab[-1] -= tab[-1, bj] * tab[i]
    if not _simplex_iterate(tab, basis, ncols):
        return "unbounded", np.zeros(nvar), math.inf
    x = np.zeros(nvar)
    for i in range(nrows):
        if 0 <= basis[i] < nvar:
            x[basis[i]] = tab[i, -1]
    return "optimal", x, float(np.dot(c, x))


# ---------------------------------------------------------------------------
# type-level integer allocation


def _pair_list(k: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(k) for b in range(a, k)]


def _capacities(type_counts: np.ndarray) -> dict[tuple[int, int], int]:
    caps = {}
    for a, b in _pair_list(len(type_counts)):
        na, nb = int(type_counts[a]), int(type_counts[b])
        caps[(a, b)] = na * (na - 1) // 2 if a == b else na * nb
    return caps


def _cell_bounds(
    type_counts: np.ndarray, constraints: MatchConstraints
) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int]]]:
    """Per-cell integer [lb, ub] from capacity and (relaxed) clipping."""
    pairs = _pair_list(len(type_counts))
    caps = _capacities(type_counts)
    ub = np.array([caps[p] for p in pairs], dtype=np.int64)
    lb = np.zeros(len(pairs), dtype=np.int64)
    if constraints.clipping_rate is not None:
        clip_lb = math.ceil(constraints.m * constraints.clipping_rate)
        clip_ub = math.floor(constraints.m * (1.0 - constraints.clipping_rate))
        ub = np.minimum(ub, clip_ub)
        for idx, p in enumerate(pairs):
            if clip_lb > caps[p]:
                logger.warning(
                    "clipping lower bound %d exceeds capacity %d of cell %s; relaxed to capacity",
                    clip_lb, caps[p], p,
                )
                lb[idx] = caps[p]
            else:
                lb[idx] = clip_lb
    return lb, ub, pairs


def _endpoint_rows(
    pairs: list[tuple[int, int]], type_counts: np.ndarray, constraints: MatchConstraints
) -> list[tuple[np.ndarray, str, float]]:
    rows = []
    if not constraints.workload_enabled:
        return rows
    k = len(type_counts)
    for t in range(k):
        coef = np.zeros(len(pairs))
        for idx, (a, b) in enumerate(pairs):
            if a == t and b == t:
                coef[idx] = 2.0
            elif a == t or b == t:
                coef[idx] = 1.0
        n_t = int(type_counts[t])
        rows.append((coef, ">=", float(n_t * constraints.d_low)))
        rows.append((coef, "<=", float(n_t * constraints.d_high)))
    return rows


def _diagnose_infeasibility(
    lb: np.ndarray, ub: np.ndarray, pairs, type_counts, constraints
) -> InfeasibleError:
    m = constraints.m
    if int(ub.sum()) < m:
        return InfeasibleError(
            f"edge budget m={m} exceeds total cell capacity {int(ub.sum())}",
            details={"bound": "capacity", "total_capacity": int(ub.sum()), "m": m},
        )
    if int(lb.sum()) > m:
        return InfeasibleError(
            f"clipping lower bounds sum to {int(lb.sum())} > m={m}",
            details={"bound": "clipping", "lower_sum": int(lb.sum()), "m": m},
        )
    if constraints.workload_enabled:
        n = int(np.sum(type_counts))
        if n * constraints.d_low > 2 * m:
            return InfeasibleError(
                f"aggregate workload lower bound {n}*{constraints.d_low} exceeds endpoint budget {2 * m}",
                details={"bound": "workload_low"},
            )
        if n * constraints.d_high < 2 * m:
            return InfeasibleError(
                f"aggregate workload upper bound {n}*{constraints.d_high} is below endpoint budget {2 * m}",
                details={"bound": "workload_high"},
            )
        for t, n_t in enumerate(type_counts):
            reach = sum(
                (2 if (a == t and b == t) else 1) * int(ub[idx])
                for idx, (a, b) in enumerate(pairs)
                if t in (a, b)
            )
            if n_t * constraints.d_low > reach:
                return InfeasibleError(
                    f"type {t + 1} cannot reach its workload lower bound "
                    f"({n_t}*{constraints.d_low} > attainable {reach})",
                    details={"bound": "workload_type", "type": t + 1},
                )
    return InfeasibleError(
        "no feasible integer allocation under the given bounds",
        details={"bound": "unknown"},
    )


def solve_type_allocation(
    weights: np.ndarray, type_counts: np.ndarray, constraints: MatchConstraints
) -> TypeAllocation:
    """Exact maximum-weight integer cell allocation via branch-and-bound.

    Maximizes sum_p c_p * w_p over integer cell counts satisfying the edge
    budget, cell capacities, workload endpoint windows, and clipping bounds.
    Branches on the most fractional LP variable (ties to the lowest pair
    index), depth-first, pruning nodes whose LP bound cannot beat the
    incumbent. Deterministic.
    """
    type_counts = np.asarray(type_counts, dtype=np.int64)
    k = len(type_counts)
    w = np.asarray(weights, dtype=float)
    if w.shape != (k, k):
        raise ValueError("weights must be K×K with K = len(type_counts)")
    w = 0.5 * (w + w.T)
    lb0, ub0, pairs = _cell_bounds(type_counts, constraints)
    wvec = np.array([w[a, b] for a, b in pairs])
    scale = float(np.max(np.abs(wvec))) or 1.0
    wnorm = wvec / scale
    base_rows = _endpoint_rows(pairs, type_counts, constraints)
    m = constraints.m

    def lp(lb: np.ndarray, ub: np.ndarray) -> tuple[str, np.ndarray, float]:
        # shifted variables x' = x - lb, so all lower bounds sit at the origin
        slack = ub - lb
        if np.any(slack < 0) or int(lb.sum()) > m:
            return "infeasible", lb.astype(float), math.nan
        rows: list[tuple[np.ndarray, str, float]] = [
            (np.ones(len(pairs)), "==", float(m - lb.sum()))
        ]
        for idx in range(len(pairs)):
            e = np.zeros(len(pairs))
            e[idx] = 1.0
            rows.append((e, "<=", float(slack[idx])))
        for coef, sense, rhs in base_rows:
            rows.append((coef, sense, rhs - float(np.dot(coef, lb))))
        status, xs, obj = _lp_solve(wnorm, rows)
        if status != "optimal":
            return status, lb.astype(float), math.nan
        return "optimal", xs + lb, obj + float(np.dot(wnorm, lb))

    def exact_feasible(x: np.ndarray) -> bool:
        if int(x.sum()) != m or np.any(x < lb0) or np.any(x > ub0):
            return False
        if constraints.workload_enabled:
            for coef, sense, rhs in base_rows:
                v = float(np.dot(coef, x))
                if sense == ">=" and v < rhs - 1e-9:
                    return False
                if sense == "<=" and v > rhs + 1e-9:
                    return False
        return True

    best_obj = -math.inf
    best_x: np.ndarray | None = None
    root_bound = math.nan
    stack = [(lb0.copy(), ub0.copy())]
    first = True
    while stack:
        lb, ub = stack.pop()
        status, x, bound = lp(lb, ub)
        if first:
            root_bound = bound if status == "optimal" else math.nan
            first = False
        if status != "optimal" or bound <= best_obj + _EPS:
            continue
        frac = np.abs(x - np.round(x))
        if np.all(frac <= _INT_TOL):
            xi = np.round(x).astype(np.int64)
            if exact_feasible(xi):
                obj = float(np.dot(wnorm, xi))
                if obj > best_obj + 1e-12:
                    best_obj = obj
                    best_x = xi
                continue
            # defensive path (an integral LP point always validates with the
            # integer-coefficient constraints): bisect the widest-open box
            cand = [idx for idx in range(len(pairs)) if lb[idx] < ub[idx]]
            if not cand:
                continue
            j = cand[0]
            lo = (int(lb[j]) + int(ub[j])) // 2
        else:
            # most fractional variable; ties to the lowest pair index
            dist = np.abs(frac - 0.5)
            dist[frac <= _INT_TOL] = math.inf
            j = int(np.argmin(dist))
            lo = math.floor(x[j] + _INT_TOL)
        lb_up = lb.copy()
        lb_up[j] = lo + 1
        ub_dn = ub.copy()
        ub_dn[j] = lo
        stack.append((lb, ub_dn))
        stack.append((lb_up, ub))  # explore the round-up branch first

    if best_x is None:
        raise _diagnose_infeasibility(lb0, ub0, pairs, type_counts, constraints)
    counts = np.zeros((k, k), dtype=np.int64)
    for idx, (a, b) in enumerate(pairs):
        counts[a, b] = best_x[idx]
    return TypeAllocation(counts=counts, lp_bound=root_bound * scale)


# ---------------------------------------------------------------------------
# agent-level realization


def _havel_hakimi(degrees: list[int]) -> list[tuple[int, int]]:
    """Simple graph on positions 0..n-1 with the given degree sequence."""
    n = len(degrees)
    remaining = list(degrees)
    edges: list[tuple[int, int]] = []
    for _ in range(sum(degrees) // 2 + 1):
        order = sorted(range(n), key=lambda v: (-remaining[v], v))
        v = order[0]
        d = remaining[v]
        if d == 0:
            break
        targets = [u for u in order[1:] if remaining[u] > 0][:d]
        if len(targets) < d:
            raise InfeasibleError("degree sequence not graphical within the cell")
        for u in targets:
            remaining[u] -= 1
            edges.append((v, u) if v < u else (u, v))
        remaining[v] = 0
    if any(remaining):
        raise InfeasibleError("degree sequence not graphical within the cell")
    return edges


def _gale_ryser(qa: list[int], qb: list[int]) -> list[tuple[int, int]]:
    """Simple bipartite graph with side degrees qa, qb; returns (posA, posB)."""
    ra = list(qa)
    rb = list(qb)
    edges: list[tuple[int, int]] = []
    while True:
        v = max(range(len(ra)), key=lambda i: (ra[i], -i))
        d = ra[v]
        if d == 0:
            break
        order = sorted(range(len(rb)), key=lambda u: (-rb[u], u))
        targets = [u for u in order if rb[u] > 0][:d]
        if len(targets) < d:
            raise InfeasibleError("bipartite degree sequence not graphical within the cell")
        for u in targets:
            rb[u] -= 1
            edges.append((v, u))
        ra[v] = 0
    if any(rb):
        raise InfeasibleError("bipartite degree sequence not graphical within the cell")
    return edges


def _even_quotas(slots: int, n: int, offset: int) -> tuple[list[int], int]:
    """Spread ``slots`` over n positions (difference <= 1), rotating extras."""
    base, extra = divmod(slots, n)
    quotas = [base] * n
    for t in range(extra):
        quotas[(offset + t) % n] += 1
    return quotas, (offset + extra) % n


def realize_edges(
    allocation: TypeAllocation, z: TypeVector, constraints: MatchConstraints, seed
) -> PairingPlan:
    """Turn cell counts into a concrete simple-graph edge list.

    Endpoint slots of each cell are spread across that type's agents as
    evenly as possible, with the remainder rotated across cells so per-agent
    totals stay near-even (hence inside [d_low, d_high] whenever the
    allocation's endpoint windows hold). The seed shuffles agent order within
    each type; the construction itself is deterministic given the shuffle.
    """
    k = allocation.k
    if z.k != k:
        raise ValueError("allocation and type vector disagree on K")
    rng = as_rng(seed)
    counts = allocation.counts
    type_counts = z.counts()
    caps = _capacities(type_counts)
    for a, b in _pair_list(k):
        if counts[a, b] > caps[(a, b)]:
            raise InfeasibleError(
                f"allocation count {int(counts[a, b])} exceeds capacity {caps[(a, b)]} of cell ({a + 1},{b + 1})"
            )
    if constraints.workload_enabled:
        ep = allocation.endpoints()
        for a in range(k):
            n_a = int(type_counts[a])
            if not n_a * constraints.d_low <= ep[a] <= n_a * constraints.d_high:
                raise InfeasibleError(
                    f"allocation endpoints {int(ep[a])} for type {a + 1} violate the "
                    f"workload window [{n_a * constraints.d_low}, {n_a * constraints.d_high}]"
                )
    members = {a: rng.permutation(np.where(z.types == a)[0]) for a in range(k)}

    # Per-type per-cell quotas with rotating remainders.
    offsets = [0] * k
    quotas: dict[tuple[int, int], dict[int, list[int]]] = {}
    for a, b in _pair_list(k):
        c = int(counts[a, b])
        cell: dict[int, list[int]] = {}
        if c > 0:
            if a == b:
                cell[a], offsets[a] = _even_quotas(2 * c, len(members[a]), offsets[a])
            else:
                cell[a], offsets[a] = _even_quotas(c, len(members[a]), offsets[a])
                cell[b], offsets[b] = _even_quotas(c, len(members[b]), offsets[b])
        quotas[(a, b)] = cell

    out = []
    for a, b in _pair_list(k):
        if int(counts[a, b]) == 0:
            continue
        if a == b:
            for p1, p2 in _havel_hakimi(quotas[(a, b)][a]):
                u, v = int(members[a][p1]), int(members[a][p2])
                out.append((u, v) if u < v else (v, u))
        else:
            for pa, pb in _gale_ryser(quotas[(a, b)][a], quotas[(a, b)][b]):
                u, v = int(members[a][pa]), int(members[b][pb])
                out.append((u, v) if u < v else (v, u))
    out.sort()
    edges = np.array(out, dtype=np.int64).reshape(-1, 2)
    return PairingPlan(edges=edges, n=z.n)


def _cell_objective(counts: np.ndarray, w_sym: np.ndarray) -> float:
    k = counts.shape[0]
    return math.fsum(float(counts[a, b]) * float(w_sym[a, b]) for a, b in _pair_list(k))


def solve_matching(
    weights: np.ndarray, z: TypeVector, constraints: MatchConstraints, seed
) -> MatchResult:
    """Type-level exact allocation followed by lossless edge realization."""
    w = np.asarray(weights, dtype=float)
    w_sym = 0.5 * (w + w.T)
    allocation = solve_type_allocation(w, z.counts(), constraints)
    plan = realize_edges(allocation, z, constraints, seed)
    objective = _cell_objective(allocation.counts, w_sym)
    return MatchResult(plan=plan, allocation=allocation, objective=objective, optimality="exact")


def bruteforce_matching(
    weights: np.ndarray, z: TypeVector, constraints: MatchConstraints
) -> MatchResult:
    """Exhaustive oracle: enumerate all m-edge subsets meeting the constraints.

    Deterministic (lexicographically first among objective ties). Guarded by
    an enumeration budget; intended for test-scale instances only.
    """
    n = z.n
    if n > 12:
        raise ValueError("brute force limited to n <= 12")
    w = np.asarray(weights, dtype=float)
    w_sym = 0.5 * (w + w.T)
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m = constraints.m
    if m > len(all_pairs):
        raise InfeasibleError(f"edge budget m={m} exceeds {len(all_pairs)} available pairs")
    if math.comb(len(all_pairs), m) > BRUTEFORCE_COMBO_LIMIT:
        raise ValueError("instance too large for brute-force enumeration")
    k = z.k
    pairs = _pair_list(k)
    cell_index = {p: idx for idx, p in enumerate(pairs)}
    lb, ub, _ = _cell_bounds(z.counts(), constraints)
    edge_cell = []
    for i, j in all_pairs:
        a, b = int(z.types[i]), int(z.types[j])
        edge_cell.append(cell_index[(min(a, b), max(a, b))])

    best_obj = -math.inf
    best_combo = None
    best_counts = None
    check_workload = constraints.workload_enabled
    check_clip = constraints.clipping_rate is not None
    for combo in itertools.combinations(range(len(all_pairs)), m):
        if check_workload:
            deg = [0] * n
            for e in combo:
                i, j = all_pairs[e]
                deg[i] += 1
                deg[j] += 1
            if any(d < constraints.d_low or d > constraints.d_high for d in deg):
                continue
        cnt = [0] * len(pairs)
        for e in combo:
            cnt[edge_cell[e]] += 1
        if check_clip and any(c < lb[idx] or c > ub[idx] for idx, c in enumerate(cnt)):
            continue
        obj = math.fsum(cnt[idx] * float(w_sym[a, b]) for idx, (a, b) in enumerate(pairs))
        if obj > best_obj:
            best_obj = obj
            best_combo = combo
            best_counts = cnt
    if best_combo is None:
        raise InfeasibleError("no feasible edge subset satisfies the constraints")
    counts = np.zeros((k, k), dtype=np.int64)
    for idx, (a, b) in enumerate(pairs):
        counts[a, b] = best_counts[idx]
    edges = np.array(sorted(all_pairs[e] for e in best_combo), dtype=np.int64).reshape(-1, 2)
    return MatchResult(
        plan=PairingPlan(edges=edges, n=n),
        allocation=TypeAllocation(counts=counts),
        objective=best_obj,
        optimality="exact",
    )
