"""File schemas: scenario configs, per-replication run logs, summary tables.

All emitted JSON/CSV uses 1-based agent and type indices (the code is 0-based
internally; conversion is confined to this module). Every document carries a
``schema_version``. Non-finite standard errors serialize as null, with the
posterior-state convention (null variance = uninformative) documented in
:mod:`hgtsim.posterior`.
"""

from __future__ import annotations

import csv
import io
import itertools
import math

import numpy as np

from .matching import MatchConstraints, MatchResult, TypeAllocation
from .posterior import PosteriorState, state_from_dict, state_to_dict
from .simulate import BatchRecord, RunResult, ScenarioConfig
from .variational import BatchEstimate, EmSettings, VariationalPosterior
from .posterior import LabelPermutation
from .wsbm import OutcomeVector, PairingPlan, ProductionMatrix, TypeDistribution

SCENARIO_SCHEMA_VERSION = 1
RUN_SCHEMA_VERSION = 1
SUMMARY_SCHEMA_VERSION = 1

#: Fixed histogram geometry for posterior/estimate summaries: width-0.01 bins
#: on [0, 1]; the value 1.0 falls in the last bin.
HIST_BINS = 100


class SchemaError(ValueError):
    """A document violates its schema (wrong/missing/unknown keys or values)."""


# ---------------------------------------------------------------------------
# scenario files


_SCENARIO_KEYS = {
    "schema_version", "name", "n", "k", "batches", "m_per_batch", "pi_true",
    "theta_true", "constraints", "turnover_xi", "em", "replications",
    "master_seed", "priors", "out_dir", "verbosity",
}
_CONSTRAINT_KEYS = {"d_low", "d_high", "clipping_rate", "workload_enabled"}
_EM_KEYS = {
    "max_outer_iters", "max_estep_sweeps", "tol_elbo", "tol_q", "restarts",
    "min_effective_count", "symmetric",
}


def scenario_from_dict(data: dict) -> tuple[ScenarioConfig, dict]:
    """Validate a scenario document; returns (config, extras).

    ``extras`` carries the presentation-only keys (out_dir, verbosity).
    Unknown keys are rejected.
    """
    if not isinstance(data, dict):
        raise SchemaError("scenario document must be a JSON object")
    unknown = set(data) - _SCENARIO_KEYS
    if unknown:
        raise SchemaError(f"unknown scenario keys: {sorted(unknown)}")
    if data.get("schema_version") != SCENARIO_SCHEMA_VERSION:
        raise SchemaError(f"unsupported scenario schema_version: {data.get('schema_version')!r}")
    missing = {"name", "n", "k", "batches", "m_per_batch", "pi_true", "theta_true",
               "constraints", "replications", "master_seed"} - set(data)
    if missing:
        raise SchemaError(f"missing scenario keys: {sorted(missing)}")

    cons_doc = data["constraints"]
    if not isinstance(cons_doc, dict):
        raise SchemaError("constraints must be an object")
    unknown = set(cons_doc) - _CONSTRAINT_KEYS
    if unknown:
        raise SchemaError(f"unknown constraint keys: {sorted(unknown)}")
    em_doc = data.get("em", {})
    if not isinstance(em_doc, dict):
        raise SchemaError("em must be an object")
    unknown = set(em_doc) - _EM_KEYS
    if unknown:
        raise SchemaError(f"unknown em keys: {sorted(unknown)}")

    try:
        constraints = MatchConstraints(
            m=int(data["m_per_batch"]),
            d_low=int(cons_doc.get("d_low", 0)),
            d_high=int(cons_doc.get("d_high", 10**9)),
            clipping_rate=(None if cons_doc.get("clipping_rate") is None
                           else float(cons_doc["clipping_rate"])),
            workload_enabled=bool(cons_doc.get("workload_enabled", False)),
        )
        em = EmSettings(**{key: em_doc[key] for key in em_doc})
        priors = None
        if data.get("priors") is not None:
            priors = state_from_dict(data["priors"])
        config = ScenarioConfig(
            name=str(data["name"]),
            n=int(data["n"]),
            k=int(data["k"]),
            t_batches=int(data["batches"]),
            m_per_batch=int(data["m_per_batch"]),
            pi_true=TypeDistribution(probs=np.asarray(data["pi_true"], dtype=float)),
            theta_true=ProductionMatrix(
                values=np.asarray(data["theta_true"], dtype=float), symmetric=True
            ),
            constraints=constraints,
            turnover_xi=int(data.get("turnover_xi", 0)),
            em=em,
            replications=int(data["replications"]),
            master_seed=int(data["master_seed"]),
            priors=priors,
        )
    except SchemaError:
        raise
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"invalid scenario value: {exc}") from exc
    extras = {"out_dir": data.get("out_dir"), "verbosity": data.get("verbosity", 1)}
    return config, extras


def scenario_to_dict(config: ScenarioConfig, extras: dict | None = None) -> dict:
    doc = {
        "schema_version": SCENARIO_SCHEMA_VERSION,
        "name": config.name,
        "n": config.n,
        "k": config.k,
        "batches": config.t_batches,
        "m_per_batch": config.m_per_batch,
        "pi_true": [float(x) for x in config.pi_true.probs],
        "theta_true": [[float(x) for x in row] for row in config.theta_true.values],
        "constraints": {
            "d_low": config.constraints.d_low,
            "d_high": config.constraints.d_high,
            "clipping_rate": config.constraints.clipping_rate,
            "workload_enabled": config.constraints.workload_enabled,
        },
        "turnover_xi": config.turnover_xi,
        "em": {
            "max_outer_iters": config.em.max_outer_iters,
            "max_estep_sweeps": config.em.max_estep_sweeps,
            "tol_elbo": config.em.tol_elbo,
            "tol_q": config.em.tol_q,
            "restarts": config.em.restarts,
            "min_effective_count": config.em.min_effective_count,
            "symmetric": config.em.symmetric,
        },
        "replications": config.replications,
        "master_seed": config.master_seed,
        "priors": None if config.priors is None else state_to_dict(config.priors),
    }
    if extras:
        doc.update({k: v for k, v in extras.items() if k in ("out_dir", "verbosity")})
    return doc


# ---------------------------------------------------------------------------
# run logs


def _finite_or_none(x: float) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def _matrix(values, convert=float) -> list:
    return [[convert(v) for v in row] for row in np.asarray(values)]


def estimate_to_dict(est: BatchEstimate) -> dict:
    return {
        "theta_hat": _matrix(est.theta_hat.values),
        "symmetric": est.theta_hat.symmetric,
        "pi_hat": [float(x) for x in est.pi_hat.probs],
        "q_hat": _matrix(est.q_hat.q),
        "se": [[_finite_or_none(v) for v in row] for row in est.se],
        "flagged": None if est.flagged is None else _matrix(est.flagged, bool),
        "elbo": _finite_or_none(est.elbo),
        "converged": est.converged,
        "restarts_used": est.restarts_used,
        "elbo_trace": [float(x) for x in est.elbo_trace],
    }


def estimate_from_dict(doc: dict) -> BatchEstimate:
    se = np.array(
        [[math.inf if v is None else float(v) for v in row] for row in doc["se"]]
    )
    return BatchEstimate(
        theta_hat=ProductionMatrix(values=np.asarray(doc["theta_hat"], dtype=float),
                                   symmetric=bool(doc["symmetric"])),
        pi_hat=TypeDistribution(probs=np.asarray(doc["pi_hat"], dtype=float)),
        q_hat=VariationalPosterior(q=np.asarray(doc["q_hat"], dtype=float)),
        se=se,
        elbo=(-math.inf if doc["elbo"] is None else float(doc["elbo"])),
        converged=bool(doc["converged"]),
        restarts_used=int(doc["restarts_used"]),
        flagged=None if doc.get("flagged") is None else np.asarray(doc["flagged"], dtype=bool),
        elbo_trace=tuple(doc.get("elbo_trace", ())),
    )


def match_result_to_dict(result: MatchResult) -> dict:
    """Edge list (1-based agents), allocation (1-based cells), objective."""
    return {
        "edges": [[int(i) + 1, int(j) + 1] for i, j in result.plan.edges],
        "n": result.plan.n,
        "allocation": {
            f"{a + 1},{b + 1}": int(result.allocation.counts[a, b])
            for a in range(result.allocation.k)
            for b in range(a, result.allocation.k)
        },
        "objective": float(result.objective),
        "optimality": result.optimality,
    }


def record_to_dict(rec: BatchRecord) -> dict:
    return {
        "batch_index": rec.batch_index,
        "edges": [[int(i) + 1, int(j) + 1] for i, j in rec.plan.edges],
        "outcomes": [int(v) for v in rec.outcomes.outcomes],
        "estimate": estimate_to_dict(rec.estimate),
        "permutation": [int(p) + 1 for p in rec.permutation.perm],
        "posterior_after": state_to_dict(rec.posterior_after),
        "hgt_expected_output": float(rec.hgt_expected_output),
        "oracle_expected_output": float(rec.oracle_expected_output),
        "regret_abs": float(rec.regret_abs),
        "regret_pct": float(rec.regret_pct),
        "flr": float(rec.flr),
    }


def record_from_dict(doc: dict, n: int, k: int) -> BatchRecord:
    edges = np.asarray(doc["edges"], dtype=np.int64).reshape(-1, 2) - 1
    return BatchRecord(
        batch_index=int(doc["batch_index"]),
        plan=PairingPlan(edges=edges, n=n),
        outcomes=OutcomeVector(outcomes=np.asarray(doc["outcomes"], dtype=np.int64)),
        estimate=estimate_from_dict(doc["estimate"]),
        permutation=LabelPermutation(perm=tuple(int(p) - 1 for p in doc["permutation"])),
        posterior_after=state_from_dict(doc["posterior_after"]),
        hgt_expected_output=float(doc["hgt_expected_output"]),
        oracle_expected_output=float(doc["oracle_expected_output"]),
        regret_abs=float(doc["regret_abs"]),
        regret_pct=float(doc["regret_pct"]),
        flr=float(doc["flr"]),
    )


def run_result_to_dict(result: RunResult) -> dict:
    return {
        "schema_version": RUN_SCHEMA_VERSION,
        "replication": result.replication,
        "records": [record_to_dict(r) for r in result.records],
        "final_state": state_to_dict(result.final_state),
        "z_true_final": [int(t) + 1 for t in result.z_true_final.types],
        "elapsed_s": float(result.elapsed_s),
        "error": result.error,
    }


def run_result_from_dict(doc: dict, n: int, k: int) -> RunResult:
    if doc.get("schema_version") != RUN_SCHEMA_VERSION:
        raise SchemaError(f"unsupported run schema_version: {doc.get('schema_version')!r}")
    from .wsbm import TypeVector

    return RunResult(
        replication=int(doc["replication"]),
        records=tuple(record_from_dict(r, n, k) for r in doc["records"]),
        final_state=state_from_dict(doc["final_state"]),
        z_true_final=TypeVector(
            types=np.asarray(doc["z_true_final"], dtype=np.int64) - 1, k=k
        ),
        elapsed_s=float(doc["elapsed_s"]),
        error=doc.get("error"),
    )


# ---------------------------------------------------------------------------
# metrics CSV

CSV_COLUMNS = ("replication", "batch", "flr", "regret_abs", "regret_pct",
               "hgt_expected", "oracle_expected")


def metrics_csv(results: list[RunResult]) -> str:
    """Per-batch metric rows; floats via repr for exact round-trips."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for res in results:
        for rec in res.records:
            writer.writerow([
                res.replication, rec.batch_index, repr(rec.flr),
                repr(rec.regret_abs), repr(rec.regret_pct),
                repr(rec.hgt_expected_output), repr(rec.oracle_expected_output),
            ])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# summary table


def truth_alignment(final_state: PosteriorState, theta_true: np.ndarray) -> tuple:
    """Evaluation-time permutation: relabel a replication's posterior frame
    onto the true production matrix (least squares over permutations).

    Within a replication the label frame is fixed by batch 1 and carried by
    alignment, so one permutation per replication suffices for reporting.
    """
    k = final_state.k
    mu = np.where(np.isfinite(final_state.theta_var), final_state.theta_mean, 0.5)
    best = None
    best_perm = None
    for perm in itertools.permutations(range(k)):
        p = list(perm)
        cost = float(((mu[np.ix_(p, p)] - theta_true) ** 2).sum())
        if best is None or cost < best - 1e-15:
            best = cost
            best_perm = perm
    return best_perm


def _hist(values: list[float]) -> list[int]:
    counts = [0] * HIST_BINS
    for v in values:
        idx = min(int(v * HIST_BINS), HIST_BINS - 1)
        counts[max(idx, 0)] += 1
    return counts


def build_summary(config: ScenarioConfig, results: list[RunResult]) -> dict:
    """Cross-replication aggregates; exact function of the run logs.

    Means/SDs (sample SD, ddof=1) of the per-batch metrics, plus
    truth-aligned per-cell posterior-mean trajectories and width-0.01
    histograms of posterior means and raw batch estimates.
    """
    ok = [r for r in results if r.error is None and len(r.records) == config.t_batches]
    failed = sorted(
        r.replication for r in results
        if r.error is not None or len(r.records) != config.t_batches
    )
    t_batches = config.t_batches
    k = config.k

    def agg(values):
        arr = np.asarray(values, dtype=float)
        mean = float(arr.mean()) if arr.size else None
        sd = float(arr.std(ddof=1)) if arr.size > 1 else None
        return mean, sd

    per_batch = []
    for t in range(t_batches):
        row: dict = {"batch": t + 1}
        for key, getter in (
            ("flr", lambda r: r.records[t].flr),
            ("regret_abs", lambda r: r.records[t].regret_abs),
            ("regret_pct", lambda r: r.records[t].regret_pct),
            ("hgt_expected", lambda r: r.records[t].hgt_expected_output),
            ("oracle_expected", lambda r: r.records[t].oracle_expected_output),
        ):
            mean, sd = agg([getter(r) for r in ok])
            row[f"{key}_mean"] = mean
            row[f"{key}_sd"] = sd
        per_batch.append(row)

    perms = {r.replication: truth_alignment(r.final_state, config.theta_true.values) for r in ok}
    cells = [(a, b) for a in range(k) for b in range(a, k)]
    trajectories = {}
    post_hists = {}
    est_hists = {}
    for a, b in cells:
        key = f"{a + 1},{b + 1}"
        traj = []
        post_hists[key] = []
        est_hists[key] = []
        for t in range(t_batches):
            post_means = []
            est_vals = []
            for r in ok:
                p = perms[r.replication]
                state = r.records[t].posterior_after
                pa, pb = p[a], p[b]
                if math.isfinite(state.theta_var[pa, pb]):
                    post_means.append(float(state.theta_mean[pa, pb]))
                est_vals.append(float(r.records[t].estimate.theta_hat.values[pa, pb]))
            traj.append(float(np.mean(post_means)) if post_means else None)
            post_hists[key].append(_hist(post_means))
            est_hists[key].append(_hist(est_vals))
        trajectories[key] = traj

    return {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "scenario": config.name,
        "replications": config.replications,
        "completed": len(ok),
        "failed_replications": failed,
        "per_batch": per_batch,
        "posterior_mean_trajectories": trajectories,
        "posterior_mean_histograms": post_hists,
        "batch_estimate_histograms": est_hists,
        "histogram_bin_width": 1.0 / HIST_BINS,
    }
