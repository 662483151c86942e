"""Seeded Bernoulli episode simulation and Monte Carlo batching.

Rewards come from one uniform draw per round (PCG64 seeded per episode), so a
trace is a pure function of (instance, policy parameters, horizon, seed).
Replication seeds derive from the batch base seed through a SplitMix64 mix
whose constants are fixed below; the derivation is injective in the
replication index, and batches aggregate with exactly-rounded sums so results
are identical no matter how episodes are scheduled across processes.

Regret is pseudo-regret: the gap-weighted pull counts, recorded on a grid of
rounds (geometric by default) plus the horizon.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import suboptimal_cluster_terms
from .instance import ClusteredInstance
from .policies import Policy, PolicySpec

_MASK64 = (1 << 64) - 1
# SplitMix64 constants (Steele, Lea & Flood's generator): the stream increment
# and the two finalizer multipliers.
SPLITMIX64_GAMMA = 0x9E3779B97F4A7C15
SPLITMIX64_MIX1 = 0xBF58476D1CE4E5B9
SPLITMIX64_MIX2 = 0x94D049BB133111EB


class HorizonTooShort(ValueError):
    """Horizon smaller than the number of arms (no room to initialize)."""


def splitmix64(state: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit mix."""
    z = state & _MASK64
    z = ((z ^ (z >> 30)) * SPLITMIX64_MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * SPLITMIX64_MIX2) & _MASK64
    return z ^ (z >> 31)


def episode_seed(base_seed: int, replication: int) -> int:
    """Seed for one replication: splitmix64(base_seed + (i+1) * gamma) mod 2^64.

    Injective in the replication index for a fixed base seed (the increment is
    odd, the finalizer is a bijection).
    """
    if replication < 0:
        raise ValueError(f"replication index must be >= 0, got {replication}")
    return splitmix64((base_seed + (replication + 1) * SPLITMIX64_GAMMA) & _MASK64)


def geometric_grid(horizon: int, points: int = 100) -> np.ndarray:
    """Log-spaced recording rounds in [1, horizon], horizon always included."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if points < 1:
        raise ValueError(f"points must be >= 1, got {points}")
    raw = np.geomspace(1.0, float(horizon), num=points)
    grid = np.unique(np.rint(raw).astype(np.int64))
    grid = grid[(grid >= 1) & (grid <= horizon)]
    if grid.size == 0 or grid[-1] != horizon:
        grid = np.append(grid, np.int64(horizon))
    return grid


def _normalize_grid(grid, horizon: int) -> np.ndarray:
    g = np.asarray(grid, dtype=np.int64)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("recording grid must be a nonempty 1-d sequence of rounds")
    if np.any(np.diff(g) <= 0):
        raise ValueError("recording grid must be strictly increasing")
    if g[0] < 1 or g[-1] > horizon:
        raise ValueError(f"recording grid must lie within [1, {horizon}]")
    if g[-1] != horizon:
        g = np.append(g, np.int64(horizon))
    return g


@dataclass(frozen=True)
class RegretTrace:
    """One episode: cumulative pseudo-regret on the grid plus final pull counts."""

    grid: np.ndarray
    pseudo_regret: np.ndarray
    pulls_final: np.ndarray
    seed: int


@dataclass(frozen=True)
class MonteCarloSummary:
    policy: str
    grid: np.ndarray
    mean_regret: np.ndarray
    stderr: np.ndarray
    replications: int
    mean_pulls: np.ndarray
    traces: "tuple[RegretTrace, ...] | None" = None


def _play(policy, horizon, means, gaps, grid, seed):
    """Inner episode loop; returns the recorded regrets and the pull-count list."""
    uniforms = np.random.default_rng(seed & _MASK64).random(horizon).tolist()
    select = policy.select
    observe = policy.observe
    pulls = policy.pulls
    regret = np.empty(grid.size)
    gi = 0
    nxt = int(grid[0])
    for n, u in enumerate(uniforms, start=1):
        arm = select()
        observe(arm, 1 if u < means[arm] else 0)
        if n == nxt:
            regret[gi] = math.fsum(g * p for g, p in zip(gaps, pulls))
            gi += 1
            nxt = int(grid[gi]) if gi < grid.size else 0
    return regret, pulls


def run_episode(
    instance: ClusteredInstance,
    policy: Policy,
    horizon: int,
    seed: int,
    grid=None,
) -> RegretTrace:
    """Play one seeded episode and record the pseudo-regret trace.

    The reward at round n is 1 iff the n-th uniform of the episode stream falls
    below the pulled arm's true mean, so the stream does not depend on the pull
    sequence.  Pseudo-regret at a grid round is recomputed from the pull counts
    (an exactly-rounded dot product with the true gaps), not accumulated.
    """
    K = instance.num_arms
    if policy.num_arms != K:
        raise ValueError(
            f"policy built for {policy.num_arms} arms, instance has {K}"
        )
    if horizon < K:
        raise HorizonTooShort(f"horizon {horizon} < number of arms {K}")
    grid = _normalize_grid(grid if grid is not None else geometric_grid(horizon), horizon)
    regret, pulls = _play(policy, horizon, instance.flat_means, instance.flat_gaps(), grid, seed)
    return RegretTrace(
        grid=grid,
        pseudo_regret=regret,
        pulls_final=np.asarray(pulls, dtype=np.int64),
        seed=int(seed),
    )


def _run_replications(instance, spec, widths, horizon, grid, seeds):
    sizes = instance.cluster_sizes
    means = instance.flat_means
    gaps = instance.flat_gaps()
    R = np.empty((len(seeds), len(grid)))
    P = np.empty((len(seeds), instance.num_arms), dtype=np.int64)
    for i, seed in enumerate(seeds):
        policy = spec.build(sizes, default_widths=widths)
        regret, pulls = _play(policy, horizon, means, gaps, grid, seed)
        R[i] = regret
        P[i] = pulls
    return R, P


def _chunk_worker(args):
    return _run_replications(*args)


def _fsum_columns(M: np.ndarray) -> np.ndarray:
    # math.fsum is exactly rounded, hence invariant to replication order and
    # to how replications were split across workers.
    return np.array([math.fsum(col) for col in M.T])


def run_batch(
    instance: ClusteredInstance,
    spec: PolicySpec,
    horizon: int,
    replications: int,
    base_seed: int,
    *,
    widths=None,
    grid=None,
    n_jobs: "int | None" = 1,
    keep_traces: bool = False,
) -> MonteCarloSummary:
    """Run independent replications of one policy and aggregate.

    Replication i runs with ``episode_seed(base_seed, i)``.  ``n_jobs`` > 1
    distributes episodes over worker processes; the summary is identical to a
    serial run because per-episode results depend only on their seed and the
    aggregation uses exactly-rounded sums in a fixed order.
    """
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications}")
    widths = tuple(widths) if widths is not None else instance.widths
    grid = _normalize_grid(grid if grid is not None else geometric_grid(horizon), horizon)
    seeds = [episode_seed(base_seed, i) for i in range(replications)]
    if n_jobs is None:
        n_jobs = os.cpu_count() or 1
    n_jobs = max(1, min(int(n_jobs), replications))

    if n_jobs == 1:
        R, P = _run_replications(instance, spec, widths, horizon, grid, seeds)
    else:
        step = math.ceil(replications / (n_jobs * 4))
        chunks = [
            (instance, spec, widths, horizon, grid, seeds[i : i + step])
            for i in range(0, replications, step)
        ]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(_chunk_worker, chunks))
        R = np.concatenate([r for r, _ in parts], axis=0)
        P = np.concatenate([p for _, p in parts], axis=0)

    mean = _fsum_columns(R) / replications
    if replications > 1:
        dev = R - mean
        stderr = np.sqrt(_fsum_columns(dev * dev) / (replications - 1)) / math.sqrt(
            replications
        )
    else:
        stderr = np.zeros(grid.size)
    mean_pulls = _fsum_columns(P.astype(float)) / replications
    traces = None
    if keep_traces:
        traces = tuple(
            RegretTrace(grid=grid, pseudo_regret=R[i].copy(), pulls_final=P[i].copy(), seed=seeds[i])
            for i in range(replications)
        )
    return MonteCarloSummary(
        policy=spec.name,
        grid=grid,
        mean_regret=mean,
        stderr=stderr,
        replications=replications,
        mean_pulls=mean_pulls,
        traces=traces,
    )


@dataclass(frozen=True)
class PullCheckRow:
    cluster: int
    arm: int
    mean_pulls: float
    pulls_per_log_t: float
    predicted_per_log_t: float


@dataclass(frozen=True)
class PullRatioRow:
    cluster: int
    arm_a: int
    arm_b: int
    empirical: float
    predicted: float


@dataclass(frozen=True)
class PullDiagnostics:
    horizon: int
    rows: tuple[PullCheckRow, ...]
    ratios: tuple[PullRatioRow, ...]


def expected_pull_check(
    summary: MonteCarloSummary,
    instance: ClusteredInstance,
    widths=None,
) -> PullDiagnostics:
    """Empirical pull counts of suboptimal-cluster arms against the asymptotic law.

    For each arm of a cluster without the optimal arm, reports mean pulls /
    log(horizon) next to 1 / (alpha * L); pairwise rows compare within-cluster
    pull ratios with the inverse-alpha prediction.  Arms of the optimal
    cluster are excluded.
    """
    widths = tuple(widths) if widths is not None else instance.widths
    best, mu_star = instance.best_arm()
    horizon = int(summary.grid[-1])
    log_t = math.log(horizon)
    rows = []
    ratios = []
    offset = 0
    for c, cl in enumerate(instance.clusters):
        if c == best.cluster:
            offset += cl.size
            continue
        terms = suboptimal_cluster_terms(c, cl.means, widths[c], mu_star)
        if widths[c] == 0.0:
            # equal-mean degenerate cluster: the coupled rate limits to K * KL
            pred = [1.0 / (cl.size * terms.b[0])] * cl.size
            alpha_like = [1.0] * cl.size
        else:
            pred = [1.0 / (ak * terms.L) for ak in terms.alpha]
            alpha_like = list(terms.alpha)
        for k in range(cl.size):
            mp = float(summary.mean_pulls[offset + k])
            rows.append(
                PullCheckRow(
                    cluster=c,
                    arm=k,
                    mean_pulls=mp,
                    pulls_per_log_t=mp / log_t,
                    predicted_per_log_t=pred[k],
                )
            )
        for i in range(cl.size):
            for j in range(i + 1, cl.size):
                ti = float(summary.mean_pulls[offset + i])
                tj = float(summary.mean_pulls[offset + j])
                ratios.append(
                    PullRatioRow(
                        cluster=c,
                        arm_a=i,
                        arm_b=j,
                        empirical=ti / tj,
                        predicted=alpha_like[j] / alpha_like[i],
                    )
                )
        offset += cl.size
    return PullDiagnostics(horizon=horizon, rows=tuple(rows), ratios=tuple(ratios))
