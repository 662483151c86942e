"""Asymptotic regret-bound constants for clustered instances.

Three quantities per instance: the classical per-arm constant (structure
blind), the clustered lower-bound constant (per suboptimal cluster, the
smaller of an all-arms exploration term and a cheapest-single-arm term), and
the matching upper-bound constant (the all-arms term without the min).  A
small exact LP solved by basic-point enumeration cross-checks the closed form
cluster by cluster.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .instance import ClusteredInstance
from .kl import kl_bernoulli, kl_plus

ALLARMS = "ALLARMS"
MINARM = "MINARM"

LP_ENUMERATION_LIMIT = 12


class DegenerateDivergence(ArithmeticError):
    """A divergence that must be positive evaluated to zero (or infinite) in a denominator."""


class EnumerationLimit(ValueError):
    """Cluster too large for exact LP enumeration."""


@dataclass(frozen=True)
class ClusterBoundTerms:
    """Per-cluster pieces of the lower bound for one suboptimal cluster."""

    cluster: int
    alpha: tuple[float, ...]
    b: tuple[float, ...]
    L: float
    mu_min: float
    term_allarms: float
    term_minarm: float
    chosen: str

    @property
    def value(self) -> float:
        return self.term_allarms if self.chosen == ALLARMS else self.term_minarm


@dataclass(frozen=True)
class BoundReport:
    classical: float
    lower: float
    upper: float
    optimal_cluster: int
    optimal_cluster_term: float
    cluster_terms: tuple[ClusterBoundTerms, ...]
    lp_values: tuple["float | None", ...]
    widths: tuple[float, ...]

    def to_dict(self) -> dict:
        def num(x):
            if x is None:
                return None
            return "inf" if math.isinf(x) else x

        return {
            "classical": self.classical,
            "lower": self.lower,
            "upper": self.upper,
            "optimal_cluster": self.optimal_cluster,
            "optimal_cluster_term": self.optimal_cluster_term,
            "widths": list(self.widths),
            "cluster_terms": [
                {
                    "cluster": t.cluster,
                    "alpha": list(t.alpha),
                    "b": list(t.b),
                    "L": num(t.L),
                    "mu_min": t.mu_min,
                    "term_allarms": t.term_allarms,
                    "term_minarm": num(t.term_minarm),
                    "chosen": t.chosen,
                }
                for t in self.cluster_terms
            ],
            "lp_values": [num(v) for v in self.lp_values],
        }


def classical_bound(instance: ClusteredInstance) -> float:
    """Structure-blind constant: sum over suboptimal arms of gap / KL(mean, mu_star)."""
    _, mu_star = instance.best_arm()
    return math.fsum(
        (mu_star - m) / kl_bernoulli(m, mu_star)
        for m in instance.flat_means
        if m < mu_star
    )


def suboptimal_cluster_terms(
    cluster: int, means: "tuple[float, ...]", width: float, mu_star: float
) -> ClusterBoundTerms:
    """Lower-bound terms for one cluster containing no optimal arm.

    Width 1 makes the single-arm term infinite and the all-arms term collapse
    to the classical sum (no structural information).  Width 0 demands equal
    means and collapses the cluster to a single arm; computed via the explicit
    limit rather than a 0/0 cancellation.  Width 0 with unequal means leaves
    every alpha at zero, which is a structural error.
    """
    if any(m >= mu_star for m in means):
        raise ValueError("suboptimal cluster contains an arm with mean >= mu_star")
    gaps = [mu_star - m for m in means]
    if width == 0.0:
        if any(m != means[0] for m in means):
            raise DegenerateDivergence(
                f"cluster {cluster}: width 0 with unequal means leaves a zero denominator"
            )
        div = kl_bernoulli(means[0], mu_star)
        term = gaps[0] / div
        return ClusterBoundTerms(
            cluster=cluster,
            alpha=(0.0,) * len(means),
            b=(div,) * len(means),
            L=math.inf,
            mu_min=means[0],
            term_allarms=term,
            term_minarm=term,
            chosen=ALLARMS,
        )

    shifted = max(0.0, mu_star - width)
    b = tuple(kl_plus(m, shifted) for m in means)
    alpha = tuple(
        kl_bernoulli(m, mu_star) - bk for m, bk in zip(means, b)
    )
    if any(a <= 0.0 for a in alpha):
        raise DegenerateDivergence(
            f"cluster {cluster}: nonpositive exploration coefficient {min(alpha)}"
        )
    L = 1.0 + math.fsum(bk / ak for bk, ak in zip(b, alpha))
    term_allarms = math.fsum(g / (ak * L) for g, ak in zip(gaps, alpha))
    k_min = min(range(len(means)), key=lambda k: means[k])
    term_minarm = gaps[k_min] / b[k_min] if b[k_min] > 0.0 else math.inf
    chosen = ALLARMS if term_allarms <= term_minarm else MINARM
    return ClusterBoundTerms(
        cluster=cluster,
        alpha=alpha,
        b=b,
        L=L,
        mu_min=means[k_min],
        term_allarms=term_allarms,
        term_minarm=term_minarm,
        chosen=chosen,
    )


def _resolve_widths(instance, widths):
    if widths is None:
        return instance.widths
    widths = tuple(float(w) for w in widths)
    if len(widths) != instance.num_clusters:
        raise ValueError(
            f"expected {instance.num_clusters} widths, got {len(widths)}"
        )
    return widths


def _optimal_cluster_term(instance, best, mu_star) -> float:
    means = instance.clusters[best.cluster].means
    return math.fsum(
        (mu_star - m) / kl_plus(m, mu_star)
        for k, m in enumerate(means)
        if k != best.arm
    )


def clus_lower_bound(
    instance: ClusteredInstance,
    widths: "tuple[float, ...] | None" = None,
    *,
    with_lp: bool = True,
) -> BoundReport:
    """Full bound report: classical, lower and upper constants plus LP cross-checks.

    ``widths`` defaults to the instance's declared widths.  The LP value for a
    suboptimal cluster is None when the cluster exceeds the enumeration limit.
    """
    best, mu_star = instance.best_arm()
    widths = _resolve_widths(instance, widths)
    opt_term = _optimal_cluster_term(instance, best, mu_star)
    terms = []
    lp_values = []
    for c, cl in enumerate(instance.clusters):
        if c == best.cluster:
            continue
        terms.append(suboptimal_cluster_terms(c, cl.means, widths[c], mu_star))
        if with_lp and cl.size <= LP_ENUMERATION_LIMIT:
            lp_values.append(lp_oracle(cl.means, widths[c], mu_star)[0])
        else:
            lp_values.append(None)
    lower = math.fsum(t.value for t in terms) + opt_term
    upper = math.fsum(t.term_allarms for t in terms) + opt_term
    return BoundReport(
        classical=classical_bound(instance),
        lower=lower,
        upper=upper,
        optimal_cluster=best.cluster,
        optimal_cluster_term=opt_term,
        cluster_terms=tuple(terms),
        lp_values=tuple(lp_values),
        widths=widths,
    )


def clus_upper_constant(
    instance: ClusteredInstance, widths: "tuple[float, ...] | None" = None
) -> float:
    """Upper-bound constant: per-cluster all-arms terms plus the optimal-cluster sum."""
    best, mu_star = instance.best_arm()
    widths = _resolve_widths(instance, widths)
    total = _optimal_cluster_term(instance, best, mu_star)
    for c, cl in enumerate(instance.clusters):
        if c == best.cluster:
            continue
        total += suboptimal_cluster_terms(c, cl.means, widths[c], mu_star).term_allarms
    return total


def lp_oracle(
    means,
    beta: float,
    mu_star: float,
    *,
    enumeration_limit: int = LP_ENUMERATION_LIMIT,
    feas_tol: float = 1e-9,
) -> tuple[float, np.ndarray]:
    """Exact optimum of the per-cluster exploration LP by basic-point enumeration.

    minimize    a . c
    subject to  c_i * KL(mu_i, mu_star) + sum_{k != i} c_k * KLplus(mu_k, mu_star - beta) >= 1
                c >= 0

    with a_i = mu_star - mu_i.  Every subset of {variables pinned at zero} x
    {tight constraint rows} of total size K is solved; feasible points are kept
    and the best objective returned together with its solution vector.  Large c
    is always feasible (the diagonal divergences are positive), so the program
    is never infeasible.
    """
    means = tuple(float(m) for m in means)
    K = len(means)
    if K == 0:
        raise ValueError("empty cluster")
    if K > enumeration_limit:
        raise EnumerationLimit(
            f"cluster size {K} exceeds the enumeration limit {enumeration_limit}"
        )
    if any(m >= mu_star for m in means):
        raise ValueError("all cluster means must be < mu_star")
    diag = [kl_bernoulli(m, mu_star) for m in means]
    if not all(math.isfinite(d) and d > 0.0 for d in diag):
        raise DegenerateDivergence(
            "LP requires finite positive diagonal divergences (means in (0,1), mu_star < 1)"
        )
    shifted = max(0.0, mu_star - beta)
    off = [kl_plus(m, shifted) for m in means]
    A = np.empty((K, K))
    for j in range(K):
        for i in range(K):
            A[j, i] = diag[i] if i == j else off[i]
    a = np.array([mu_star - m for m in means])
    ones = np.ones(K)

    best_obj = math.inf
    best_c = None
    indices = range(K)
    for nz in range(K, 0, -1):  # number of free (nonzero) variables
        for free in itertools.combinations(indices, nz):
            free = list(free)
            for rows in itertools.combinations(indices, nz):
                sub = A[np.ix_(rows, free)]
                try:
                    x = np.linalg.solve(sub, np.ones(nz))
                except np.linalg.LinAlgError:
                    continue
                if not np.all(np.isfinite(x)):
                    continue
                if np.max(np.abs(sub @ x - 1.0)) > 1e-7:
                    continue  # near-singular system, reject
                if np.min(x) < -feas_tol:
                    continue
                c = np.zeros(K)
                c[free] = np.clip(x, 0.0, None)
                if np.min(A @ c - ones) < -feas_tol:
                    continue
                obj = float(a @ c)
                if obj < best_obj:
                    best_obj = obj
                    best_c = c
    if best_c is None:
        raise AssertionError("no feasible basic point found; this should be impossible")
    return best_obj, best_c
