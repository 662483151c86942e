"""Bernoulli KL divergences and the bisection-inverted UCB indices built on them.

All quantities are in nats.  Probabilities live in [0, 1]; divergences are
extended reals (``math.inf`` marks a support mismatch at the boundary, NaN is
never produced).
"""
from __future__ import annotations

import math
from functools import lru_cache

__all__ = [
    "kl_bernoulli",
    "kl_plus",
    "exploration_budget",
    "kl_ucb_index",
    "clus_ucb_index",
]

DEFAULT_TOL = 1e-9


def kl_bernoulli(p: float, q: float) -> float:
    """KL(Ber(p) || Ber(q)).

    Conventions: 0*log(0/x) = 0, the value is 0 when p == q (including at the
    boundaries) and +inf when q is 0 or 1 while p differs from it.
    """
    if p == q:
        return 0.0
    if q <= 0.0 or q >= 1.0:
        return math.inf
    # log1p of the relative offset keeps precision when p ~ q, where the two
    # log-ratio terms nearly cancel; fall back to the plain ratio when the
    # arguments are far apart and the offset approaches -1
    d = 0.0
    if p > 0.0:
        x = (p - q) / q
        d += p * (math.log1p(x) if x > -0.5 else math.log(p / q))
    if p < 1.0:
        y = (q - p) / (1.0 - q)
        d += (1.0 - p) * (math.log1p(y) if y > -0.5 else math.log((1.0 - p) / (1.0 - q)))
    # guard against -1e-17 style rounding for p ~ q
    return d if d > 0.0 else 0.0


def kl_plus(p: float, q: float) -> float:
    """One-sided divergence: kl_bernoulli(p, q) when q > p, else 0."""
    return kl_bernoulli(p, q) if q > p else 0.0


def exploration_budget(n: float, a: float) -> float:
    """Confidence budget log(n) + a*log(log(n)) at round n, clamped to stay finite.

    The inner logarithm is clamped at 1 so the second term vanishes for
    n <= e and the budget is nonnegative and nondecreasing from round 1.
    """
    if n < 1:
        raise ValueError(f"round must be >= 1, got {n}")
    if a < 0:
        raise ValueError(f"exploration constant must be >= 0, got {a}")
    ln = math.log(n)
    return ln + a * math.log(ln if ln > 1.0 else 1.0)


@lru_cache(maxsize=1 << 15)
def kl_ucb_index(p_hat: float, pulls: int, budget: float, tol: float = DEFAULT_TOL) -> float:
    """Largest q in [p_hat, 1] with pulls * kl_bernoulli(p_hat, q) <= budget.

    Solved by bisection to absolute width ``tol``; the returned point always
    satisfies the constraint (feasible side of the final bracket).
    """
    if pulls < 1:
        raise ValueError(f"pulls must be >= 1, got {pulls}")
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    if pulls * kl_bernoulli(p_hat, 1.0) <= budget:
        return 1.0
    lo, hi = p_hat, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pulls * kl_bernoulli(p_hat, mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


def clus_ucb_index(
    target: tuple[float, int],
    others: "list[tuple[float, int]] | tuple[tuple[float, int], ...]",
    beta: float,
    budget: float,
    tol: float = DEFAULT_TOL,
) -> float:
    """Cluster-coupled UCB index of the target arm.

    Largest q in [target mean, 1] such that

        t * kl_bernoulli(p, q) + sum_j t_j * kl_plus(p_j, q - beta) <= budget

    where (p, t) are the target's empirical mean and pull count and (p_j, t_j)
    range over the cluster mates.  The left side is continuous and
    nondecreasing in q on the search interval, so bisection applies.  When the
    constraint already fails at q = p (mates carrying heavy counterevidence),
    the index is floored at the empirical mean.  Mates with zero pulls
    contribute nothing.
    """
    return _clus_ucb_index(
        (float(target[0]), int(target[1])),
        tuple((float(p), int(t)) for p, t in others if t > 0),
        float(beta),
        float(budget),
        float(tol),
    )


@lru_cache(maxsize=1 << 15)
def _clus_ucb_index(target, others, beta, budget, tol):
    p, t = target
    if t < 1:
        raise ValueError(f"target pulls must be >= 1, got {t}")
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")

    def overshoot(q):
        val = t * kl_bernoulli(p, q)
        shifted = q - beta
        if shifted > 0.0:
            for pj, tj in others:
                val += tj * kl_plus(pj, shifted)
        return val

    if overshoot(p) > budget:
        return p
    if overshoot(1.0) <= budget:
        return 1.0
    lo, hi = p, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if overshoot(mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo
