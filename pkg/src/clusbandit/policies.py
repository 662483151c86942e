"""Sequential arm-selection policies over clustered Bernoulli arms.

All policies share the same protocol: ``select()`` returns the flat index of
the arm to pull at the current round and ``observe(arm, reward)`` folds the
binary reward back in.  Rounds 1..K force one pull of every arm before any
index is computed.  Index recomputation can be batched (``update_interval``)
with stale indices reused in between, which is how long-horizon runs stay
cheap; none of the policies uses internal randomness, so identical reward
sequences yield identical selection sequences.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .kl import DEFAULT_TOL, clus_ucb_index, exploration_budget, kl_ucb_index

TLP_VARIANTS = ("MEAN", "MAX")


class Policy:
    """Shared state and the select/observe loop; subclasses score the arms."""

    kind = "base"

    def __init__(self, cluster_sizes, *, a, update_interval=1, tol=DEFAULT_TOL):
        sizes = tuple(int(s) for s in cluster_sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError(f"every cluster needs at least one arm, got sizes {sizes}")
        if a < 0:
            raise ValueError(f"exploration constant must be >= 0, got {a}")
        if int(update_interval) < 1:
            raise ValueError(f"update interval must be >= 1, got {update_interval}")
        if tol <= 0:
            raise ValueError(f"tol must be > 0, got {tol}")
        self.cluster_sizes = sizes
        self.num_arms = sum(sizes)
        self.a = float(a)
        self.update_interval = int(update_interval)
        self.tol = float(tol)
        offsets = [0]
        for s in sizes:
            offsets.append(offsets[-1] + s)
        self._offsets = tuple(offsets)
        self.pulls = [0] * self.num_arms
        self.successes = [0] * self.num_arms
        self.round = 1
        self._indices = None
        self._choice = None

    @property
    def means(self) -> list[float]:
        """Empirical means; NaN for arms never pulled."""
        return [
            s / t if t else float("nan") for s, t in zip(self.successes, self.pulls)
        ]

    @property
    def indices(self) -> "list[float] | None":
        """Most recently computed arm indices (stale between refresh rounds)."""
        return None if self._indices is None else list(self._indices)

    def cluster_range(self, cluster: int) -> range:
        return range(self._offsets[cluster], self._offsets[cluster + 1])

    def select(self) -> int:
        n = self.round
        if n <= self.num_arms:
            return n - 1
        if self._choice is None or n % self.update_interval == 0:
            self._refresh(n)
        return self._choice

    def observe(self, arm: int, reward: int) -> None:
        if not 0 <= arm < self.num_arms:
            raise ValueError(f"arm index out of range: {arm}")
        if reward != 0 and reward != 1:
            raise ValueError(f"reward must be 0 or 1, got {reward!r}")
        self.pulls[arm] += 1
        self.successes[arm] += reward
        self.round += 1

    def _refresh(self, n):
        idx = self._compute_indices(n)
        best = 0
        bv = idx[0]
        for k in range(1, self.num_arms):
            if idx[k] > bv:
                best, bv = k, idx[k]
        self._indices = idx
        self._choice = best

    def _compute_indices(self, n):
        raise NotImplementedError


class KLUCB(Policy):
    kind = "klucb"

    def __init__(self, cluster_sizes, *, a=4.0, update_interval=1, tol=DEFAULT_TOL):
        super().__init__(cluster_sizes, a=a, update_interval=update_interval, tol=tol)

    def _compute_indices(self, n):
        budget = exploration_budget(n, self.a)
        tol = self.tol
        return [
            kl_ucb_index(s / t, t, budget, tol)
            for s, t in zip(self.successes, self.pulls)
        ]


class ClusUCB(Policy):
    """Index policy whose optimism is coupled to the cluster mates' evidence.

    Each arm's index adds, for every mate, pulls times the one-sided divergence
    from the mate's empirical mean to (q - width); widths are the declared
    cluster widths, which may differ from the true spreads.
    """

    kind = "clusucb"

    def __init__(self, cluster_sizes, widths, *, a=5.0, update_interval=1, tol=DEFAULT_TOL):
        super().__init__(cluster_sizes, a=a, update_interval=update_interval, tol=tol)
        widths = tuple(float(w) for w in widths)
        if len(widths) != len(self.cluster_sizes):
            raise ValueError(
                f"expected {len(self.cluster_sizes)} widths, got {len(widths)}"
            )
        if any(not 0.0 <= w <= 1.0 for w in widths):
            raise ValueError(f"widths must lie in [0, 1], got {widths}")
        self.widths = widths

    def _compute_indices(self, n):
        budget = exploration_budget(n, self.a)
        tol = self.tol
        pulls = self.pulls
        stats = [(s / t, t) for s, t in zip(self.successes, pulls)]
        out = []
        for c, width in enumerate(self.widths):
            lo, hi = self._offsets[c], self._offsets[c + 1]
            members = stats[lo:hi]
            for j, target in enumerate(members):
                others = tuple(members[:j] + members[j + 1 :])
                out.append(clus_ucb_index(target, others, width, budget, tol))
        return out


class TwoLevelPolicy(Policy):
    """Cluster-then-arm selection: a KL-UCB over cluster reward estimates picks
    the cluster, then a KL-UCB over its arms picks the pull.

    The cluster estimate is either the pooled success rate (MEAN) or the best
    within-cluster empirical mean (MAX); the cluster's pull count is the total
    pulls of its arms, and both stages use the global round's budget.
    """

    kind = "tlp"

    def __init__(
        self, cluster_sizes, *, variant="MEAN", a=4.0, update_interval=1, tol=DEFAULT_TOL
    ):
        super().__init__(cluster_sizes, a=a, update_interval=update_interval, tol=tol)
        variant = str(variant).upper()
        if variant not in TLP_VARIANTS:
            raise ValueError(f"variant must be one of {TLP_VARIANTS}, got {variant!r}")
        self.variant = variant
        self._cluster_indices = None

    @property
    def cluster_indices(self) -> "list[float] | None":
        return None if self._cluster_indices is None else list(self._cluster_indices)

    def cluster_estimates(self) -> list[float]:
        out = []
        for c in range(len(self.cluster_sizes)):
            rng = self.cluster_range(c)
            if self.variant == "MEAN":
                tp = sum(self.pulls[k] for k in rng)
                ts = sum(self.successes[k] for k in rng)
                out.append(ts / tp)
            else:
                out.append(max(self.successes[k] / self.pulls[k] for k in rng))
        return out

    def cluster_pulls(self) -> list[int]:
        return [sum(self.pulls[k] for k in self.cluster_range(c)) for c in range(len(self.cluster_sizes))]

    def _refresh(self, n):
        budget = exploration_budget(n, self.a)
        tol = self.tol
        estimates = self.cluster_estimates()
        totals = self.cluster_pulls()
        cidx = [
            kl_ucb_index(est, tp, budget, tol) for est, tp in zip(estimates, totals)
        ]
        best_c = 0
        bv = cidx[0]
        for c in range(1, len(cidx)):
            if cidx[c] > bv:
                best_c, bv = c, cidx[c]
        arm_rng = self.cluster_range(best_c)
        best = arm_rng[0]
        bav = -1.0
        arm_indices = [float("nan")] * self.num_arms
        for k in arm_rng:
            v = kl_ucb_index(self.successes[k] / self.pulls[k], self.pulls[k], budget, tol)
            arm_indices[k] = v
            if v > bav:
                best, bav = k, v
        self._cluster_indices = cidx
        self._indices = arm_indices
        self._choice = best

    def _compute_indices(self, n):  # pragma: no cover - refresh is overridden
        raise AssertionError("TwoLevelPolicy refreshes in two stages")


@dataclass(frozen=True)
class PolicySpec:
    """Serializable description of a policy run; builds fresh policy instances.

    ``widths`` overrides the experiment-level declared widths for clustered
    policies, which is how width-misspecification sweeps put several variants
    of the same algorithm in one run.
    """

    kind: str
    a: "float | None" = None
    update_interval: int = 1
    tol: float = DEFAULT_TOL
    variant: str = "MEAN"
    widths: "tuple[float, ...] | None" = None
    label: "str | None" = None

    def __post_init__(self):
        if self.kind not in ("klucb", "clusucb", "tlp"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.widths is not None:
            object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind == "tlp":
            return f"tlp-{self.variant.lower()}"
        return self.kind

    def build(self, cluster_sizes, default_widths=None) -> Policy:
        common = dict(update_interval=self.update_interval, tol=self.tol)
        if self.kind == "klucb":
            return KLUCB(cluster_sizes, a=4.0 if self.a is None else self.a, **common)
        if self.kind == "clusucb":
            widths = self.widths if self.widths is not None else default_widths
            if widths is None:
                raise ValueError("clusucb needs declared cluster widths")
            return ClusUCB(
                cluster_sizes, widths, a=5.0 if self.a is None else self.a, **common
            )
        return TwoLevelPolicy(
            cluster_sizes,
            variant=self.variant,
            a=4.0 if self.a is None else self.a,
            **common,
        )

    def with_widths(self, widths) -> "PolicySpec":
        return replace(self, widths=tuple(float(w) for w in widths))

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "update_interval": self.update_interval,
            "tol": self.tol,
        }
        if self.a is not None:
            d["a"] = self.a
        if self.kind == "tlp":
            d["variant"] = self.variant
        if self.widths is not None:
            d["widths"] = list(self.widths)
        if self.label is not None:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolicySpec":
        known = {"kind", "a", "update_interval", "tol", "variant", "widths", "label"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown policy spec fields: {sorted(unknown)}")
        if "kind" not in d:
            raise ValueError("policy spec needs a 'kind'")
        widths = d.get("widths")
        return cls(
            kind=d["kind"],
            a=d.get("a"),
            update_interval=int(d.get("update_interval", 1)),
            tol=float(d.get("tol", DEFAULT_TOL)),
            variant=str(d.get("variant", "MEAN")).upper(),
            widths=None if widths is None else tuple(widths),
            label=d.get("label"),
        )
