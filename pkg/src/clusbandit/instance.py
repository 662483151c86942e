"""Clustered Bernoulli bandit instances: construction, validation, gap queries.

An instance is an ordered list of clusters; each cluster carries the true arm
means and a declared width bounding the within-cluster mean spread.  Declared
widths may deliberately disagree with the true spread (misspecification
experiments), which is why validation has an advisory mode.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple


class ArmId(NamedTuple):
    cluster: int
    arm: int


class NonUniqueOptimum(ValueError):
    """Raised when two arms tie for the maximum mean."""


class ConstraintViolation(ValueError):
    """Strict validation failure; carries (cluster, spread, width) triples."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        detail = "; ".join(
            f"cluster {c}: spread {s:.6g} not < width {w:.6g}" for c, s, w in self.violations
        )
        super().__init__(f"cluster width constraint violated: {detail}")


@dataclass(frozen=True)
class Cluster:
    width: float
    means: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(self, "width", float(self.width))
        if not self.means:
            raise ValueError("a cluster needs at least one arm")
        if any(not 0.0 <= m <= 1.0 for m in self.means):
            raise ValueError(f"arm means must lie in [0, 1], got {self.means}")
        if not 0.0 <= self.width <= 1.0:
            raise ValueError(f"cluster width must lie in [0, 1], got {self.width}")

    @property
    def size(self) -> int:
        return len(self.means)

    @property
    def spread(self) -> float:
        return max(self.means) - min(self.means)


@dataclass(frozen=True)
class ClusteredInstance:
    clusters: tuple[Cluster, ...]
    note: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))
        if not self.clusters:
            raise ValueError("an instance needs at least one cluster")

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)

    @property
    def num_arms(self) -> int:
        return sum(c.size for c in self.clusters)

    @property
    def cluster_sizes(self) -> tuple[int, ...]:
        return tuple(c.size for c in self.clusters)

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(c.width for c in self.clusters)

    @property
    def flat_means(self) -> tuple[float, ...]:
        return tuple(m for c in self.clusters for m in c.means)

    def arm_ids(self) -> tuple[ArmId, ...]:
        return tuple(ArmId(c, k) for c, cl in enumerate(self.clusters) for k in range(cl.size))

    def flat_index(self, arm: ArmId) -> int:
        if not 0 <= arm.cluster < self.num_clusters:
            raise IndexError(f"cluster index out of range: {arm.cluster}")
        if not 0 <= arm.arm < self.clusters[arm.cluster].size:
            raise IndexError(f"arm index out of range: {arm}")
        return sum(c.size for c in self.clusters[: arm.cluster]) + arm.arm

    def arm_id(self, flat: int) -> ArmId:
        if not 0 <= flat < self.num_arms:
            raise IndexError(f"flat arm index out of range: {flat}")
        for c, cl in enumerate(self.clusters):
            if flat < cl.size:
                return ArmId(c, flat)
            flat -= cl.size
        raise AssertionError("unreachable")

    def best_arm(self) -> tuple[ArmId, float]:
        """The unique arm with the strictly largest mean and its mean."""
        means = self.flat_means
        mu_star = max(means)
        winners = [k for k, m in enumerate(means) if m == mu_star]
        if len(winners) > 1:
            raise NonUniqueOptimum(
                f"{len(winners)} arms tie for the maximum mean {mu_star}"
            )
        return self.arm_id(winners[0]), mu_star

    def gaps(self) -> dict[ArmId, float]:
        """Suboptimality gap mu_star - mu per arm; zero exactly for the best arm."""
        _, mu_star = self.best_arm()
        return {aid: mu_star - m for aid, m in zip(self.arm_ids(), self.flat_means)}

    def flat_gaps(self) -> tuple[float, ...]:
        _, mu_star = self.best_arm()
        return tuple(mu_star - m for m in self.flat_means)

    def to_dict(self) -> dict:
        d = {"clusters": [{"width": c.width, "means": list(c.means)} for c in self.clusters]}
        if self.note is not None:
            d["true_widths_note"] = self.note
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClusteredInstance":
        try:
            clusters = tuple(Cluster(c["width"], tuple(c["means"])) for c in d["clusters"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed instance dict: {exc}") from exc
        return cls(clusters, note=d.get("true_widths_note"))

    @classmethod
    def from_json(cls, path) -> "ClusteredInstance":
        with open(Path(path)) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class ValidationReport:
    satisfied: tuple[bool, ...]
    max_spread: tuple[float, ...]
    violations: tuple[tuple[int, float, float], ...]

    @property
    def ok(self) -> bool:
        return not self.violations


# Spread-vs-width comparisons happen within this absolute tolerance so that
# decimal ties (e.g. means 0.40..0.42 against width 0.02) resolve as
# violations of the strict inequality regardless of binary rounding.
SPREAD_TIE_EPS = 1e-12


def validate(
    instance: ClusteredInstance,
    mode: str = "advisory",
    widths: "tuple[float, ...] | None" = None,
) -> ValidationReport:
    """Check every cluster's true mean spread against its (declared) width.

    The constraint is strict (spread < width); a spread equal to the width
    counts as a violation, while a zero-spread cluster satisfies any width
    including zero.  ``mode="strict"`` raises ConstraintViolation on any
    failure; ``mode="advisory"`` always returns the report, which is what the
    width-misspecification experiments need.  An explicit ``widths`` vector
    overrides the widths stored on the instance.
    """
    if mode not in ("strict", "advisory"):
        raise ValueError(f"mode must be 'strict' or 'advisory', got {mode!r}")
    if widths is None:
        widths = instance.widths
    elif len(widths) != instance.num_clusters:
        raise ValueError(
            f"expected {instance.num_clusters} widths, got {len(widths)}"
        )
    spreads = tuple(c.spread for c in instance.clusters)
    satisfied = tuple(
        s == 0.0 or s < w - SPREAD_TIE_EPS for s, w in zip(spreads, widths)
    )
    violations = tuple(
        (c, spreads[c], widths[c]) for c, good in enumerate(satisfied) if not good
    )
    report = ValidationReport(satisfied, spreads, violations)
    if mode == "strict" and violations:
        raise ConstraintViolation(violations)
    return report


def load_instance(path) -> ClusteredInstance:
    return ClusteredInstance.from_json(path)
