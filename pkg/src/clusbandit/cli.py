"""Experiment orchestration: configs in, bound reports / regret CSVs / SVG plots out.

Subcommands:
    bound     compute the regret-bound constants for a configured instance
    simulate  run the Monte Carlo batches and write trace/summary/pull CSVs
    simulate  output is deterministic for a fixed base seed
    plot      render summary CSVs as an SVG regret chart

Config files are JSON with a versioned schema; see README for the format.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from .bounds import DegenerateDivergence, clus_lower_bound
from .instance import ClusteredInstance, ConstraintViolation, validate
from .policies import PolicySpec
from .sim import MonteCarloSummary, expected_pull_check, geometric_grid, run_batch

CONFIG_SCHEMA = 1


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    instance: ClusteredInstance
    policies: tuple[PolicySpec, ...]
    horizon: int
    replications: int
    base_seed: int
    declared_widths: "tuple[float, ...] | None" = None
    grid_points: int = 100
    out_dir: "str | None" = None

    def __post_init__(self):
        if not self.policies:
            raise ValueError("config needs at least one policy")
        if self.horizon < self.instance.num_arms:
            raise ValueError(
                f"horizon {self.horizon} < total arms {self.instance.num_arms}"
            )
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if self.grid_points < 1:
            raise ValueError(f"grid points must be >= 1, got {self.grid_points}")
        if (
            self.declared_widths is not None
            and len(self.declared_widths) != self.instance.num_clusters
        ):
            raise ValueError(
                f"expected {self.instance.num_clusters} declared widths, "
                f"got {len(self.declared_widths)}"
            )
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ValueError(f"policy names must be unique, got {names}")

    @property
    def widths(self) -> tuple[float, ...]:
        return (
            self.declared_widths
            if self.declared_widths is not None
            else self.instance.widths
        )

    def to_dict(self) -> dict:
        return {
            "schema": CONFIG_SCHEMA,
            "name": self.name,
            "instance": self.instance.to_dict(),
            "declared_widths": None
            if self.declared_widths is None
            else list(self.declared_widths),
            "policies": [p.to_dict() for p in self.policies],
            "horizon": self.horizon,
            "replications": self.replications,
            "base_seed": self.base_seed,
            "grid_points": self.grid_points,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir: "Path | None" = None) -> "ExperimentConfig":
        schema = d.get("schema", CONFIG_SCHEMA)
        if schema != CONFIG_SCHEMA:
            raise ValueError(f"unsupported config schema {schema!r}")
        inst = d.get("instance")
        if isinstance(inst, str):
            path = Path(inst)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            instance = ClusteredInstance.from_json(path)
        elif isinstance(inst, dict):
            instance = ClusteredInstance.from_dict(inst)
        else:
            raise ValueError("config needs an 'instance' (inline dict or file path)")
        widths = d.get("declared_widths")
        return cls(
            name=str(d.get("name", "instance")),
            instance=instance,
            policies=tuple(PolicySpec.from_dict(p) for p in d.get("policies", [])),
            horizon=int(d["horizon"]),
            replications=int(d["replications"]),
            base_seed=int(d["base_seed"]),
            declared_widths=None if widths is None else tuple(widths),
            grid_points=int(d.get("grid_points", 100)),
            out_dir=d.get("out_dir"),
        )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh), base_dir=path.parent)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["base_seed"] = args.seed
    if getattr(args, "reps", None) is not None:
        updates["replications"] = args.reps
    if getattr(args, "horizon", None) is not None:
        updates["horizon"] = args.horizon
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _check_instance(cfg: ExperimentConfig, strict: bool) -> None:
    report = validate(cfg.instance, "strict" if strict else "advisory", widths=cfg.widths)
    if not report.ok:
        for c, spread, width in report.violations:
            print(
                f"note: cluster {c} spread {spread:.6g} not < declared width {width:.6g}",
                file=sys.stderr,
            )


def _resolve_out_dir(cfg: ExperimentConfig, args) -> Path:
    out = args.out or cfg.out_dir or f"results/{cfg.name}"
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _record_config(cfg: ExperimentConfig, out_dir: Path) -> None:
    resolved = cfg.to_dict()
    digest = hashlib.sha256(
        json.dumps(resolved, sort_keys=True).encode()
    ).hexdigest()
    payload = {"config": resolved, "sha256": digest}
    target = out_dir / "resolved_config.json"
    if target.exists():
        try:
            previous = json.loads(target.read_text())
        except json.JSONDecodeError:
            previous = None
        if previous is not None and previous.get("sha256") != digest:
            print(
                f"warning: config drift in {out_dir} "
                f"(was {previous.get('sha256', '?')[:12]}, now {digest[:12]})",
                file=sys.stderr,
            )
    target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _safe_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-." else "_" for ch in name)


def _write_trace_csv(path: Path, cfg, summary: MonteCarloSummary) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "instance_id", "replication", "seed", "n", "pseudo_regret"])
        for rep, trace in enumerate(summary.traces):
            for n, r in zip(trace.grid, trace.pseudo_regret):
                w.writerow([summary.policy, cfg.name, rep, trace.seed, int(n), repr(float(r))])


def _write_summary_csv(path: Path, cfg, summaries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "instance_id", "n", "mean_regret", "stderr", "replications"])
        for s in summaries:
            for n, m, se in zip(s.grid, s.mean_regret, s.stderr):
                w.writerow([s.policy, cfg.name, int(n), repr(float(m)), repr(float(se)), s.replications])


def _write_pulls_csv(path: Path, cfg, summaries, predictions) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "cluster", "arm", "mean_pulls", "predicted_pulls"])
        for s in summaries:
            pred = predictions.get(s.policy, {})
            flat = 0
            for c, cl in enumerate(cfg.instance.clusters):
                for k in range(cl.size):
                    p = pred.get((c, k))
                    w.writerow(
                        [
                            s.policy,
                            c,
                            k,
                            repr(float(s.mean_pulls[flat])),
                            "" if p is None else repr(float(p)),
                        ]
                    )
                    flat += 1


def cmd_bound(args) -> int:
    cfg = load_config(args.config)
    try:
        _check_instance(cfg, args.strict_validate)
    except ConstraintViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = _resolve_out_dir(cfg, args)
    try:
        report = clus_lower_bound(cfg.instance, cfg.widths)
    except (DegenerateDivergence, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    payload = {"name": cfg.name, **report.to_dict()}
    path = out_dir / "bound_report.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"classical: {report.classical:.6f}")
    print(f"lower:     {report.lower:.6f}")
    print(f"upper:     {report.upper:.6f}")
    for t, lp in zip(report.cluster_terms, report.lp_values):
        lp_txt = "skipped" if lp is None else f"{lp:.6f}"
        print(
            f"cluster {t.cluster}: chosen={t.chosen} "
            f"allarms={t.term_allarms:.6f} minarm={t.term_minarm:.6f} lp={lp_txt}"
        )
    print(f"wrote {path}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    try:
        _check_instance(cfg, args.strict_validate)
    except ConstraintViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = _resolve_out_dir(cfg, args)
    _record_config(cfg, out_dir)
    grid = geometric_grid(cfg.horizon, cfg.grid_points)
    summaries = []
    predictions = {}
    for spec in cfg.policies:
        summary = run_batch(
            cfg.instance,
            spec,
            cfg.horizon,
            cfg.replications,
            cfg.base_seed,
            widths=cfg.widths,
            grid=grid,
            n_jobs=args.jobs,
            keep_traces=True,
        )
        _write_trace_csv(out_dir / f"trace_{_safe_name(summary.policy)}.csv", cfg, summary)
        if spec.kind == "clusucb":
            run_widths = spec.widths if spec.widths is not None else cfg.widths
            try:
                diag = expected_pull_check(summary, cfg.instance, run_widths)
                log_t = math.log(cfg.horizon)
                predictions[summary.policy] = {
                    (r.cluster, r.arm): r.predicted_per_log_t * log_t for r in diag.rows
                }
            except DegenerateDivergence:
                predictions[summary.policy] = {}
        summaries.append(summary)
        print(
            f"{summary.policy}: final mean regret "
            f"{summary.mean_regret[-1]:.3f} +- {summary.stderr[-1]:.3f} "
            f"({cfg.replications} reps)"
        )
    _write_summary_csv(out_dir / "summary.csv", cfg, summaries)
    _write_pulls_csv(out_dir / "pulls.csv", cfg, summaries, predictions)
    print(f"wrote {out_dir}/summary.csv")
    return 0


def _read_summary_csv(path: Path):
    series = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"policy", "instance_id", "n", "mean_regret", "stderr"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: not a summary CSV (columns {reader.fieldnames})")
        for row in reader:
            key = row["policy"]
            series.setdefault(key, []).append(
                (int(row["n"]), float(row["mean_regret"]), float(row["stderr"]))
            )
    if not series:
        raise ValueError(f"{path}: no data rows")
    return series


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    all_series = []
    try:
        per_file = [(Path(p), _read_summary_csv(Path(p))) for p in args.summaries]
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    names = [n for _, s in per_file for n in s]
    duplicated = len(names) != len(set(names))
    for path, series in per_file:
        for name, rows in series.items():
            label = f"{name} ({path.stem})" if duplicated else name
            rows.sort()
            all_series.append((label, rows))

    plt.rcParams["svg.fonttype"] = "none"
    plt.rcParams["svg.hashsalt"] = "clusbandit"
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label, rows in all_series:
        n = [r[0] for r in rows]
        mean = [r[1] for r in rows]
        lo = [m - s for _, m, s in rows]
        hi = [m + s for _, m, s in rows]
        (line,) = ax.plot(n, mean, label=label)
        ax.fill_between(n, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
    if args.bound is not None:
        n_max = max(r[0] for _, rows in all_series for r in rows)
        xs = [max(2, int(x)) for x in geometric_grid(n_max, 200)]
        ax.plot(
            xs,
            [args.bound * math.log(x) for x in xs],
            linestyle="--",
            color="black",
            label=f"{args.bound:.3g} log n",
        )
    ax.set_xscale("log")
    ax.set_xlabel("round n")
    ax.set_ylabel("mean pseudo-regret")
    if args.title:
        ax.set_title(args.title)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clusbandit",
        description="Clustered Bernoulli bandit experiments: bounds, simulation, plots.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_bound = sub.add_parser("bound", help="compute regret-bound constants")
    p_bound.add_argument("--config", required=True, help="experiment config JSON")
    p_bound.add_argument("--out", help="output directory")
    p_bound.add_argument("--strict-validate", action="store_true")
    p_bound.set_defaults(func=cmd_bound)

    p_sim = sub.add_parser("simulate", help="run Monte Carlo regret batches")
    p_sim.add_argument("--config", required=True, help="experiment config JSON")
    p_sim.add_argument("--out", help="output directory")
    p_sim.add_argument("--strict-validate", action="store_true")
    p_sim.add_argument("--seed", type=int, help="override base seed")
    p_sim.add_argument("--reps", type=int, help="override replication count")
    p_sim.add_argument("--horizon", type=int, help="override horizon")
    p_sim.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p_sim.set_defaults(func=cmd_simulate)

    p_plot = sub.add_parser("plot", help="plot summary CSVs as SVG")
    p_plot.add_argument("summaries", nargs="+", help="summary CSV files")
    p_plot.add_argument("--out", required=True, help="output SVG path")
    p_plot.add_argument("--bound", type=float, help="overlay C * log(n) reference")
    p_plot.add_argument("--title", help="chart title")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
