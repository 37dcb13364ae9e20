"""Command-line entry point: ``transferplan <command> [options]``.

Commands: dist, correlate, fit, cluster, graph, simulate, report.  Every
command writes under ``--out`` and never touches its inputs.  Exit status
is 0 on success, 2 on invalid input and 3 when a computation is undefined.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import reports
from .correlation import (correlation_sweep, distance_transfer_correlation, load_score_matrix,
                          reports_to_csv, reports_to_json)
from .distances import (BASE_METRICS, all_base_matrices, canonical_metric, combined_distance,
                        load_distance_matrix, metric_correlation_matrix, parse_metric,
                        save_distance_matrix, shared_languages)
from .errors import ComputationError, TransferPlanError, ValidationError
from .features import FeatureClass, load_feature_table
from .fitting import MetricWeights, fit_weights, fits_to_csv, preset_dcomb
from .sim.scenarios import DIVERGENT_KNOBS, DIVERGENT_LAMBDA
from .selection import (Clustering, aggregate_discrepancies, build_relation_graph,
                        delta_report, delta_table_csv, graph_diameter, load_delta_csv,
                        load_runs_csv, pam, select_k)

log = logging.getLogger("transferplan")


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"input file not found: {p}")
    return p


def _load_tables(args) -> dict:
    specs = {}
    if args.feature_dir:
        d = Path(args.feature_dir)
        if not d.is_dir():
            raise ValidationError(f"feature directory not found: {d}")
        for fc in FeatureClass:
            p = d / f"{fc.value}.csv"
            if p.is_file():
                specs[fc] = p
    for item in args.features or []:
        cls, sep, path = item.partition("=")
        if not sep:
            raise ValidationError(f"--features expects CLASS=PATH, got {item!r}")
        try:
            specs[FeatureClass(cls)] = Path(path)
        except ValueError:
            raise ValidationError(f"unknown feature class {cls!r}") from None
    if not specs:
        raise ValidationError("no feature tables given (use --features CLASS=PATH or --feature-dir)")
    return {fc: load_feature_table(p, fc) for fc, p in specs.items()}


def _available_metrics(tables, requested):
    if requested:
        return [canonical_metric(m) for m in requested]
    return [m for m in BASE_METRICS if parse_metric(m)[1] in tables]


def _load_weights(args) -> MetricWeights | None:
    if getattr(args, "preset", False):
        return preset_dcomb()
    if getattr(args, "weights", None):
        d = json.loads(_require_file(args.weights).read_text())
        return MetricWeights(tuple(d["components"]), tuple(d["weights"]))
    return None


def _combined(tables, weights: MetricWeights):
    langs = shared_languages(list(tables.values()))
    mats = all_base_matrices(tables, weights.components, langs=langs)
    return combined_distance([(mats[c], w) for c, w in zip(weights.components, weights.weights)])


def cmd_dist(args) -> int:
    tables = _load_tables(args)
    metrics = _available_metrics(tables, args.metrics)
    langs = shared_languages(list(tables.values()))
    mats = all_base_matrices(tables, metrics, normalize_values=not args.no_normalize, langs=langs)
    out = Path(args.out)
    for name, dm in mats.items():
        out.mkdir(parents=True, exist_ok=True)
        save_distance_matrix(dm, out / f"{name}.csv")
    names = list(mats)
    corr = metric_correlation_matrix([mats[n] for n in names])
    lines = ["metric," + ",".join(names)]
    for n, row in zip(names, corr):
        lines.append(n + "," + ",".join("nan" if math.isnan(v) else repr(float(v)) for v in row))
    _write(out, "metric_correlation.csv", "\n".join(lines) + "\n")
    if args.svg:
        reports.heatmap(corr, names, names, out / "metric_correlation.svg",
                        title="metric-metric Pearson correlation", cbar_label="Pearson r",
                        center=0.0)
    print(f"wrote {len(mats)} distance matrices to {out}")
    return 0


def cmd_correlate(args) -> int:
    tables = _load_tables(args)
    S_list = [load_score_matrix(_require_file(p)) for p in args.scores]
    metrics = _available_metrics(tables, args.metrics)
    extra = []
    weights = _load_weights(args)
    if weights is not None:
        extra.append(_combined(tables, weights))
    reps = correlation_sweep(tables, S_list, metrics, exclude_self=not args.include_self,
                             extra=extra, pooled=args.pooled)
    out = Path(args.out)
    _write(out, "correlation.csv", reports_to_csv(reps))
    _write(out, "correlation.json", reports_to_json(reps))
    if args.svg:
        reports.correlation_bars([r for r in reps if r.error is None], out / "correlation.svg")
    failed = [r for r in reps if r.error]
    for r in failed:
        print(f"warning: {r.metric} {r.task}/{r.scale}: {r.error}", file=sys.stderr)
    print(f"wrote {len(reps)} correlation reports to {out}")
    return 0


def cmd_fit(args) -> int:
    out = Path(args.out)
    if args.preset:
        w = preset_dcomb()
        _write(out, "weights.json", json.dumps(
            {"components": list(w.components), "weights": list(w.weights)}, indent=2) + "\n")
        print(f"wrote preset weights to {out / 'weights.json'}")
        return 0
    tables = _load_tables(args)
    if not args.scores:
        raise ValidationError("fit needs --scores (or --preset)")
    S_list = [load_score_matrix(_require_file(p)) for p in args.scores]
    comps = args.components or list(preset_dcomb().components)
    langs = shared_languages(list(tables.values()))
    mats = all_base_matrices(tables, comps, langs=langs)
    components = [mats[canonical_metric(c)] for c in comps]
    joint = fit_weights(components, S_list, args.grid_step, exclude_self=not args.include_self)
    _write(out, "fit.json", joint.to_json())
    per = {}
    for S in S_list:
        per[S.setting] = fit_weights(components, [S], args.grid_step,
                                     exclude_self=not args.include_self)
    _write(out, "fit_settings.csv", fits_to_csv(per))
    if args.svg:
        reports.weight_bars(per, out / "fit_settings.svg")
    print(f"joint objective {joint.objective:.4f}; wrote {out / 'fit.json'}")
    return 0


def cmd_cluster(args) -> int:
    if args.matrix:
        D = load_distance_matrix(_require_file(args.matrix))
    else:
        tables = _load_tables(args)
        weights = _load_weights(args) or preset_dcomb()
        D = _combined(tables, weights)
    if args.k:
        c = pam(D, args.k, args.seed)
    else:
        _, c = select_k(D, args.min_size, args.seed)
    out = Path(args.out)
    _write(out, "clustering.json", c.to_json())
    print(f"k={c.k} medoids={','.join(c.medoids)} cost={c.cost:.6g}")
    return 0


def cmd_graph(args) -> int:
    c = Clustering.from_json(_require_file(args.clustering).read_text())
    g = build_relation_graph(c)
    out = Path(args.out)
    _write(out, "graph.json", g.to_json())
    _write(out, "graph.dot", g.to_dot())
    print(f"{len(g.nodes)} nodes, {len(g.edges())} edges, diameter {graph_diameter(g)}")
    return 0


def _scenario(args):
    from .sim import SyntheticTaskSpec, clustered_domains
    if args.scenario:
        return SyntheticTaskSpec.from_json(_require_file(args.scenario).read_text())
    return SyntheticTaskSpec(
        clustered_domains(args.clusters, args.per_cluster), input_dim=args.input_dim,
        samples_per_domain=args.samples, cluster_rotation=args.rotation,
        within_noise=args.within_noise, seed=args.seed, cluster_shift=args.cluster_shift,
        spurious=args.spurious, prior_shift=args.prior_shift)


def cmd_simulate(args) -> int:
    from dataclasses import replace

    from .sim import TrainConfig, curves_csv, evaluate_transfer, gen_synthetic, train
    base = _scenario(args)
    c = base.clustering
    graph = build_relation_graph(c)
    source_clusters = {int(s) for s in str(args.source_clusters).split(",")}
    sources = {l for i in source_clusters for l in c.members(i)}
    seeds = [args.seed] if args.seeds is None else [int(s) for s in str(args.seeds).split(",")]
    modes = [m.strip() for m in args.modes.split(",")]
    results = []
    for seed in seeds:
        spec = replace(base, seed=seed)
        train_sets = gen_synthetic(spec)
        test_sets = gen_synthetic(spec, "test")
        data = [d if d.domain in sources else d.unlabeled() for d in train_sets]
        evals = [d for d in test_sets if d.domain not in sources] or test_sets
        for mode in modes:
            cfg = TrainConfig(mode=mode, lam=args.lam, epochs=args.epochs, lr=args.lr,
                              batch_size=args.batch_size, width=args.width, depth=args.depth,
                              seed=seed, graph=graph if mode == "grda" else None,
                              ramp=not args.no_ramp, unlabeled_sources=args.unlabeled_sources)
            results.append(train(data, cfg, evals))
    out = Path(args.out)
    _write(out, "scenario.json", base.to_json())
    _write(out, "results.json", json.dumps([json.loads(r.to_json()) for r in results], indent=2) + "\n")
    _write(out, "curves.csv", curves_csv(results))
    for mode in modes:
        rows = ["seed,epoch,task_loss"]
        for r in results:
            if r.mode == mode:
                rows += [f"{r.seed},{e},{v!r}" for e, v in enumerate(r.task_loss)]
        _write(out, f"curves_{mode}.csv", "\n".join(rows) + "\n")
    if "erm" in modes and len(modes) > 1:
        rep = evaluate_transfer(results, c)
        _write(out, "transfer_deltas.csv", delta_table_csv([rep]))
        if args.svg:
            reports.delta_heatmap(rep, out / "transfer_deltas.svg")
    if args.svg:
        reports.loss_curves(results, out / "curves.svg")
    for mode in modes:
        accs = [r.target_accuracy() for r in results if r.mode == mode]
        print(f"{mode}: mean target accuracy {100 * np.mean(accs):.2f}")
    return 0


def cmd_report(args) -> int:
    if bool(args.deltas) == bool(args.runs):
        raise ValidationError("report needs exactly one of --deltas or --runs")
    if args.deltas:
        reps = load_delta_csv(_require_file(args.deltas).read_text(encoding="utf-8"))
    else:
        grouped = load_runs_csv(_require_file(args.runs).read_text(encoding="utf-8"))
        reps = [delta_report(runs, task) for task, runs in grouped.items()]
    out = Path(args.out)
    _write(out, "table.csv", delta_table_csv(reps))
    for r in reps:
        for msg in aggregate_discrepancies(r):
            print(f"warning: aggregate differs from recomputed mean: {msg}", file=sys.stderr)
        if args.svg:
            safe = "".join(ch if ch.isalnum() else "_" for ch in r.task) or "table"
            reports.delta_heatmap(r, out / f"table_{safe}.svg")
    print(f"wrote {out / 'table.csv'}")
    return 0


def _feature_args(p):
    p.add_argument("--features", action="append", metavar="CLASS=PATH",
                   help="feature table for one class; repeatable")
    p.add_argument("--feature-dir", help="directory holding <class>.csv feature tables")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default: 0)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of option defaults")
    common.add_argument("--svg", action="store_true", default=argparse.SUPPRESS,
                        help="also render SVG figures")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="transferplan", parents=[common],
                                     description="Typological transfer planning toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("dist", parents=[common], help="compute distance matrices")
    _feature_args(p)
    p.add_argument("--metrics", nargs="+", help="metric ids (default: all available)")
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_dist)
    subs["dist"] = p

    p = sub.add_parser("correlate", parents=[common], help="distance-transfer correlation")
    _feature_args(p)
    p.add_argument("--scores", nargs="+", required=True, help="transfer score CSVs")
    p.add_argument("--metrics", nargs="+")
    p.add_argument("--weights", help="weights JSON adding a combined metric")
    p.add_argument("--preset", action="store_true", help="add the d_comb preset as combined metric")
    p.add_argument("--include-self", action="store_true", help="keep self-transfer pairs")
    p.add_argument("--pooled", action="store_true",
                   help="one correlation over all pairs instead of the per-source average")
    p.set_defaults(func=cmd_correlate)
    subs["correlate"] = p

    p = sub.add_parser("fit", parents=[common], help="fit combined-metric weights")
    _feature_args(p)
    p.add_argument("--scores", nargs="+")
    p.add_argument("--components", nargs="+", help="component metric ids (2-6)")
    p.add_argument("--grid-step", type=float, default=0.05)
    p.add_argument("--preset", action="store_true", help="write the d_comb preset weights")
    p.add_argument("--include-self", action="store_true")
    p.set_defaults(func=cmd_fit)
    subs["fit"] = p

    p = sub.add_parser("cluster", parents=[common], help="k-medoids clustering")
    _feature_args(p)
    p.add_argument("--matrix", help="distance matrix CSV (instead of feature tables)")
    p.add_argument("--weights", help="weights JSON for the combined metric")
    p.add_argument("--preset", action="store_true")
    p.add_argument("--k", type=int, help="fixed cluster count (default: select by --min-size)")
    p.add_argument("--min-size", type=int, default=3)
    p.set_defaults(func=cmd_cluster)
    subs["cluster"] = p

    p = sub.add_parser("graph", parents=[common], help="language relation graph")
    p.add_argument("--clustering", required=True, help="clustering JSON")
    p.set_defaults(func=cmd_graph)
    subs["graph"] = p

    p = sub.add_parser("simulate", parents=[common], help="synthetic adversarial transfer runs")
    p.add_argument("--scenario", help="scenario JSON (overrides the scenario flags)")
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--per-cluster", type=int, default=4)
    p.add_argument("--input-dim", type=int, default=8)
    p.add_argument("--samples", type=int, default=400)
    p.add_argument("--rotation", type=float, default=math.pi / 3)
    p.add_argument("--within-noise", type=float, default=0.0)
    # defaults reproduce the divergent two-cluster scenario; set all three to 0 for the plain task
    p.add_argument("--cluster-shift", type=float, default=DIVERGENT_KNOBS["cluster_shift"])
    p.add_argument("--spurious", type=float, default=DIVERGENT_KNOBS["spurious"])
    p.add_argument("--prior-shift", type=float, default=DIVERGENT_KNOBS["prior_shift"])
    p.add_argument("--source-clusters", default="0", help="comma-separated labeled cluster indices")
    p.add_argument("--modes", default="erm,dann,grda")
    p.add_argument("--seeds", help="comma-separated seeds (default: --seed)")
    p.add_argument("--lam", type=float, default=DIVERGENT_LAMBDA)
    p.add_argument("--no-ramp", action="store_true")
    p.add_argument("--unlabeled-sources", action="store_true",
                   help="also feed unlabeled source-domain batches to the adversary")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--depth", type=int, default=2)
    p.set_defaults(func=cmd_simulate)
    subs["simulate"] = p

    p = sub.add_parser("report", parents=[common], help="render delta tables")
    p.add_argument("--deltas", help="long-format delta CSV: task,config,scale,method,delta")
    p.add_argument("--runs", help="raw run CSV: task,config,kind,scale,f1")
    p.set_defaults(func=cmd_report)
    subs["report"] = p
    return parser, subs


_GLOBAL_DEFAULTS = {"out": "out", "seed": 0, "svg": False, "verbose": False, "config": None}


def parse_args(argv=None) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    config = {}
    if getattr(args, "config", None):
        try:
            config = json.loads(_require_file(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise ValidationError("config JSON must be an object")
        known = {a.dest for a in subs[args.command]._actions} | set(_GLOBAL_DEFAULTS)
        unknown = set(config) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        subs[args.command].set_defaults(**config)
        args = parser.parse_args(argv)
    for k, v in _GLOBAL_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, config.get(k, v))
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except TransferPlanError as exc:
        print(json.dumps({"error": "validation", "message": str(exc)}), file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(json.dumps({"error": "validation", "command": args.command, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except ComputationError as exc:
        print(json.dumps({"error": "computation", "command": args.command, "message": str(exc)}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
