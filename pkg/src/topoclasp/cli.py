"""Command-line interface.

Exit codes: 0 success, 2 dataset parse error, 3 configuration error,
4 training aborted, 5 gradient check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from topoclasp.errors import ConfigError, FormatError, IntegrityError
from topoclasp.train import (
    MODE_NAMES,
    ExperimentConfig,
    resolve_dataset_dir,
    run_ablation,
    run_experiment,
    run_filtration_study,
)

EXIT_PARSE, EXIT_CONFIG, EXIT_ABORT, EXIT_GRADCHECK = 2, 3, 4, 5

# flag -> config key
OVERRIDES = {
    "dataset_dir": str,
    "dataset": str,
    "mode": str,
    "filtration": str,
    "seed": int,
    "epochs": int,
    "batch": int,
    "folds": int,
    "lr": float,
    "alpha": float,
    "tau": float,
    "hidden": int,
    "layers": int,
    "scales": int,
    "thresholds": int,
    "contrast_on": str,
    "jobs": int,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of flat config keys")
    for key, kind in OVERRIDES.items():
        common.add_argument("--" + key.replace("_", "-"), dest=key, type=kind, default=None)
    common.add_argument("--out", help="output file (features) or directory (reports)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="topoclasp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    feats = sub.add_parser("features", parents=[common], help="dump topological vectors as CSV")
    feats.add_argument("--diagrams", help="directory for per-graph persistence diagram dumps")
    sub.add_parser("train", parents=[common], help="cross-validated training of one mode")
    sub.add_parser("ablate", parents=[common], help="Topo, GIN, Topo-GIN and GraphTCL")
    sub.add_parser("filtration-study", parents=[common], help="HKS vs degree vs closeness")
    sub.add_parser("gradcheck", parents=[common], help="finite-difference check of the full model")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the config file, then explicit flags."""
    values: dict = {}
    if args.config:
        try:
            values.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
        values.pop("out", None)
    for key in OVERRIDES:
        value = getattr(args, key)
        if value is not None:
            values[key] = value
    try:
        return ExperimentConfig.from_dict(values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _summary_header():
    print("variant\tfiltration\tmean\tstd\tfolds")


def _summary_row(name, report):
    print(
        f"{name}\t{report.config['filtration']}\t{100 * report.mean:.2f}\t"
        f"{100 * report.std:.2f}\t{len(report.accuracies)}"
    )


def cmd_features(args, config: ExperimentConfig) -> int:
    from topoclasp.filtration import quantile_thresholds, sublevel_filtration
    from topoclasp.graphs import parse_tu_dataset
    from topoclasp.persistence import reduce_boundary
    from topoclasp.vectorize import node_values, vectorize_graphs

    vconf = config.vectorize
    dataset = parse_tu_dataset(resolve_dataset_dir(config), config.dataset)
    matrix = vectorize_graphs(dataset.graphs, vconf, config.jobs)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["graph_index", "label"] + vconf.layout())
        for i, (g, row) in enumerate(zip(dataset.graphs, matrix)):
            writer.writerow([i, g.label] + [repr(float(v)) for v in row])
    finally:
        if args.out:
            out.close()
    if args.diagrams:
        folder = Path(args.diagrams)
        folder.mkdir(parents=True, exist_ok=True)
        for i, g in enumerate(dataset.graphs):
            if g.num_nodes == 0:
                continue
            vals = node_values(g, vconf)
            for s in range(vconf.scales):
                th = quantile_thresholds(vals[:, s], vconf.num_thresholds)
                diagram = reduce_boundary(sublevel_filtration(g, vals[:, s], th))
                (folder / f"graph{i}_scale{s}.txt").write_text(diagram.dump())
    return 0


def _out_dir(args) -> Path:
    return Path(args.out or "runs")


def cmd_train(args, config: ExperimentConfig) -> int:
    report = run_experiment(config)
    report.write(_out_dir(args), f"{config.dataset}_{config.mode}_{config.filtration}_seed{config.seed}")
    _summary_header()
    _summary_row(MODE_NAMES[config.mode], report)
    return EXIT_ABORT if report.partial else 0


def cmd_ablate(args, config: ExperimentConfig) -> int:
    reports = run_ablation(config)
    _summary_header()
    for mode, report in reports.items():
        report.write(_out_dir(args), f"{config.dataset}_{mode}_{config.filtration}_seed{config.seed}")
        _summary_row(MODE_NAMES[mode], report)
    return EXIT_ABORT if any(r.partial for r in reports.values()) else 0


def cmd_filtration_study(args, config: ExperimentConfig) -> int:
    study = run_filtration_study(config)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{config.dataset}_{config.mode}_filtrations_seed{config.seed}"
    (out / f"{stem}.json").write_text(json.dumps(study.to_dict(), indent=2) + "\n")
    print("variant\tfiltration\tmean\tstd\tfolds\trelative_drop")
    for name, report in study.reports.items():
        print(
            f"{MODE_NAMES[config.mode]}\t{name}\t{100 * report.mean:.2f}\t{100 * report.std:.2f}\t"
            f"{len(report.accuracies)}\t{100 * study.relative_drop(name):.2f}"
        )
    return EXIT_ABORT if any(r.partial for r in study.reports.values()) else 0


def cmd_gradcheck(args, config: ExperimentConfig) -> int:
    from topoclasp.diagnostics import full_model_gradcheck

    hidden = args.hidden or 8
    ok = True
    for contrast_on in ("zu", "proj"):
        report = full_model_gradcheck(config.seed, hidden, contrast_on, config.loss)
        print(f"[contrast_on={contrast_on}] {report.summary()}")
        ok &= report.passed
    print("PASS" if ok else "FAIL")
    return 0 if ok else EXIT_GRADCHECK


COMMANDS = {
    "features": cmd_features,
    "train": cmd_train,
    "ablate": cmd_ablate,
    "filtration-study": cmd_filtration_study,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config)
    except (FormatError, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
