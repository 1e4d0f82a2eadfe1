"""Command-line front end wiring the pipeline into reproducible runs.

Subcommands: synth, preprocess, features, train, effort, report. Every run
writes a ``run_config.json`` with its resolved options next to its outputs.
Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import __version__
from .errors import DataError
from .features import FeatureSet, assemble, write_feature_table
from .ingest import (
    load_dataset,
    load_intensity_trials,
    read_dataset_meta,
    write_dataset,
)
from .ml import (
    ClassifierFamily,
    ClassifierSpec,
    CvResult,
    cross_validate,
    read_predictions,
    write_predictions,
)
from .effort import (
    compare,
    effort_points,
    read_effort_csv,
    summarize_segments,
    write_agreement,
    write_effort_csv,
)
from .preprocess import (
    DEFAULT_BASELINE_SAMPLES,
    DEFAULT_SATURATION_CEILING,
    DEFAULT_VARIANCE_FLOOR,
    preprocess_dataset,
)
from .synth import SynthSpec, generate

ENV_OUT = "NEUROEFFORT_OUT"

_FEATURE_CHOICES = [fs.value for fs in FeatureSet]
_MODEL_CHOICES = [f.value for f in ClassifierFamily]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems via exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.prog}: {message}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument(
        "--config",
        type=Path,
        default=None,
        help="JSON file of option defaults (keys are option names with "
        "underscores); explicit flags win",
    )
    p.add_argument(
        "-o",
        "--out",
        type=Path,
        default=None,
        help=f"output directory (default: a command-named directory under "
        f"${ENV_OUT} or the working directory)",
    )


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(
        prog="neuroeffort",
        description="Oxygenation-based cognitive effort estimation pipeline.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    sub_map: dict[str, _Parser] = {}

    p = sub.add_parser(
        "synth", help="generate a synthetic dataset with planted effects"
    )
    sub_map["synth"] = p
    _add_common(p)
    p.add_argument(
        "--preset",
        choices=["default", "high_snr"],
        default="default",
        help="parameter preset; individual flags override preset values",
    )
    p.add_argument("--participants", type=int, default=None)
    p.add_argument("--effect-size", type=float, default=None)
    p.add_argument("--noise-sd", type=float, default=None)
    p.add_argument("--drift-slope-range", type=float, default=None)
    p.add_argument("--cardiac-amp", type=float, default=None)
    p.add_argument("--respiration-amp", type=float, default=None)
    p.add_argument("--label-rate", type=float, default=None)
    p.add_argument("--region-contrast", type=float, default=None)
    p.add_argument(
        "--emit",
        choices=["hbo", "raw_intensity"],
        default=None,
        help="write oxygenation windows (default) or two-wavelength intensities",
    )
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser(
        "preprocess", help="filter/convert/detrend a dataset directory"
    )
    sub_map["preprocess"] = p
    _add_common(p)
    p.add_argument("input", type=Path, help="dataset directory to process")
    p.add_argument("--baseline-samples", type=int, default=DEFAULT_BASELINE_SAMPLES)
    p.add_argument("--variance-floor", type=float, default=DEFAULT_VARIANCE_FLOOR)
    p.add_argument(
        "--saturation-ceiling", type=float, default=DEFAULT_SATURATION_CEILING
    )
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("features", help="extract a feature table CSV")
    sub_map["features"] = p
    _add_common(p)
    p.add_argument("input", type=Path, help="oxygenation dataset directory")
    p.add_argument(
        "--feature-set", choices=_FEATURE_CHOICES, default="st_fc", dest="feature_set"
    )
    p.add_argument(
        "--exclude-session-break",
        action="store_true",
        help="drop temporal difference rows that span the between-session break",
    )
    p.set_defaults(func=cmd_features)

    p = sub.add_parser(
        "train", help="participant-grouped cross-validation of one classifier"
    )
    sub_map["train"] = p
    _add_common(p)
    p.add_argument("input", type=Path, help="oxygenation dataset directory")
    p.add_argument(
        "--feature-set", choices=_FEATURE_CHOICES, default="st_fc", dest="feature_set"
    )
    p.add_argument("--model", choices=_MODEL_CHOICES, default="rf")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1, help="worker threads for folds")
    p.add_argument(
        "--exclude-session-break",
        action="store_true",
        help="drop temporal difference rows that span the between-session break",
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser(
        "effort", help="per-segment efficiency/involvement coordinates"
    )
    sub_map["effort"] = p
    _add_common(p)
    p.add_argument("input", type=Path, help="oxygenation dataset directory")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument(
        "--predictions",
        type=Path,
        default=None,
        help="predictions CSV from the train command; enables the agreement report",
    )
    source.add_argument(
        "--actual",
        action="store_true",
        help="use the dataset's actual labels only",
    )
    p.add_argument(
        "--effort-mode",
        choices=["reciprocal", "negation"],
        default="reciprocal",
        dest="effort_mode",
    )
    p.add_argument(
        "--group-by",
        choices=["all", "segment"],
        default="all",
        dest="group_by",
        help="standardization group for the z-scores",
    )
    p.set_defaults(func=cmd_effort)

    p = sub.add_parser(
        "report", help="consolidate train/effort runs into tables and plot data"
    )
    sub_map["report"] = p
    _add_common(p)
    p.add_argument(
        "runs", type=Path, nargs="+", help="train and/or effort output directories"
    )
    p.add_argument(
        "--plot",
        action="store_true",
        help="also render a quadrant scatter PNG (requires matplotlib)",
    )
    p.set_defaults(func=cmd_report)

    return parser, sub_map


def _resolve_out(args: argparse.Namespace, default_name: str) -> Path:
    if args.out is not None:
        out = args.out
    else:
        out = Path(os.environ.get(ENV_OUT) or ".") / default_name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run_config(out: Path, command: str, payload: dict) -> None:
    doc = {"tool": "neuroeffort", "version": __version__, "command": command}
    doc.update(payload)
    with open(out / "run_config.json", "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True, default=str)
        f.write("\n")


def cmd_synth(args: argparse.Namespace) -> int:
    field_map = {
        "participants": "n_participants",
        "effect_size": "effect_size",
        "noise_sd": "noise_sd",
        "drift_slope_range": "drift_slope_range",
        "cardiac_amp": "cardiac_amp",
        "respiration_amp": "respiration_amp",
        "label_rate": "label_rate",
        "region_contrast": "region_contrast",
        "emit": "emit",
    }
    overrides = {
        field: getattr(args, dest)
        for dest, field in field_map.items()
        if getattr(args, dest) is not None
    }
    if args.preset == "high_snr":
        spec = SynthSpec.high_snr(seed=args.seed)
        spec = dataclasses.replace(spec, **overrides)
    else:
        spec = SynthSpec(seed=args.seed, **overrides)
    result = generate(spec)
    out = _resolve_out(args, "dataset")
    result.write(out)
    _write_run_config(out, "synth", {"spec": spec.to_dict()})
    n0, n1 = result.dataset.class_counts()
    print(
        f"wrote {len(result.dataset)} trials ({n1} correct, {n0} incorrect, "
        f"emit={spec.emit}) to {out}"
    )
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    meta = read_dataset_meta(args.input)
    signal = meta.get("signal", "hbo")
    if signal == "raw_intensity":
        data: object = load_intensity_trials(args.input)
    elif signal == "hbo":
        data = load_dataset(args.input)
    else:
        raise DataError(f"{args.input}: unknown signal kind {signal!r}")
    processed = preprocess_dataset(
        data,
        baseline_samples=args.baseline_samples,
        variance_floor=args.variance_floor,
        saturation_ceiling=args.saturation_ceiling,
    )
    out = _resolve_out(args, "processed")
    write_dataset(processed, out)
    _write_run_config(
        out,
        "preprocess",
        {
            "input": str(args.input),
            "signal": signal,
            "baseline_samples": args.baseline_samples,
            "variance_floor": args.variance_floor,
            "saturation_ceiling": args.saturation_ceiling,
        },
    )
    masked = sum(int((~t.channel_mask).sum()) for t in processed.trials)
    print(
        f"processed {len(processed)} trials ({signal} input, "
        f"{masked} channel rejections) into {out}"
    )
    return 0


def cmd_features(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.input)
    table = assemble(
        args.feature_set,
        dataset,
        include_session_break=not args.exclude_session_break,
    )
    out = _resolve_out(args, "features")
    path = write_feature_table(table, out / f"features_{table.feature_set_id.value}.csv")
    _write_run_config(
        out,
        "features",
        {
            "input": str(args.input),
            "feature_set": table.feature_set_id.value,
            "include_session_break": not args.exclude_session_break,
            "rows": len(table),
            "columns": len(table.names),
        },
    )
    print(f"wrote {len(table)} rows x {len(table.names)} features to {path}")
    return 0


def _write_metrics_csv(result: CvResult, path: Path) -> None:
    columns = (
        "scope",
        "fold",
        "accuracy",
        "precision_weighted",
        "recall_weighted",
        "f1_weighted",
        "true0_pred0",
        "true0_pred1",
        "true1_pred0",
        "true1_pred1",
    )
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(columns)

        def row(scope: str, fold: str, m) -> list:
            (c00, c01), (c10, c11) = m.confusion
            return [
                scope,
                fold,
                f"{m.accuracy:.17g}",
                f"{m.precision_weighted:.17g}",
                f"{m.recall_weighted:.17g}",
                f"{m.f1_weighted:.17g}",
                c00,
                c01,
                c10,
                c11,
            ]

        for detail in result.folds:
            writer.writerow(row("fold", str(detail.fold), detail.metrics))
        writer.writerow(row("pooled", "", result.pooled))


def cmd_train(args: argparse.Namespace) -> int:
    if args.folds < 2:
        raise _UsageError("--folds must be at least 2")
    if args.jobs < 1:
        raise _UsageError("--jobs must be at least 1")
    dataset = load_dataset(args.input)
    spec = ClassifierSpec(ClassifierFamily.coerce(args.model))
    result = cross_validate(
        dataset,
        args.feature_set,
        spec,
        seed=args.seed,
        n_splits=args.folds,
        jobs=args.jobs,
        include_session_break=not args.exclude_session_break,
    )
    out = _resolve_out(args, "train")
    write_predictions(result.predictions, out / "predictions.csv")
    _write_metrics_csv(result, out / "metrics.csv")
    _write_run_config(
        out, "train", {"input": str(args.input), "jobs": args.jobs, **result.manifest()}
    )
    m = result.pooled
    print(
        f"{args.model} on {args.feature_set}: pooled accuracy {m.accuracy:.4f}, "
        f"precision {m.precision_weighted:.4f}, recall {m.recall_weighted:.4f}, "
        f"f1 {m.f1_weighted:.4f} ({len(result.predictions)} predictions) -> {out}"
    )
    return 0


def cmd_effort(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.input)
    actual = effort_points(
        summarize_segments(dataset), mode=args.effort_mode, group_by=args.group_by
    )
    out = _resolve_out(args, "effort")
    write_effort_csv(actual, out / "effort_actual.csv")
    payload: dict = {
        "input": str(args.input),
        "effort_mode": args.effort_mode,
        "group_by": args.group_by,
        "segments": len(actual),
    }
    if args.predictions is not None:
        rows = read_predictions(args.predictions)
        predicted_map = {r.key: r.y_pred for r in rows}
        predicted = effort_points(
            summarize_segments(dataset, predicted=predicted_map),
            mode=args.effort_mode,
            group_by=args.group_by,
        )
        write_effort_csv(predicted, out / "effort_predicted.csv")
        report = compare(actual, predicted)
        write_agreement(report, out / "agreement.csv")
        payload["predictions"] = str(args.predictions)
        payload["agreement"] = report.as_dict()
        print(report)
    else:
        print(f"wrote {len(actual)} actual effort points to {out}")
    _write_run_config(out, "effort", payload)
    return 0


def _read_pooled_metrics(run_dir: Path) -> dict:
    with open(run_dir / "run_config.json", encoding="utf-8") as f:
        config = json.load(f)
    if config.get("command") != "train":
        raise DataError(f"{run_dir}: run_config.json is not from a train run")
    with open(run_dir / "metrics.csv", newline="", encoding="utf-8") as f:
        pooled = [r for r in csv.DictReader(f) if r["scope"] == "pooled"]
    if len(pooled) != 1:
        raise DataError(f"{run_dir}/metrics.csv: expected exactly one pooled row")
    row = pooled[0]
    return {
        "feature_set": config["feature_set"],
        "model": config["classifier"]["family"],
        "accuracy": float(row["accuracy"]),
        "precision_weighted": float(row["precision_weighted"]),
        "recall_weighted": float(row["recall_weighted"]),
        "f1_weighted": float(row["f1_weighted"]),
    }


_GRID_METRICS = ("accuracy", "precision_weighted", "recall_weighted", "f1_weighted")


def _write_grid(entries: list[dict], out: Path) -> None:
    entries = sorted(entries, key=lambda e: (e["feature_set"], e["model"]))
    seen = set()
    for e in entries:
        key = (e["feature_set"], e["model"])
        if key in seen:
            raise DataError(f"duplicate grid cell for {key[0]} x {key[1]}")
        seen.add(key)
    with open(out / "grid.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(("feature_set", "model") + _GRID_METRICS)
        for e in entries:
            writer.writerow(
                [e["feature_set"], e["model"]]
                + [f"{e[m]:.17g}" for m in _GRID_METRICS]
            )

    feature_sets = sorted({e["feature_set"] for e in entries})
    models = sorted({e["model"] for e in entries})
    cells = {(e["feature_set"], e["model"]): e for e in entries}
    lines = []
    for metric in _GRID_METRICS:
        lines.append(metric)
        width = max([len("feature_set")] + [len(fs) for fs in feature_sets]) + 2
        header = "feature_set".ljust(width) + "".join(m.ljust(8) for m in models)
        lines.append(header)
        for fs in feature_sets:
            row = fs.ljust(width)
            for m in models:
                e = cells.get((fs, m))
                row += (f"{e[metric]:.4f}" if e else "-").ljust(8)
            lines.append(row)
        lines.append("")
    with open(out / "grid.txt", "w", encoding="utf-8") as f:
        f.write("\n".join(lines))


_COORD_COLUMNS = (
    "run",
    "source",
    "participant_id",
    "segment",
    "score",
    "ce_z",
    "p_z",
    "rne",
    "rni",
    "state",
)


def _collect_coordinates(effort_dirs: list[Path]) -> list[list]:
    rows = []
    for d in effort_dirs:
        for source, name in (("actual", "effort_actual.csv"), ("predicted", "effort_predicted.csv")):
            path = d / name
            if not path.is_file():
                continue
            for pt in read_effort_csv(path):
                rows.append(
                    [
                        d.name,
                        source,
                        pt.participant_id,
                        pt.segment,
                        pt.score,
                        f"{pt.ce_z:.17g}",
                        f"{pt.p_z:.17g}",
                        f"{pt.rne:.17g}",
                        f"{pt.rni:.17g}",
                        pt.state.value,
                    ]
                )
    return rows


def _write_plot(coord_rows: list[list], path: Path) -> None:
    try:
        import matplotlib
    except ImportError:
        raise DataError(
            "matplotlib is not installed; install the 'plot' extra to use --plot"
        ) from None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    styles = {
        "actual": {"marker": "o", "color": "tab:blue"},
        "predicted": {"marker": "x", "color": "tab:orange"},
    }
    lim = 1.0
    for source, style in styles.items():
        xs = [float(r[5]) for r in coord_rows if r[1] == source]
        ys = [float(r[6]) for r in coord_rows if r[1] == source]
        if xs:
            ax.scatter(xs, ys, label=source, alpha=0.7, **style)
            lim = max([lim] + [abs(v) for v in xs + ys])
    lim *= 1.1
    diag = [-lim, lim]
    ax.plot(diag, diag, "k--", linewidth=0.8)
    ax.plot(diag, [lim, -lim], "k--", linewidth=0.8)
    ax.axhline(0.0, color="gray", linewidth=0.5)
    ax.axvline(0.0, color="gray", linewidth=0.5)
    ax.set_xlim(-lim, lim)
    ax.set_ylim(-lim, lim)
    # x-axis carries the standardized effort coordinate (see README note on
    # the alternative plain z-score labeling)
    ax.set_xlabel("CE_z")
    ax.set_ylabel("P_z")
    ax.set_title("Efficiency plane: quadrant states")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def cmd_report(args: argparse.Namespace) -> int:
    train_dirs = []
    effort_dirs = []
    for d in args.runs:
        if (d / "metrics.csv").is_file():
            train_dirs.append(d)
        elif (d / "effort_actual.csv").is_file():
            effort_dirs.append(d)
        else:
            raise DataError(f"{d}: neither a train nor an effort run directory")
    out = _resolve_out(args, "report")
    written = []
    if train_dirs:
        _write_grid([_read_pooled_metrics(d) for d in train_dirs], out)
        written += ["grid.csv", "grid.txt"]
    coord_rows = _collect_coordinates(effort_dirs)
    if coord_rows:
        with open(out / "coordinates.csv", "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(_COORD_COLUMNS)
            writer.writerows(coord_rows)
        written.append("coordinates.csv")
    if args.plot:
        if not coord_rows:
            raise DataError("--plot needs at least one effort run directory")
        _write_plot(coord_rows, out / "quadrants.png")
        written.append("quadrants.png")
    _write_run_config(
        out,
        "report",
        {
            "runs": [str(d) for d in args.runs],
            "outputs": written,
            "plot": args.plot,
        },
    )
    print(f"report wrote {', '.join(written) or 'nothing'} to {out}")
    return 0


def _load_config(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            config = json.load(f)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(config, dict):
        raise DataError(f"{path}: config must be a JSON object")
    return config


def main(argv: list[str] | None = None) -> int:
    parser, sub_map = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None) is not None:
            config = _load_config(args.config)
            sub = sub_map[args.command]
            known = {a.dest for a in sub._actions}
            unknown = set(config) - known | {"config"} & set(config)
            if unknown:
                raise _UsageError(
                    f"config keys not recognized by '{args.command}': "
                    f"{sorted(unknown)}"
                )
            sub.set_defaults(**config)
            args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive catch-all
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
