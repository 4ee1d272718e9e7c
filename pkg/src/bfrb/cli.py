"""Command-line entry points for dataset validation, experiments and reports.

Exit codes: 0 success, 1 domain/validation failure, 2 I/O or config failure.
All artifacts are written atomically (temp file + rename) and embed the
resolved run configuration, so outputs are self-describing and re-runnable.
"""

from __future__ import annotations

import csv
import json
import os
import sys
import tempfile
from pathlib import Path

import click

from . import evaluation
from .errors import BfrbError
from .features import MODALITIES
from .ingest import AdapterConfig, load_dataset, load_session
from .models import ModelConfig
from .windowing import LabelSet, WindowSpec

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2

_DEFAULT_FLAGS = {
    "clean_only": False,
    "balance": "session",
    "rmssd": "stats",
    "hrv_threshold": 0.5,
}

_CONFIG_KEYS = {
    "dataset", "adapter", "window", "labels", "model", "cv",
    "ablation", "seed", "output", "flags", "matrix_params",
}


def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read config: {exc}") from exc
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise click.ClickException(f"unknown config keys: {sorted(unknown)}")
    flags = dict(_DEFAULT_FLAGS)
    unknown_flags = set(raw.get("flags", {})) - set(_DEFAULT_FLAGS)
    if unknown_flags:
        raise click.ClickException(f"unknown flags: {sorted(unknown_flags)}")
    flags.update(raw.get("flags", {}))
    raw["flags"] = flags
    if "seed" not in raw:
        raw["seed"] = int(os.environ.get("BFRB_SEED", "0"))
    return raw


def _resolve_labels(value) -> LabelSet:
    if isinstance(value, str):
        return LabelSet.named(value)
    from .ingest import Behavior
    return LabelSet.custom({Behavior(v) for v in value})


def _load_bundles(config: dict):
    adapter = AdapterConfig.load(config["adapter"]) if config.get("adapter") else None
    return load_dataset(config["dataset"], adapter)


def _roc_svg(reports, path: Path) -> None:
    """Minimal self-contained SVG of the ROC curve per report."""
    size, margin = 420, 45
    plot = size - 2 * margin
    colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{plot}" height="{plot}" '
        'fill="none" stroke="#333"/>',
        f'<line x1="{margin}" y1="{size - margin}" x2="{size - margin}" y2="{margin}" '
        'stroke="#bbb" stroke-dasharray="4"/>',
    ]
    for i, report in enumerate(reports):
        if not report.roc:
            continue
        pts = " ".join(
            f"{margin + fpr * plot:.1f},{size - margin - tpr * plot:.1f}"
            for _, fpr, tpr in report.roc
        )
        color = colors[i % len(colors)]
        label = "+".join(report.modalities)
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{margin + 6}" y="{margin + 16 + 14 * i}" font-size="11" '
            f'fill="{color}">{label}</text>'
        )
    parts.append(
        f'<text x="{size // 2 - 40}" y="{size - 10}" font-size="12">false positive rate</text>'
    )
    parts.append(
        f'<text x="14" y="{size // 2}" font-size="12" '
        f'transform="rotate(-90 14 {size // 2})">true positive rate</text>'
    )
    parts.append("</svg>")
    _atomic_write(path, "\n".join(parts) + "\n")


def _write_report(report, out_dir: Path, name: str, config: dict, plots: bool) -> None:
    payload = report.to_dict()
    payload["config"] = config
    _atomic_write(out_dir / f"{name}.json", json.dumps(payload, sort_keys=True, indent=1))
    lines = ["fold,n_test,defined,recall,auc,f1"]
    for f in report.folds:
        lines.append(
            f"{f.name},{f.n_test},{int(f.defined)},"
            f"{'' if f.recall is None else f'{f.recall:.6f}'},"
            f"{'' if f.auc is None else f'{f.auc:.6f}'},"
            f"{'' if f.f1 is None else f'{f.f1:.6f}'}"
        )
    _atomic_write(out_dir / f"{name}_folds.csv", "\n".join(lines) + "\n")
    roc_lines = ["threshold,fpr,tpr"]
    for thr, fpr, tpr in report.roc:
        roc_lines.append(f"{thr},{fpr:.6f},{tpr:.6f}")
    _atomic_write(out_dir / f"{name}_roc.csv", "\n".join(roc_lines) + "\n")
    if plots:
        _roc_svg([report], out_dir / f"{name}_roc.svg")


@click.group()
def main():
    """Anticipatory BFRB detection pipeline."""


@main.command()
@click.argument("dataset_root", type=click.Path())
@click.option("--adapter", type=click.Path(), default=None, help="Adapter config JSON.")
def validate(dataset_root, adapter):
    """Check every session under DATASET_ROOT against the schema invariants."""
    root = Path(dataset_root)
    if not root.is_dir():
        click.echo(f"error: {root} is not a directory", err=True)
        sys.exit(EXIT_IO)
    try:
        adapter_cfg = AdapterConfig.load(adapter) if adapter else None
    except (OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)

    session_dirs = sorted(
        p for p in root.iterdir() if p.is_dir() and (p / "recording.csv").exists()
    )
    if not session_dirs:
        click.echo("error: no session directories found", err=True)
        sys.exit(EXIT_IO)
    failures = 0
    for session_dir in session_dirs:
        try:
            bundle = load_session(session_dir, adapter_cfg)
        except BfrbError as exc:
            click.echo(f"FAIL {session_dir.name}: {exc.__class__.__name__}: {exc}")
            failures += 1
            continue
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_IO)
        click.echo(
            f"PASS {session_dir.name}: {len(bundle.recording.timestamps)} samples, "
            f"{len(bundle.events)} events, {len(bundle.stages)} stages"
        )
    sys.exit(EXIT_OK if failures == 0 else EXIT_DOMAIN)


def _run_single(config: dict, plots: bool) -> int:
    out_dir = Path(config.get("output", "out"))
    try:
        bundles = _load_bundles(config)
    except (OSError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_IO
    try:
        spec = WindowSpec(**config["window"])
        labels = _resolve_labels(config["labels"])
        model = ModelConfig(config["model"]["kind"], params=config["model"].get("params", {}))
        flags = config["flags"]
        subsets = config.get("ablation")
        if subsets:
            reports = evaluation.run_ablation_suite(
                bundles, spec, labels, model, config["cv"],
                subsets=[tuple(s) for s in subsets], seed=config["seed"],
                clean_only=flags["clean_only"], balance=flags["balance"],
                rmssd_mode=flags["rmssd"], hrv_threshold=flags["hrv_threshold"],
            )
            for report in reports:
                name = "report_" + "_".join(report.modalities)
                _write_report(report, out_dir, name, config, plots)
            if plots:
                _roc_svg(reports, out_dir / "roc_per_modality.svg")
            headline = reports[-1]
        else:
            headline = evaluation.run_experiment(
                bundles, spec, labels, model, config["cv"],
                seed=config["seed"],
                clean_only=flags["clean_only"], balance=flags["balance"],
                rmssd_mode=flags["rmssd"], hrv_threshold=flags["hrv_threshold"],
            )
            _write_report(headline, out_dir, "report", config, plots)
        mean_auc = headline.mean.get("auc")
        click.echo(
            f"{spec.tag} {labels.name} {model.kind} {config['cv']}: "
            f"mean AUC {'n/a' if mean_auc is None else f'{mean_auc:.3f}'}"
        )
        return EXIT_OK
    except (BfrbError, ValueError) as exc:
        click.echo(f"error: {exc.__class__.__name__}: {exc}", err=True)
        return EXIT_DOMAIN


@main.command()
@click.argument("config_path", type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--output", type=click.Path(), default=None, help="Override output dir.")
@click.option("--cv", type=click.Choice(["louo", "stratified"]), default=None)
@click.option("--clean-only/--all-positives", default=None)
@click.option("--balance", type=click.Choice(["session", "aggregate"]), default=None)
@click.option("--rmssd", type=click.Choice(["stats", "single"]), default=None)
@click.option("--hrv-threshold", type=float, default=None)
@click.option("--plots/--no-plots", default=True)
def run(config_path, seed, output, cv, clean_only, balance, rmssd, hrv_threshold, plots):
    """Run one experiment (or ablation suite) described by a JSON config."""
    config = _load_config(config_path)
    if seed is not None:
        config["seed"] = seed
    if output is not None:
        config["output"] = output
    if cv is not None:
        config["cv"] = cv
    if clean_only is not None:
        config["flags"]["clean_only"] = clean_only
    if balance is not None:
        config["flags"]["balance"] = balance
    if rmssd is not None:
        config["flags"]["rmssd"] = rmssd
    if hrv_threshold is not None:
        config["flags"]["hrv_threshold"] = hrv_threshold
    sys.exit(_run_single(config, plots))


@main.command()
@click.argument("config_path", type=click.Path())
@click.option("--plots/--no-plots", default=False)
def matrix(config_path, plots):
    """All label sets x window sizes x models x CV strategies, plus a summary table."""
    config = _load_config(config_path)
    out_dir = Path(config.get("output", "out"))
    try:
        bundles = _load_bundles(config)
    except (OSError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)

    flags = config["flags"]
    matrix_params = config.get("matrix_params", {})
    windows = [WindowSpec(60, 1), WindowSpec(300, 1)]
    label_names = ["all_compulsive", "face_touching", "skin_picking"]
    model_kinds = ["logistic", "random_forest", "gradient_boost"]
    strategies = ["louo", "stratified"]

    summary_rows = []
    any_error = False
    for strategy in strategies:
        for spec in windows:
            for label_name in label_names:
                for kind in model_kinds:
                    cell = f"{strategy}_{spec.tag}_{label_name}_{kind}"
                    model = ModelConfig(kind, params=matrix_params.get(kind, {}))
                    try:
                        report = evaluation.run_experiment(
                            bundles, spec, LabelSet.named(label_name), model, strategy,
                            seed=config["seed"],
                            clean_only=flags["clean_only"], balance=flags["balance"],
                            rmssd_mode=flags["rmssd"],
                            hrv_threshold=flags["hrv_threshold"],
                        )
                    except (BfrbError, ValueError) as exc:
                        any_error = True
                        summary_rows.append({
                            "strategy": strategy, "window": spec.tag,
                            "label_set": label_name, "model": kind,
                            "error": f"{exc.__class__.__name__}: {exc}",
                        })
                        continue
                    _write_report(report, out_dir / "cells", cell, config, plots)
                    row = {
                        "strategy": strategy, "window": spec.tag,
                        "label_set": label_name, "model": kind, "error": "",
                    }
                    for metric in ("recall", "auc", "f1"):
                        m, s = report.mean[metric], report.std[metric]
                        row[f"{metric}_mean"] = "" if m is None else f"{m:.3f}"
                        row[f"{metric}_std"] = "" if s is None else f"{s:.3f}"
                    summary_rows.append(row)
                    click.echo(
                        f"{cell}: AUC "
                        f"{row.get('auc_mean') or 'n/a'} ({row.get('auc_std') or '-'})"
                    )

    fields = [
        "strategy", "window", "label_set", "model",
        "recall_mean", "recall_std", "auc_mean", "auc_std", "f1_mean", "f1_std", "error",
    ]
    import io
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, restval="")
    writer.writeheader()
    writer.writerows(summary_rows)
    _atomic_write(out_dir / "summary.csv", buf.getvalue())
    sys.exit(EXIT_OK)


@main.command()
@click.argument("dataset_root", type=click.Path())
@click.option("--adapter", type=click.Path(), default=None)
@click.option("--output", type=click.Path(), default="out")
def stats(dataset_root, adapter, output):
    """Descriptive statistics: prevalence shares, stage physiology, per-participant."""
    try:
        adapter_cfg = AdapterConfig.load(adapter) if adapter else None
        bundles = load_dataset(dataset_root, adapter_cfg)
    except (OSError, FileNotFoundError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)
    except BfrbError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)

    report = evaluation.descriptive_stats_report(bundles)
    out_dir = Path(output)
    _atomic_write(out_dir / "stats.json", json.dumps(report, sort_keys=True, indent=1))
    lines = ["behavior,count,share"]
    ordered = sorted(
        report["behavior_counts"].items(), key=lambda kv: (-kv[1], kv[0])
    )
    for name, count in ordered:
        share = report["behavior_shares"][name]
        lines.append(f"{name},{count},{'' if share is None else f'{share:.3f}'}")
    _atomic_write(out_dir / "prevalence.csv", "\n".join(lines) + "\n")
    for name, count in ordered:
        share = report["behavior_shares"][name]
        pct = "n/a" if share is None else f"{100 * share:.1f}%"
        click.echo(f"{name}: {count} ({pct})")
    sys.exit(EXIT_OK)


@main.command()
@click.argument("config_path", type=click.Path())
def featurize(config_path):
    """Emit the feature-matrix CSV for the configured window spec and label set."""
    config = _load_config(config_path)
    out_dir = Path(config.get("output", "out"))
    try:
        bundles = _load_bundles(config)
    except (OSError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)
    try:
        spec = WindowSpec(**config["window"])
        labels = _resolve_labels(config["labels"])
        flags = config["flags"]
        matrix_obj, dropped = evaluation.prepare_feature_matrix(
            bundles, spec, labels, config["seed"],
            flags["clean_only"], flags["balance"], flags["rmssd"],
            flags["hrv_threshold"],
        )
    except (BfrbError, ValueError) as exc:
        click.echo(f"error: {exc.__class__.__name__}: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix_obj.to_csv(out_dir / "features.csv")
    click.echo(
        f"{len(matrix_obj)} vectors x {len(matrix_obj.feature_names)} features "
        f"({dropped} dropped by validity filter) -> {out_dir / 'features.csv'}"
    )
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
