"""Command-line entry points for dataset generation, statistics, benchmark
export, evaluation, calibration, and the review service."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import click

from .metrics import MockFeatureExtractor, MockPerceptualService, evaluate
from .pipeline import CatalogEntry, PipelineConfig
from .pipeline import resume as resume_run
from .pipeline import run as run_pipeline
from .store import (
    BenchmarkTaskKind,
    Manifest,
    assign_splits,
    compute_stats,
    export_benchmark_tasks,
    load_tasks,
    save_tasks,
)
from .synthetic import make_synthetic_catalog
from .verification import LabelLog


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Instruction-driven garment-editing dataset toolkit."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _load_catalog(path: str) -> list[CatalogEntry]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [CatalogEntry.from_dict(d) for d in data["entries"]]


def _load_resolved(manifest_path: str, storage_root: str | None) -> Manifest:
    """Load a manifest and rebase its relative image paths.

    Manifests live at <storage_root>/runs/<run_id>/manifest.jsonl, so the
    root defaults to two directories up unless given explicitly.
    """
    path = Path(manifest_path).resolve()
    if storage_root is None:
        storage_root = str(path.parents[2]
                           if path.parent.parent.name == "runs"
                           else path.parent)
    return Manifest.load(path).resolve_paths(storage_root)


@main.command("synth-catalog")
@click.option("--root", required=True, help="Storage root directory.")
@click.option("-n", "--count", default=50, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--width", default=96, show_default=True)
@click.option("--height", default=128, show_default=True)
def synth_catalog(root: str, count: int, seed: int, width: int,
                  height: int) -> None:
    """Generate a synthetic desk-scale catalog with attribute sidecars."""
    entries = make_synthetic_catalog(root, count, seed, (width, height))
    click.echo(f"wrote {len(entries)} catalog entries under {root}")


@main.command()
@click.option("--config", "config_path", required=True,
              help="YAML pipeline config.")
@click.option("--catalog", "catalog_path", required=True,
              help="catalog.json produced by synth-catalog (or compatible).")
@click.option("--run-id", default="run", show_default=True)
def generate(config_path: str, catalog_path: str, run_id: str) -> None:
    """Run the four-stage generation pipeline end to end."""
    config = PipelineConfig.from_file(config_path)
    catalog = _load_catalog(catalog_path)
    manifest = run_pipeline(config, catalog, run_id=run_id)
    out = Path(config.storage_root) / "runs" / run_id / "manifest.jsonl"
    click.echo(f"{len(manifest.records)} records -> {out}")


@main.command()
@click.option("--storage-root", required=True)
@click.option("--run-id", default="run", show_default=True)
def resume(storage_root: str, run_id: str) -> None:
    """Resume an interrupted run from its checkpoints."""
    manifest = resume_run(storage_root, run_id)
    click.echo(f"run {run_id} complete: {len(manifest.records)} records")


@main.command()
@click.option("--manifest", "manifest_path", required=True)
def stats(manifest_path: str) -> None:
    """Print dataset statistics over verified records."""
    click.echo(compute_stats(Manifest.load(manifest_path)).render())


@main.command("assign-splits")
@click.option("--manifest", "manifest_path", required=True)
@click.option("--split-table", "table_path", required=True,
              help="JSON mapping garment identity -> train|test.")
@click.option("--out", required=True)
def assign_splits_cmd(manifest_path: str, table_path: str, out: str) -> None:
    """Assign identity-level train/test splits."""
    manifest = Manifest.load(manifest_path)
    table = json.loads(Path(table_path).read_text(encoding="utf-8"))
    assign_splits(manifest, table).save(out)
    click.echo(f"split manifest -> {out}")


@main.command("export-tasks")
@click.option("--manifest", "manifest_path", required=True)
@click.option("--task", type=click.Choice([k.value for k in BenchmarkTaskKind]),
              required=True)
@click.option("--out", required=True)
@click.option("--storage-root", default=None,
              help="Base for relative image paths (default: inferred).")
def export_tasks(manifest_path: str, task: str, out: str,
                 storage_root: str | None) -> None:
    """Export inverse-editing benchmark tasks for the test split."""
    manifest = _load_resolved(manifest_path, storage_root)
    tasks = export_benchmark_tasks(manifest, BenchmarkTaskKind(task))
    save_tasks(tasks, out)
    click.echo(f"{len(tasks)} {task} tasks -> {out}")


@main.command("evaluate")
@click.option("--tasks", "tasks_path", required=True)
@click.option("--predictions", required=True,
              help="Directory of <task_id>.png predictions.")
@click.option("--out", default=None, help="Optional JSON report path.")
def evaluate_cmd(tasks_path: str, predictions: str, out: str | None) -> None:
    """Score model predictions against the benchmark ground truths."""
    tasks = load_tasks(tasks_path)
    report = evaluate(tasks, predictions, MockFeatureExtractor(),
                      MockPerceptualService())
    click.echo(report.render())
    if out:
        Path(out).write_text(json.dumps(report.to_dict(), indent=2),
                             encoding="utf-8")


@main.command("calibrate")
@click.option("--manifest", "manifest_path", required=True)
@click.option("--labels", "labels_path", required=True)
@click.option("-t", "--threshold", default=80.0, show_default=True)
def calibrate_cmd(manifest_path: str, labels_path: str,
                  threshold: float) -> None:
    """Confusion matrix of judge scores against human labels."""
    from .review_api import CALIBRATION_SCORE_KEY
    from .verification import calibrate
    manifest = Manifest.load(manifest_path)
    scores = {r.sample_id: r.scores[CALIBRATION_SCORE_KEY]
              for r in manifest.records if CALIBRATION_SCORE_KEY in r.scores}
    labels = [lb for lb in LabelLog(labels_path).read()
              if lb.sample_id in scores]
    click.echo(calibrate(labels, scores, threshold).render())


@main.command("serve-review")
@click.option("--manifest", "manifest_path", required=True)
@click.option("--labels", "labels_path", required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8700, show_default=True)
@click.option("--storage-root", default=None,
              help="Base for relative image paths (default: inferred).")
def serve_review(manifest_path: str, labels_path: str, host: str,
                 port: int, storage_root: str | None) -> None:
    """Serve the review API consumed by the annotation UI."""
    import uvicorn

    from .review_api import create_app
    app = create_app(_load_resolved(manifest_path, storage_root),
                     LabelLog(labels_path))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
