import json
from pathlib import Path

from click.testing import CliRunner

from garmentlab.cli import main


def test_full_cli_workflow(tmp_path):
    runner = CliRunner()
    root = str(tmp_path / "store")

    result = runner.invoke(main, ["synth-catalog", "--root", root,
                                  "-n", "6", "--seed", "3",
                                  "--width", "48", "--height", "64"])
    assert result.exit_code == 0, result.output

    config = tmp_path / "cfg.yaml"
    config.write_text(f"seed: 3\nstorage_root: {root}\noversampling: 1\n"
                      "resolution: [48, 64]\n", encoding="utf-8")
    result = runner.invoke(main, ["generate", "--config", str(config),
                                  "--catalog", f"{root}/catalog.json"])
    assert result.exit_code == 0, result.output
    manifest = f"{root}/runs/run/manifest.jsonl"

    result = runner.invoke(main, ["stats", "--manifest", manifest])
    assert result.exit_code == 0, result.output
    assert "verified samples:" in result.output

    # identity-level split table: alternate train/test
    catalog = json.loads(Path(f"{root}/catalog.json").read_text())
    table = {e["identity"]: ("test" if i % 2 else "train")
             for i, e in enumerate(catalog["entries"])}
    table_path = tmp_path / "splits.json"
    table_path.write_text(json.dumps(table), encoding="utf-8")
    split_manifest = tmp_path / "split.jsonl"
    result = runner.invoke(main, ["assign-splits", "--manifest", manifest,
                                  "--split-table", str(table_path),
                                  "--out", str(split_manifest)])
    assert result.exit_code == 0, result.output

    tasks_path = tmp_path / "tasks.jsonl"
    result = runner.invoke(main, ["export-tasks", "--manifest",
                                  str(split_manifest), "--task", "vtoff",
                                  "--out", str(tasks_path),
                                  "--storage-root", root])
    assert result.exit_code == 0, result.output
    tasks = [json.loads(ln) for ln in tasks_path.read_text().splitlines()]
    assert tasks

    # a perfect model: predict the ground truth for every task
    preds = tmp_path / "preds"
    preds.mkdir()
    from garmentlab.clients import load_image, save_image
    for t in tasks:
        save_image(load_image(t["ground_truth"]["path"]),
                   preds / f"{t['task_id']}.png")
    report_path = tmp_path / "report.json"
    result = runner.invoke(main, ["evaluate", "--tasks", str(tasks_path),
                                  "--predictions", str(preds),
                                  "--out", str(report_path)])
    assert result.exit_code == 0, result.output
    report = json.loads(report_path.read_text())
    assert report["overall"]["ssim"] == 1.0

    labels_path = tmp_path / "labels.jsonl"
    from garmentlab.verification import HumanLabel, LabelLog
    log = LabelLog(labels_path)
    for t in tasks[:2]:
        log.append(HumanLabel(t["task_id"], "keep", "a", 1.0))
    result = runner.invoke(main, ["calibrate", "--manifest", manifest,
                                  "--labels", str(labels_path)])
    assert result.exit_code == 0, result.output
    assert "accuracy" in result.output


def test_resume_command(tmp_path):
    runner = CliRunner()
    root = str(tmp_path / "store")
    runner.invoke(main, ["synth-catalog", "--root", root, "-n", "3",
                         "--seed", "1", "--width", "48", "--height", "64"])
    config = tmp_path / "cfg.yaml"
    config.write_text(f"seed: 1\nstorage_root: {root}\noversampling: 1\n"
                      "resolution: [48, 64]\n", encoding="utf-8")
    runner.invoke(main, ["generate", "--config", str(config),
                         "--catalog", f"{root}/catalog.json"])
    result = runner.invoke(main, ["resume", "--storage-root", root])
    assert result.exit_code == 0, result.output
    assert "complete" in result.output
