"""End-to-end orchestration: extract attributes, synthesize an instruction,
edit the garment, render the try-on, judge, filter, and persist.

Every sample advances through four stages with a durable per-sample
checkpoint after each one, so interrupted runs resume without re-calling a
service whose output already exists. All sampling is keyed by
(run seed, garment identity, candidate index), making the final manifest a
pure function of (config, catalog, mocks).
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import yaml

from . import maskprep
from .attributes import GarmentAttributes, parse_attributes, serialize
from .clients import (
    ClientBundle,
    HttpAttributeExtractor,
    HttpGarmentEditor,
    HttpJudge,
    HttpTryOn,
    ImageRef,
    ImageRole,
    MockAttributeExtractor,
    MockGarmentEditor,
    MockJudge,
    MockTryOn,
    ServiceEndpoint,
)
from .instructions import (
    EDIT_TYPE_PROPORTIONS,
    EditInstruction,
    EditType,
    NoValidTarget,
    choose_edit_type,
    derive_seed,
    synthesize_instruction,
)
from .maskprep import BinaryMask, LabelMap, bbox_mask
from .store import (
    Manifest,
    QuadrupletRecord,
    RecordStatus,
    Split,
)
from .verification import JudgeScore, passes_filter

log = logging.getLogger(__name__)

STAGE_NAMES = ("stage1", "stage2", "stage3", "stage4")


class ConfigInvalid(ValueError):
    """Pipeline configuration fails validation."""


class CheckpointCorrupt(RuntimeError):
    """A run checkpoint exists but cannot be parsed."""


@dataclass(frozen=True)
class CatalogEntry:
    """One upstream garment/person pair with its parsing label map."""

    identity: str
    garment: ImageRef
    person: ImageRef
    label_map: str

    def to_dict(self) -> dict:
        return {"identity": self.identity, "garment": self.garment.to_dict(),
                "person": self.person.to_dict(), "label_map": self.label_map}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CatalogEntry":
        return cls(identity=d["identity"],
                   garment=ImageRef.from_dict(d["garment"]),
                   person=ImageRef.from_dict(d["person"]),
                   label_map=d["label_map"])


@dataclass
class PipelineConfig:
    seed: int = 0
    threshold: float = 80.0
    oversampling: int = 2
    workers: int = 4
    storage_root: str = "storage"
    resolution: tuple[int, int] = (768, 1024)  # (width, height)
    edit_type_proportions: dict[EditType, float] = field(
        default_factory=lambda: {t: float(p)
                                 for t, p in EDIT_TYPE_PROPORTIONS.items()})
    endpoints: dict[str, ServiceEndpoint] = field(
        default_factory=lambda: {name: ServiceEndpoint()
                                 for name in ("extract", "edit", "try_on",
                                              "judge")})
    category_classes: dict[str, frozenset[int]] = field(
        default_factory=lambda: dict(maskprep.DEFAULT_CATEGORY_CLASSES))
    hand_classes: frozenset[int] = maskprep.DEFAULT_HAND_CLASSES

    def validate(self) -> None:
        if not 0.0 <= self.threshold <= 100.0:
            raise ConfigInvalid(f"threshold {self.threshold} outside [0, 100]")
        total = sum(self.edit_type_proportions.values())
        if abs(total - 100.0) > 1e-6:
            raise ConfigInvalid(
                f"edit-type proportions sum to {total}, expected 100")
        if self.oversampling < 1:
            raise ConfigInvalid("oversampling must be >= 1")
        if self.workers < 1:
            raise ConfigInvalid("workers must be >= 1")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "threshold": self.threshold,
            "oversampling": self.oversampling,
            "workers": self.workers,
            "storage_root": self.storage_root,
            "resolution": list(self.resolution),
            "edit_type_proportions": {t.value: p for t, p
                                      in self.edit_type_proportions.items()},
            "endpoints": {k: {"base_url": e.base_url, "backend": e.backend,
                              "timeout_s": e.timeout_s,
                              "max_attempts": e.max_attempts,
                              "backoff_s": list(e.backoff_s),
                              "auth_token_env": e.auth_token_env,
                              "max_concurrency": e.max_concurrency}
                          for k, e in self.endpoints.items()},
            "category_classes": {k: sorted(v)
                                 for k, v in self.category_classes.items()},
            "hand_classes": sorted(self.hand_classes),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PipelineConfig":
        cfg = cls()
        cfg.seed = int(d.get("seed", cfg.seed))
        cfg.threshold = float(d.get("threshold", cfg.threshold))
        cfg.oversampling = int(d.get("oversampling", cfg.oversampling))
        cfg.workers = int(d.get("workers", cfg.workers))
        cfg.storage_root = str(d.get("storage_root", cfg.storage_root))
        if "resolution" in d:
            cfg.resolution = tuple(int(v) for v in d["resolution"])  # type: ignore[assignment]
        if "edit_type_proportions" in d:
            cfg.edit_type_proportions = {
                EditType(k): float(v)
                for k, v in d["edit_type_proportions"].items()}
        if "endpoints" in d:
            cfg.endpoints = {
                k: ServiceEndpoint(
                    base_url=e.get("base_url", ""),
                    backend=e.get("backend", "mock"),
                    timeout_s=float(e.get("timeout_s", 30.0)),
                    max_attempts=int(e.get("max_attempts", 3)),
                    backoff_s=tuple(e.get("backoff_s", (0.5, 1.0, 2.0))),
                    auth_token_env=e.get("auth_token_env"),
                    max_concurrency=int(e.get("max_concurrency", 8)))
                for k, e in d["endpoints"].items()}
        if "category_classes" in d:
            cfg.category_classes = {k: frozenset(v)
                                    for k, v in d["category_classes"].items()}
        if "hand_classes" in d:
            cfg.hand_classes = frozenset(d["hand_classes"])
        return cfg

    @classmethod
    def from_file(cls, path: str | Path,
                  env: Mapping[str, str] | None = None) -> "PipelineConfig":
        """Load a YAML config file; GARMENTLAB_* environment variables win."""
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        env = os.environ if env is None else env
        for key, cast in (("seed", int), ("threshold", float),
                          ("oversampling", int), ("workers", int),
                          ("storage_root", str)):
            override = env.get(f"GARMENTLAB_{key.upper()}")
            if override is not None:
                data[key] = cast(override)
        return cls.from_dict(data)


def default_clients(config: PipelineConfig, run_dir: Path) -> ClientBundle:
    """Build the stage clients selected by the endpoint config."""
    sidecars = Path(config.storage_root) / "attributes"
    images = run_dir / "images"

    def pick(name: str, mock, http):
        endpoint = config.endpoints.get(name, ServiceEndpoint())
        return mock() if endpoint.backend == "mock" else http(endpoint)

    return ClientBundle(
        extractor=pick("extract", lambda: MockAttributeExtractor(sidecars),
                       HttpAttributeExtractor),
        editor=pick("edit", lambda: MockGarmentEditor(images),
                    HttpGarmentEditor),
        try_on=pick("try_on", lambda: MockTryOn(images), HttpTryOn),
        judge=pick("judge", MockJudge, HttpJudge),
    )


def _atomic_write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _load_checkpoint(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CheckpointCorrupt(f"{path}: {e}") from e


class _SampleRunner:
    """Runs one candidate sample through the four stages with checkpoints."""

    def __init__(self, config: PipelineConfig, clients: ClientBundle,
                 run_dir: Path):
        self.config = config
        self.clients = clients
        self.run_dir = run_dir

    def run(self, entry: CatalogEntry, candidate: int) -> dict:
        sample_id = f"{entry.identity}-e{candidate:02d}"
        ckpt_path = self.run_dir / "samples" / f"{sample_id}.json"
        state = (_load_checkpoint(ckpt_path) if ckpt_path.exists()
                 else {"sample_id": sample_id, "identity": entry.identity})
        if state.get("stage") in ("done", "failed"):
            return state
        try:
            self._advance(entry, candidate, state, ckpt_path)
        except Exception as e:  # per-sample isolation: never abort the run
            state["stage"] = "failed"
            state["error"] = f"{type(e).__name__}: {e}"
            _atomic_write_json(ckpt_path, state)
            log.warning("sample %s failed: %s", sample_id, state["error"])
        return state

    def _advance(self, entry: CatalogEntry, candidate: int, state: dict,
                 ckpt_path: Path) -> None:
        cfg = self.config
        if "stage1" not in state:
            attrs = self.clients.extractor.extract(entry.garment, entry.person)
            etype = choose_edit_type(
                attrs, derive_seed(cfg.seed, "etype", entry.identity, candidate),
                cfg.edit_type_proportions)
            instruction = synthesize_instruction(
                attrs, etype,
                derive_seed(cfg.seed, "instr", entry.identity, candidate))
            state["stage1"] = {"attributes": serialize(attrs),
                               "instruction": instruction.to_dict()}
            _atomic_write_json(ckpt_path, state)
        attrs = parse_attributes(state["stage1"]["attributes"])
        instruction = EditInstruction.from_dict(state["stage1"]["instruction"])

        if "stage2" not in state:
            garment_edit = self.clients.editor.edit(entry.garment, instruction)
            state["stage2"] = {"garment_edit": garment_edit.to_dict()}
            _atomic_write_json(ckpt_path, state)
        garment_edit = ImageRef.from_dict(state["stage2"]["garment_edit"])

        if "stage3" not in state:
            labels = LabelMap.load(entry.label_map)
            mask = bbox_mask(labels,
                             cfg.category_classes[attrs.category.value],
                             cfg.hand_classes)
            mask_path = self.run_dir / "masks" / f"{state['sample_id']}.png"
            mask_path.parent.mkdir(parents=True, exist_ok=True)
            mask.save(mask_path)
            person_edit = self.clients.try_on.try_on(
                entry.person, garment_edit, mask)
            state["stage3"] = {"person_edit": person_edit.to_dict(),
                               "mask": str(mask_path)}
            _atomic_write_json(ckpt_path, state)
        person_edit = ImageRef.from_dict(state["stage3"]["person_edit"])

        if "stage4" not in state:
            score_garment = self.clients.judge.judge(
                entry.garment, garment_edit, instruction.forward_text)
            score_person = self.clients.judge.judge(
                entry.person, person_edit, instruction.forward_text)
            state["stage4"] = {"garment": score_garment.to_dict(),
                               "person": score_person.to_dict()}
            state["stage"] = "done"
            _atomic_write_json(ckpt_path, state)


def _rootward(ref: ImageRef, storage_root: str | Path) -> ImageRef:
    # Manifest records carry paths relative to the storage root so that
    # equal-seed runs produce byte-identical manifests wherever they live.
    rel = os.path.relpath(ref.path, storage_root)
    return replace(ref, path=rel.replace(os.sep, "/"))


def _record_from_state(entry: CatalogEntry, state: dict, threshold: float,
                       storage_root: str | Path) -> QuadrupletRecord:
    attrs = parse_attributes(state["stage1"]["attributes"])
    instruction = EditInstruction.from_dict(state["stage1"]["instruction"])
    scores = {k: JudgeScore.from_dict(v) for k, v in state["stage4"].items()}
    status = (RecordStatus.VERIFIED
              if passes_filter(scores["garment"], scores["person"], threshold)
              else RecordStatus.REJECTED)
    return QuadrupletRecord(
        sample_id=state["sample_id"],
        garment_identity=entry.identity,
        category=attrs.category,
        images={
            ImageRole.GARMENT: _rootward(entry.garment, storage_root),
            ImageRole.PERSON: _rootward(entry.person, storage_root),
            ImageRole.GARMENT_EDIT: _rootward(ImageRef.from_dict(
                state["stage2"]["garment_edit"]), storage_root),
            ImageRole.PERSON_EDIT: _rootward(ImageRef.from_dict(
                state["stage3"]["person_edit"]), storage_root),
        },
        instruction=instruction,
        scores=scores,
        status=status,
        split=Split.UNASSIGNED,
    )


def run(config: PipelineConfig, catalog: Sequence[CatalogEntry],
        clients: ClientBundle | None = None, run_id: str = "run",
        interrupt_after: int | None = None) -> Manifest:
    """Execute the four-stage pipeline over a catalog and seal the manifest.

    Per-sample failures are recorded in the run's error report and never
    abort the run. ``interrupt_after`` aborts after that many samples have
    been processed (test hook for resume semantics).
    """
    config.validate()
    if not catalog:
        raise ConfigInvalid("catalog is empty")
    run_dir = Path(config.storage_root) / "runs" / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write_json(run_dir / "config.json", config.to_dict())
    _atomic_write_json(run_dir / "catalog.json",
                       {"entries": [e.to_dict() for e in catalog]})

    clients = clients or default_clients(config, run_dir)
    runner = _SampleRunner(config, clients, run_dir)
    jobs = [(entry, k) for entry in catalog
            for k in range(config.oversampling)]

    processed = 0
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(runner.run, entry, k) for entry, k in jobs]
        try:
            for future in as_completed(futures):
                future.result()
                processed += 1
                if interrupt_after is not None and processed >= interrupt_after:
                    raise KeyboardInterrupt("interrupted by test hook")
        except KeyboardInterrupt:
            # Drop queued samples but let in-flight ones finish writing
            # their checkpoints; a torn image or half-raced checkpoint
            # would defeat resumption.
            pool.shutdown(wait=True, cancel_futures=True)
            raise

    return _finalize(config, catalog, run_dir)


def _finalize(config: PipelineConfig, catalog: Sequence[CatalogEntry],
              run_dir: Path) -> Manifest:
    by_identity = {e.identity: e for e in catalog}
    manifest = Manifest(seed=config.seed, threshold=config.threshold)
    errors = []
    for path in sorted((run_dir / "samples").glob("*.json")):
        state = _load_checkpoint(path)
        if state.get("stage") == "failed":
            errors.append({"sample_id": state["sample_id"],
                           "error": state.get("error", "")})
            continue
        if state.get("stage") != "done":
            errors.append({"sample_id": state["sample_id"],
                           "error": "incomplete"})
            continue
        manifest.append(_record_from_state(
            by_identity[state["identity"]], state, config.threshold,
            config.storage_root))
    manifest.finalize()
    manifest.save(run_dir / "manifest.jsonl")
    _atomic_write_json(run_dir / "errors.json", {"errors": errors})
    return manifest


def resume(storage_root: str | Path, run_id: str,
           clients: ClientBundle | None = None) -> Manifest:
    """Complete an interrupted run; a finished run is a no-op.

    The resumed manifest is byte-identical to an uninterrupted run with the
    same seed because stage outputs are checkpointed, never recomputed.
    """
    run_dir = Path(storage_root) / "runs" / run_id
    config_path = run_dir / "config.json"
    catalog_path = run_dir / "catalog.json"
    if not config_path.exists() or not catalog_path.exists():
        raise CheckpointCorrupt(f"no checkpoint for run {run_id!r} "
                                f"under {storage_root}")
    config = PipelineConfig.from_dict(_load_checkpoint(config_path))
    catalog = [CatalogEntry.from_dict(d)
               for d in _load_checkpoint(catalog_path)["entries"]]
    return run(config, catalog, clients=clients, run_id=run_id)
