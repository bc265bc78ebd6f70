"""Quadruplet persistence: manifest file, split protocol, statistics,
and benchmark-task export.

The manifest is a JSONL file: a header line (schema version, seed,
threshold) followed by one record per line, sorted by sample id when
finalized so reruns diff cleanly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .attributes import GarmentCategory
from .clients import ImageRef, ImageRole
from .instructions import EditInstruction, EditType
from .verification import JudgeScore, passes_filter

MANIFEST_SCHEMA_VERSION = 1

QUADRUPLET_ROLES = (ImageRole.GARMENT, ImageRole.PERSON,
                    ImageRole.GARMENT_EDIT, ImageRole.PERSON_EDIT)


class RecordStatus(Enum):
    CANDIDATE = "candidate"
    VERIFIED = "verified"
    REJECTED = "rejected"


class Split(Enum):
    TRAIN = "train"
    TEST = "test"
    UNASSIGNED = "unassigned"


class BenchmarkTaskKind(Enum):
    VTON_PAIRED = "vton_paired"
    VTON_UNPAIRED = "vton_unpaired"
    VTOFF = "vtoff"


class DuplicateId(ValueError):
    """A record with this sample id already exists."""


class StorageFailure(RuntimeError):
    """The backing file could not be written durably."""


class UnmappedIdentity(KeyError):
    """A garment identity is missing from the split table."""


class SplitNotAssigned(RuntimeError):
    """Benchmark export requires assigned splits."""


@dataclass(frozen=True)
class QuadrupletRecord:
    """One dataset sample: the four images, instruction, scores, lifecycle."""

    sample_id: str
    garment_identity: str
    category: GarmentCategory
    images: dict[ImageRole, ImageRef]
    instruction: EditInstruction
    scores: dict[str, JudgeScore] = field(default_factory=dict)
    status: RecordStatus = RecordStatus.CANDIDATE
    split: Split = Split.UNASSIGNED

    def __post_init__(self):
        roles = set(self.images)
        if roles != set(QUADRUPLET_ROLES):
            raise ValueError(
                f"record must carry exactly the four quadruplet roles, "
                f"got {sorted(r.value for r in roles)}")

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "garment_identity": self.garment_identity,
            "category": self.category.value,
            "images": {r.value: ref.to_dict() for r, ref in self.images.items()},
            "instruction": self.instruction.to_dict(),
            "scores": {k: v.to_dict() for k, v in self.scores.items()},
            "status": self.status.value,
            "split": self.split.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "QuadrupletRecord":
        return cls(
            sample_id=d["sample_id"],
            garment_identity=d["garment_identity"],
            category=GarmentCategory(d["category"]),
            images={ImageRole(r): ImageRef.from_dict(ref)
                    for r, ref in d["images"].items()},
            instruction=EditInstruction.from_dict(d["instruction"]),
            scores={k: JudgeScore.from_dict(v)
                    for k, v in d.get("scores", {}).items()},
            status=RecordStatus(d["status"]),
            split=Split(d["split"]),
        )


@dataclass
class Manifest:
    """Ordered, id-unique collection of quadruplet records."""

    seed: int
    threshold: float
    schema_version: int = MANIFEST_SCHEMA_VERSION
    records: list[QuadrupletRecord] = field(default_factory=list)
    _ids: set[str] = field(default_factory=set, repr=False)

    def __post_init__(self):
        self._ids = {r.sample_id for r in self.records}
        if len(self._ids) != len(self.records):
            raise DuplicateId("manifest contains duplicate sample ids")

    def append(self, record: QuadrupletRecord) -> None:
        if record.sample_id in self._ids:
            raise DuplicateId(record.sample_id)
        self._check_status(record)
        self.records.append(record)
        self._ids.add(record.sample_id)

    def _check_status(self, record: QuadrupletRecord) -> None:
        if record.status is RecordStatus.CANDIDATE:
            return
        expected = (RecordStatus.VERIFIED
                    if passes_filter(record.scores["garment"],
                                     record.scores["person"], self.threshold)
                    else RecordStatus.REJECTED)
        if record.status is not expected:
            raise ValueError(
                f"record {record.sample_id} status {record.status.value} "
                f"contradicts threshold {self.threshold}")

    def get(self, sample_id: str) -> QuadrupletRecord:
        for r in self.records:
            if r.sample_id == sample_id:
                return r
        raise KeyError(sample_id)

    def finalize(self) -> None:
        self.records.sort(key=lambda r: r.sample_id)

    def resolve_paths(self, base: str | Path) -> "Manifest":
        """Return a copy with relative image paths joined onto ``base``.

        Manifests store image paths relative to the storage root so that
        equal-seed runs are byte-identical regardless of where they live;
        consumers that read pixels call this first.
        """
        base = Path(base)
        records = []
        for record in self.records:
            images = {
                role: (ref if os.path.isabs(ref.path)
                       else replace(ref, path=str(base / ref.path)))
                for role, ref in record.images.items()
            }
            records.append(replace(record, images=images))
        return Manifest(seed=self.seed, threshold=self.threshold,
                        schema_version=self.schema_version, records=records)

    def header(self) -> dict:
        return {"kind": "manifest-header",
                "schema_version": self.schema_version,
                "seed": self.seed, "threshold": self.threshold}

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(self.header(), sort_keys=True) + "\n")
            for record in self.records:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        text = Path(path).read_text(encoding="utf-8")
        lines = text.split("\n")
        # A crash mid-append may leave a final line without its newline;
        # such a partially written record is dropped, never surfaced.
        if lines and lines[-1] != "":
            lines = lines[:-1]
        lines = [ln for ln in lines if ln]
        if not lines:
            raise StorageFailure(f"{path}: empty manifest")
        header = json.loads(lines[0])
        if header.get("kind") != "manifest-header":
            raise StorageFailure(f"{path}: missing manifest header")
        records = [QuadrupletRecord.from_dict(json.loads(ln))
                   for ln in lines[1:]]
        return cls(seed=int(header["seed"]),
                   threshold=float(header["threshold"]),
                   schema_version=int(header["schema_version"]),
                   records=records)


class ManifestWriter:
    """Single-writer durable append log for manifest records."""

    def __init__(self, path: str | Path, manifest: Manifest):
        self.path = Path(path)
        self.manifest = manifest
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists():
            with open(self.path, "w", encoding="utf-8") as fh:
                fh.write(json.dumps(manifest.header(), sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def append(self, record: QuadrupletRecord) -> None:
        self.manifest.append(record)
        line = json.dumps(record.to_dict(), sort_keys=True) + "\n"
        try:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as e:
            raise StorageFailure(str(e)) from e


def assign_splits(manifest: Manifest,
                  split_table: Mapping[str, str]) -> Manifest:
    """Assign every record the split of its garment identity.

    Identity-level assignment guarantees no garment identity spans both
    partitions.
    """
    updated = []
    for record in manifest.records:
        if record.garment_identity not in split_table:
            raise UnmappedIdentity(record.garment_identity)
        updated.append(replace(record,
                               split=Split(split_table[record.garment_identity])))
    return Manifest(seed=manifest.seed, threshold=manifest.threshold,
                    schema_version=manifest.schema_version, records=updated)


@dataclass(frozen=True)
class DatasetStats:
    """Counts and proportions over verified records."""

    total_verified: int
    by_edit_type: dict[EditType, int]
    edit_type_pct: dict[EditType, int]       # integer percent
    by_category: dict[GarmentCategory, int]
    category_pct: dict[GarmentCategory, float]  # 0.1 percent precision
    split_sizes: dict[Split, int]
    distinct_identities: int
    unique_instructions: int

    def render(self) -> str:
        lines = [f"verified samples: {self.total_verified}",
                 "", "edit type            count      %"]
        for et in EditType:
            lines.append(f"{et.value:<20}{self.by_edit_type[et]:>6}"
                         f"{self.edit_type_pct[et]:>7}")
        lines += ["", "category             count      %"]
        for cat in GarmentCategory:
            lines.append(f"{cat.value:<20}{self.by_category[cat]:>6}"
                         f"{self.category_pct[cat]:>7.1f}")
        lines += ["", f"train/test: {self.split_sizes[Split.TRAIN]}"
                      f"/{self.split_sizes[Split.TEST]}",
                  f"distinct garment identities: {self.distinct_identities}",
                  f"unique instruction strings: {self.unique_instructions}"]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "total_verified": self.total_verified,
            "by_edit_type": {k.value: v for k, v in self.by_edit_type.items()},
            "edit_type_pct": {k.value: v for k, v in self.edit_type_pct.items()},
            "by_category": {k.value: v for k, v in self.by_category.items()},
            "category_pct": {k.value: v for k, v in self.category_pct.items()},
            "split_sizes": {k.value: v for k, v in self.split_sizes.items()},
            "distinct_identities": self.distinct_identities,
            "unique_instructions": self.unique_instructions,
        }


def compute_stats(manifest: Manifest) -> DatasetStats:
    """Dataset statistics over verified records."""
    verified = [r for r in manifest.records if r.status is RecordStatus.VERIFIED]
    total = len(verified)
    by_edit = {et: 0 for et in EditType}
    by_cat = {c: 0 for c in GarmentCategory}
    splits = {s: 0 for s in Split}
    for r in verified:
        by_edit[r.instruction.edit_type] += 1
        by_cat[r.category] += 1
        splits[r.split] += 1
    edit_pct = {et: (round(100.0 * n / total) if total else 0)
                for et, n in by_edit.items()}
    cat_pct = {c: (round(100.0 * n / total, 1) if total else 0.0)
               for c, n in by_cat.items()}
    return DatasetStats(
        total_verified=total,
        by_edit_type=by_edit,
        edit_type_pct=edit_pct,
        by_category=by_cat,
        category_pct=cat_pct,
        split_sizes=splits,
        distinct_identities=len({r.garment_identity for r in verified}),
        unique_instructions=len({r.instruction.forward_text for r in verified}),
    )


@dataclass(frozen=True)
class BenchmarkTask:
    """One evaluation task under the inverse-editing protocol."""

    task_id: str
    kind: BenchmarkTaskKind
    edit_type: EditType
    category: GarmentCategory
    instruction_text: str  # the reverse instruction
    inputs: dict[str, ImageRef]
    ground_truth: ImageRef

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "kind": self.kind.value,
            "edit_type": self.edit_type.value,
            "category": self.category.value,
            "instruction_text": self.instruction_text,
            "inputs": {k: v.to_dict() for k, v in self.inputs.items()},
            "ground_truth": self.ground_truth.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BenchmarkTask":
        return cls(
            task_id=d["task_id"],
            kind=BenchmarkTaskKind(d["kind"]),
            edit_type=EditType(d["edit_type"]),
            category=GarmentCategory(d["category"]),
            instruction_text=d["instruction_text"],
            inputs={k: ImageRef.from_dict(v) for k, v in d["inputs"].items()},
            ground_truth=ImageRef.from_dict(d["ground_truth"]),
        )


def export_benchmark_tasks(manifest: Manifest,
                           task: BenchmarkTaskKind) -> list[BenchmarkTask]:
    """Build inverse-editing tasks over the verified test split.

    Paired VTON and VTOFF reconstruct each record's own original image.
    Unpaired VTON takes the garment input from a different record of the
    same category via a seed-keyed cyclic rotation (a derangement), so the
    pairing is reproducible and never self-referential.
    """
    test = [r for r in manifest.records
            if r.status is RecordStatus.VERIFIED and r.split is Split.TEST]
    if not test and any(r.split is Split.UNASSIGNED for r in manifest.records):
        raise SplitNotAssigned("test split has not been assigned")
    test.sort(key=lambda r: r.sample_id)

    garment_source = {r.sample_id: r for r in test}
    if task is BenchmarkTaskKind.VTON_UNPAIRED:
        garment_source = _deranged_garments(test, manifest.seed)

    out = []
    for r in test:
        if task is BenchmarkTaskKind.VTOFF:
            inputs = {"person_edit": r.images[ImageRole.PERSON_EDIT]}
            ground_truth = r.images[ImageRole.GARMENT]
        else:
            donor = garment_source[r.sample_id]
            inputs = {"person_edit": r.images[ImageRole.PERSON_EDIT],
                      "garment_edit": donor.images[ImageRole.GARMENT_EDIT]}
            ground_truth = r.images[ImageRole.PERSON]
        out.append(BenchmarkTask(
            task_id=r.sample_id,
            kind=task,
            edit_type=r.instruction.edit_type,
            category=r.category,
            instruction_text=r.instruction.reverse_text,
            inputs=inputs,
            ground_truth=ground_truth,
        ))
    return out


def _deranged_garments(test: list[QuadrupletRecord],
                       seed: int) -> dict[str, QuadrupletRecord]:
    """sample id -> donor record, a fixed-point-free rotation per category.

    Categories with a single test record fall back to one rotation over the
    whole test split; a single-record test split cannot be deranged.
    """
    groups: dict[GarmentCategory, list[QuadrupletRecord]] = {}
    for r in test:
        groups.setdefault(r.category, []).append(r)
    if any(len(g) < 2 for g in groups.values()):
        if len(test) < 2:
            raise ValueError("cannot derange a single-record test split")
        groups = {None: test}  # type: ignore[dict-item]

    mapping: dict[str, QuadrupletRecord] = {}
    for group in groups.values():
        n = len(group)
        shift = 1 + seed % (n - 1) if n > 2 else 1
        for i, r in enumerate(group):
            mapping[r.sample_id] = group[(i + shift) % n]
    return mapping


def save_tasks(tasks: Iterable[BenchmarkTask], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for t in tasks:
            fh.write(json.dumps(t.to_dict(), sort_keys=True) + "\n")


def load_tasks(path: str | Path) -> list[BenchmarkTask]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(BenchmarkTask.from_dict(json.loads(line)))
    return out
