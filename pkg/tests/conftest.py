"""Shared fixture builders for the test suite."""

from __future__ import annotations

import random

import numpy as np

from garmentlab.attributes import GarmentCategory
from garmentlab.clients import ImageRef, ImageRole, save_image
from garmentlab.instructions import EditType, synthesize_instruction
from garmentlab.store import QuadrupletRecord, RecordStatus, Split
from garmentlab.synthetic import random_attributes
from garmentlab.verification import JudgeScore

CATEGORIES = list(GarmentCategory)


def attrs_supporting(edit_type: EditType, rng: random.Random):
    """Random attributes for which the given edit type is valid."""
    from garmentlab.instructions import enumerate_valid_edits
    for _ in range(500):
        attrs = random_attributes(rng)
        if edit_type in enumerate_valid_edits(attrs).valid_types():
            return attrs
    raise AssertionError(f"could not sample attributes for {edit_type}")


def instruction_of_type(edit_type: EditType, seed: int):
    rng = random.Random(seed)
    attrs = attrs_supporting(edit_type, rng)
    return synthesize_instruction(attrs, edit_type, seed)


def fake_ref(sample_id: str, role: ImageRole, path: str = "") -> ImageRef:
    return ImageRef(id=f"{sample_id}-{role.value}",
                    path=path or f"images/{sample_id}-{role.value}.png",
                    width=64, height=96, role=role)


def make_record(sample_id: str, *, edit_type: EditType = EditType.CHANGE_COLOR,
                category: GarmentCategory = GarmentCategory.UPPER_BODY,
                identity: str | None = None,
                garment_score: float = 95.0, person_score: float = 95.0,
                status: RecordStatus | None = None,
                split: Split = Split.UNASSIGNED,
                threshold: float = 80.0,
                instruction=None,
                image_paths: dict[ImageRole, str] | None = None,
                ) -> QuadrupletRecord:
    if instruction is None:
        from garmentlab.instructions import derive_seed
        instruction = instruction_of_type(edit_type,
                                          seed=derive_seed("rec", sample_id))
    if status is None:
        status = (RecordStatus.VERIFIED
                  if garment_score > threshold and person_score > threshold
                  else RecordStatus.REJECTED)
    paths = image_paths or {}
    return QuadrupletRecord(
        sample_id=sample_id,
        garment_identity=identity or sample_id.split("-")[0],
        category=category,
        images={role: fake_ref(sample_id, role, paths.get(role, ""))
                for role in (ImageRole.GARMENT, ImageRole.PERSON,
                             ImageRole.GARMENT_EDIT, ImageRole.PERSON_EDIT)},
        instruction=instruction,
        scores={"garment": JudgeScore(s=garment_score),
                "person": JudgeScore(s=person_score)},
        status=status,
        split=split,
    )


def write_png(path, rng: np.random.Generator, shape=(96, 64, 3)) -> np.ndarray:
    pixels = rng.integers(0, 256, size=shape, dtype=np.uint8)
    save_image(pixels, path)
    return pixels
