"""Bounding-box mask extraction from human-parsing label maps.

The try-on stage consumes rectangular masks covering the garment region,
with hand pixels cleared so hands are preserved during generation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

# Default class table for synthetic label maps. Real parsers ship their own
# table; ids are configuration, not contract.
DEFAULT_CLASS_TABLE = {
    0: "background",
    1: "upper_garment",
    2: "lower_garment",
    3: "dress",
    4: "left_hand",
    5: "right_hand",
    6: "body",
    7: "head",
}

# garment category value -> label-map target class ids
DEFAULT_CATEGORY_CLASSES = {
    "upper_body": frozenset({1}),
    "lower_body": frozenset({2}),
    "dresses": frozenset({3}),
}

DEFAULT_HAND_CLASSES = frozenset({4, 5})


class EmptyRegion(ValueError):
    """No pixel belongs to any target class."""


class UnknownClassId(ValueError):
    """A requested class id is absent from the class table."""


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class ids plus the id -> semantic-name table."""

    classes: np.ndarray  # (H, W) integer array
    class_table: dict[int, str] = field(
        default_factory=lambda: dict(DEFAULT_CLASS_TABLE))

    def __post_init__(self):
        if self.classes.ndim != 2:
            raise ValueError("label map must be a 2-d array")
        present = set(np.unique(self.classes).tolist())
        missing = present - set(self.class_table)
        if missing:
            raise UnknownClassId(f"pixel ids missing from class table: {sorted(missing)}")

    @property
    def height(self) -> int:
        return self.classes.shape[0]

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    @classmethod
    def load(cls, path, class_table=None) -> "LabelMap":
        arr = np.asarray(Image.open(path)).astype(np.int64)
        if arr.ndim == 3:
            arr = arr[..., 0]
        return cls(arr, dict(class_table or DEFAULT_CLASS_TABLE))


@dataclass(frozen=True)
class BinaryMask:
    """A {0,1} mask whose 1-region is a single rectangle minus exclusions."""

    bits: np.ndarray  # (H, W) uint8 in {0, 1}

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def save(self, path) -> None:
        Image.fromarray((self.bits * 255).astype(np.uint8), mode="L").save(path)

    @classmethod
    def load(cls, path) -> "BinaryMask":
        arr = np.asarray(Image.open(path).convert("L"))
        return cls((arr > 127).astype(np.uint8))


def bbox_mask(labels: LabelMap, target_classes: frozenset[int] | set[int],
              exclude_classes: frozenset[int] | set[int] = frozenset(),
              margin: int = 0) -> BinaryMask:
    """Tight bounding-box mask over target-class pixels, minus excluded classes.

    The rectangle is the min/max row/column span of target pixels, optionally
    padded by ``margin`` (clipped to the frame). Pixels of excluded classes
    (hands) inside the rectangle are cleared to 0.
    """
    if not target_classes:
        raise ValueError("target_classes must be non-empty")
    known = set(labels.class_table)
    unknown = (set(target_classes) | set(exclude_classes)) - known
    if unknown:
        raise UnknownClassId(f"class ids not in table: {sorted(unknown)}")

    targets = np.isin(labels.classes, sorted(target_classes))
    if not targets.any():
        raise EmptyRegion("no target-class pixels in label map")
    rows = np.any(targets, axis=1).nonzero()[0]
    cols = np.any(targets, axis=0).nonzero()[0]
    r0 = max(int(rows[0]) - margin, 0)
    r1 = min(int(rows[-1]) + margin, labels.height - 1)
    c0 = max(int(cols[0]) - margin, 0)
    c1 = min(int(cols[-1]) + margin, labels.width - 1)

    bits = np.zeros_like(labels.classes, dtype=np.uint8)
    bits[r0:r1 + 1, c0:c1 + 1] = 1
    if exclude_classes:
        excluded = np.isin(labels.classes, sorted(exclude_classes))
        bits[excluded] = 0
    return BinaryMask(bits)
