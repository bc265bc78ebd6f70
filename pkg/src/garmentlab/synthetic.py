"""Synthetic desk-scale fixtures: garment/person images, label maps, and
sidecar attribute documents for the mock extractor.

Everything is a pure function of (seed, index), so two invocations with the
same arguments produce byte-identical files.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np

from .attributes import (
    COLOR_BANK,
    MATERIAL_BANK,
    NECKLINE_BANK,
    PATTERN_BANK,
    SLEEVE_BANK,
    SOLID,
    FeatureEntry,
    GarmentAttributes,
    GarmentCategory,
    serialize,
)
from .clients import ImageRef, ImageRole, save_image
from .instructions import derive_seed
from .maskprep import DEFAULT_CATEGORY_CLASSES
from .pipeline import CatalogEntry

# Feature pool for synthetic garments: (name, location, colorable, removable,
# replaceable_with). Replacement partners follow the bidirectional pair table.
_FEATURE_POOL = (
    ("belt", "waist", True, True, "bow"),
    ("bow", "neck", True, True, "buttons"),
    ("drawstring", "waist", False, True, "belt"),
    ("buttons", None, True, True, "bow"),
    ("logo", "chest", True, True, None),
    ("embroidery", None, True, False, None),
    ("fringe", "hem", False, True, None),
)


def random_attributes(rng: random.Random) -> GarmentAttributes:
    """One plausible random garment state over the attribute banks."""
    category = rng.choice(list(GarmentCategory))
    pattern = SOLID if rng.random() < 0.5 else rng.choice(PATTERN_BANK)
    sleeves = neckline = None
    if category is not GarmentCategory.LOWER_BODY:
        if rng.random() < 0.8:
            sleeves = rng.choice(SLEEVE_BANK)
        if rng.random() < 0.6:
            neckline = rng.choice(NECKLINE_BANK)
    n_features = rng.choice((0, 1, 1, 2))
    pool = list(_FEATURE_POOL)
    rng.shuffle(pool)
    features, used = [], set()
    for name, location, colorable, removable, partner in pool[:n_features]:
        if name in used:
            continue
        used.add(name)
        features.append(FeatureEntry(
            name=name, location=location,
            color=rng.choice(COLOR_BANK) if colorable else None,
            color_editable=colorable, removable=removable,
            replaceable_with=partner))
    return GarmentAttributes(
        category=category,
        base_color=rng.choice(COLOR_BANK),
        pattern=pattern,
        material=rng.choice(MATERIAL_BANK),
        sleeves=sleeves,
        neckline=neckline,
        distinctive_features=tuple(features),
    )


def _noise_image(seed: int, width: int, height: int) -> np.ndarray:
    gen = np.random.default_rng(seed)
    return gen.integers(0, 256, size=(height, width, 3), dtype=np.uint8)


def _label_map_pixels(seed: int, width: int, height: int,
                      category: GarmentCategory) -> np.ndarray:
    """Background plus one garment rectangle, with hand pixels inside it."""
    gen = np.random.default_rng(seed)
    labels = np.zeros((height, width), dtype=np.uint8)
    garment_class = min(DEFAULT_CATEGORY_CLASSES[category.value])
    r0 = int(gen.integers(0, height // 3))
    r1 = int(gen.integers(2 * height // 3, height))
    c0 = int(gen.integers(0, width // 3))
    c1 = int(gen.integers(2 * width // 3, width))
    labels[r0:r1, c0:c1] = garment_class
    # a small hand blob overlapping the garment region
    hr = int(gen.integers(r0, max(r0 + 1, r1 - 4)))
    hc = int(gen.integers(c0, max(c0 + 1, c1 - 4)))
    labels[hr:hr + 4, hc:hc + 4] = 4
    labels[0:3, 0:3] = 5
    return labels


def make_synthetic_catalog(storage_root: str | Path, count: int, seed: int,
                           resolution: tuple[int, int] = (96, 128),
                           ) -> list[CatalogEntry]:
    """Generate a catalog of synthetic garments under the storage root.

    Layout: <root>/catalog/ holds PNGs and label maps;
    <root>/attributes/ holds the sidecar documents read by the mock
    attribute extractor.
    """
    from PIL import Image

    root = Path(storage_root)
    img_dir = root / "catalog"
    attr_dir = root / "attributes"
    img_dir.mkdir(parents=True, exist_ok=True)
    attr_dir.mkdir(parents=True, exist_ok=True)
    width, height = resolution

    entries = []
    for i in range(count):
        identity = f"g{i:05d}"
        rng = random.Random(derive_seed(seed, "synthetic", identity))
        attrs = random_attributes(rng)

        garment_path = img_dir / f"{identity}_garment.png"
        person_path = img_dir / f"{identity}_person.png"
        labels_path = img_dir / f"{identity}_labels.png"
        save_image(_noise_image(derive_seed(seed, "garment", identity) % 2**32,
                                width, height), garment_path)
        save_image(_noise_image(derive_seed(seed, "person", identity) % 2**32,
                                width, height), person_path)
        labels = _label_map_pixels(
            derive_seed(seed, "labels", identity) % 2**32,
            width, height, attrs.category)
        Image.fromarray(labels, mode="L").save(labels_path)

        (attr_dir / f"{identity}.json").write_text(
            serialize(attrs), encoding="utf-8")

        entries.append(CatalogEntry(
            identity=identity,
            garment=ImageRef(id=identity, path=str(garment_path),
                             width=width, height=height,
                             role=ImageRole.GARMENT),
            person=ImageRef(id=f"{identity}-p", path=str(person_path),
                            width=width, height=height,
                            role=ImageRole.PERSON),
            label_map=str(labels_path),
        ))

    (root / "catalog.json").write_text(
        json.dumps({"entries": [e.to_dict() for e in entries]},
                   sort_keys=True, indent=2),
        encoding="utf-8")
    return entries
