"""Structured garment-attribute schema and attribute-state transitions.

The attribute banks below are closed vocabularies used both to validate
extracted attributes and to populate instruction-template slots. Feature
names are an open set; only colors, patterns, materials, and structural
tokens are closed.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

SCHEMA_VERSION = 1

SOLID = "solid"

COLOR_BANK = (
    "red", "blue", "green", "yellow", "black", "white", "purple", "orange",
    "pink", "brown", "gray", "navy", "beige", "lavender", "maroon", "teal",
)

PATTERN_BANK = (
    "polka dot", "striped", "floral", "geometric", "checkered", "paisley",
    "camouflage", "leopard print", "gingham", "houndstooth", "abstract",
)

MATERIAL_BANK = ("denim", "leather", "silk", "wool", "cotton", "linen")

SLEEVE_BANK = (
    "long sleeves", "short sleeves", "sleeveless", "cap sleeves",
    "puffy sleeves", "three-quarter sleeves",
)

NECKLINE_BANK = (
    "v-neck", "crew neck", "scoop neck", "square neck", "high neck", "collar",
)

STRUCTURAL_BANKS = {"sleeves": SLEEVE_BANK, "neckline": NECKLINE_BANK}

# Bidirectional feature replacement pairs.
REPLACEMENT_PAIRS = frozenset({
    ("belt", "bow"), ("bow", "belt"),
    ("belt", "drawstring"), ("drawstring", "belt"),
    ("bow", "buttons"), ("buttons", "bow"),
})


class GarmentCategory(Enum):
    UPPER_BODY = "upper_body"
    LOWER_BODY = "lower_body"
    DRESSES = "dresses"


# Category-specific addable details as (name, location) pairs; location is
# None when the template's generic form applies.
ADDABLE_FEATURES = {
    GarmentCategory.UPPER_BODY: (
        ("bow", "neck"), ("pockets", None), ("chest pocket", None),
        ("zipper", None), ("buttons", None),
    ),
    GarmentCategory.LOWER_BODY: (("belt", None), ("drawstring", None)),
    GarmentCategory.DRESSES: (
        ("belt", None), ("fitted belt", None), ("pockets", None),
        ("drawstring", None), ("bow", "neck"), ("bow", "waist"),
    ),
}


class MalformedDocument(ValueError):
    """Attribute document is not well-formed structured text."""


class UnknownCategory(ValueError):
    """Category token is not one of the three garment categories."""


class OutOfBankValue(ValueError):
    """A closed-bank field holds a value outside its bank."""

    def __init__(self, fieldname: str, value: Any):
        self.fieldname = fieldname
        self.value = value
        super().__init__(f"{fieldname}: {value!r} is not in the bank")


class InapplicableDelta(ValueError):
    """A delta's precondition does not hold on the given state."""


@dataclass(frozen=True)
class FeatureEntry:
    """One distinctive feature on a garment (e.g., a belt at the waist)."""

    name: str
    location: str | None = None
    color: str | None = None
    color_editable: bool = False
    removable: bool = False
    replaceable_with: str | None = None

    def __post_init__(self):
        if self.color is not None and self.color not in COLOR_BANK:
            raise OutOfBankValue("feature.color", self.color)
        if self.replaceable_with is not None:
            if (self.name, self.replaceable_with) not in REPLACEMENT_PAIRS:
                raise OutOfBankValue(
                    "feature.replaceable_with",
                    f"{self.name} -> {self.replaceable_with}",
                )

    @property
    def key(self) -> tuple[str, str]:
        return (self.name, self.location or "")


@dataclass(frozen=True)
class GarmentAttributes:
    """Structured semantics of a single garment.

    ``distinctive_features`` is kept canonically sorted by (name, location)
    so that states compare field-for-field regardless of edit order.
    """

    category: GarmentCategory
    base_color: str
    pattern: str
    material: str
    sleeves: str | None = None
    neckline: str | None = None
    distinctive_features: tuple[FeatureEntry, ...] = ()
    free_text: str = ""

    def __post_init__(self):
        if self.base_color not in COLOR_BANK:
            raise OutOfBankValue("base_color", self.base_color)
        if self.pattern != SOLID and self.pattern not in PATTERN_BANK:
            raise OutOfBankValue("pattern", self.pattern)
        if self.material not in MATERIAL_BANK:
            raise OutOfBankValue("material", self.material)
        if self.category is GarmentCategory.LOWER_BODY:
            if self.sleeves is not None or self.neckline is not None:
                raise OutOfBankValue(
                    "sleeves/neckline", "not applicable to lower_body")
        if self.sleeves is not None and self.sleeves not in SLEEVE_BANK:
            raise OutOfBankValue("sleeves", self.sleeves)
        if self.neckline is not None and self.neckline not in NECKLINE_BANK:
            raise OutOfBankValue("neckline", self.neckline)
        feats = tuple(sorted(self.distinctive_features, key=lambda f: f.key))
        keys = [f.key for f in feats]
        if len(set(keys)) != len(keys):
            raise MalformedDocument(
                f"duplicate feature (name, location) pairs: {keys}")
        object.__setattr__(self, "distinctive_features", feats)

    def feature(self, name: str, location: str | None = None) -> FeatureEntry | None:
        for f in self.distinctive_features:
            if f.name == name and (location is None or f.location == location):
                return f
        return None


def is_solid(attrs: GarmentAttributes) -> bool:
    """True iff the garment pattern is the solid token."""
    return attrs.pattern == SOLID


class DeltaKind(Enum):
    SET_COLOR = "set_color"
    SET_PATTERN = "set_pattern"
    SET_MATERIAL = "set_material"
    SET_STRUCTURAL = "set_structural"
    ADD_FEATURE = "add_feature"
    REMOVE_FEATURE = "remove_feature"
    RECOLOR_FEATURE = "recolor_feature"
    REPLACE_FEATURE = "replace_feature"


@dataclass(frozen=True)
class AttributeDelta:
    """A single attribute-state transition; exactly one variant per instance.

    ``old`` carries the pre-edit value so every delta is exactly invertible.
    """

    kind: DeltaKind
    old: str | None = None
    new: str | None = None
    attribute: str | None = None       # SET_STRUCTURAL: "sleeves" | "neckline"
    entry: FeatureEntry | None = None  # ADD/REMOVE_FEATURE
    name: str | None = None            # RECOLOR: feature name
    location: str | None = None        # RECOLOR/REPLACE: feature location

    @classmethod
    def set_color(cls, old: str, new: str) -> "AttributeDelta":
        return cls(DeltaKind.SET_COLOR, old=old, new=new)

    @classmethod
    def set_pattern(cls, old: str, new: str) -> "AttributeDelta":
        return cls(DeltaKind.SET_PATTERN, old=old, new=new)

    @classmethod
    def set_material(cls, old: str, new: str) -> "AttributeDelta":
        return cls(DeltaKind.SET_MATERIAL, old=old, new=new)

    @classmethod
    def set_structural(cls, attribute: str, old: str, new: str) -> "AttributeDelta":
        return cls(DeltaKind.SET_STRUCTURAL, attribute=attribute, old=old, new=new)

    @classmethod
    def add_feature(cls, entry: FeatureEntry) -> "AttributeDelta":
        return cls(DeltaKind.ADD_FEATURE, entry=entry)

    @classmethod
    def remove_feature(cls, entry: FeatureEntry) -> "AttributeDelta":
        return cls(DeltaKind.REMOVE_FEATURE, entry=entry)

    @classmethod
    def recolor_feature(cls, name: str, location: str | None,
                        old: str, new: str) -> "AttributeDelta":
        return cls(DeltaKind.RECOLOR_FEATURE, name=name, location=location,
                   old=old, new=new)

    @classmethod
    def replace_feature(cls, source: str, target: str,
                        location: str | None = None) -> "AttributeDelta":
        return cls(DeltaKind.REPLACE_FEATURE, old=source, new=target,
                   location=location)

    def inverse(self) -> "AttributeDelta":
        """The delta that exactly undoes this one."""
        k = self.kind
        if k in (DeltaKind.SET_COLOR, DeltaKind.SET_PATTERN,
                 DeltaKind.SET_MATERIAL):
            return dataclasses.replace(self, old=self.new, new=self.old)
        if k is DeltaKind.SET_STRUCTURAL:
            return dataclasses.replace(self, old=self.new, new=self.old)
        if k is DeltaKind.ADD_FEATURE:
            return dataclasses.replace(self, kind=DeltaKind.REMOVE_FEATURE)
        if k is DeltaKind.REMOVE_FEATURE:
            return dataclasses.replace(self, kind=DeltaKind.ADD_FEATURE)
        if k is DeltaKind.RECOLOR_FEATURE:
            return dataclasses.replace(self, old=self.new, new=self.old)
        if k is DeltaKind.REPLACE_FEATURE:
            return dataclasses.replace(self, old=self.new, new=self.old)
        raise InapplicableDelta(f"unknown delta kind {k}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        for f in ("old", "new", "attribute", "name", "location"):
            v = getattr(self, f)
            if v is not None:
                d[f] = v
        if self.entry is not None:
            d["entry"] = _feature_to_dict(self.entry)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "AttributeDelta":
        entry = _feature_from_dict(d["entry"]) if "entry" in d else None
        return cls(kind=DeltaKind(d["kind"]), old=d.get("old"),
                   new=d.get("new"), attribute=d.get("attribute"),
                   entry=entry, name=d.get("name"), location=d.get("location"))


def apply_delta(attrs: GarmentAttributes, delta: AttributeDelta) -> GarmentAttributes:
    """Apply a delta, returning a new state with only the targeted field changed.

    Raises InapplicableDelta when the delta's precondition fails (missing
    feature, structural attribute invalid for the category, stale old value).
    """
    k = delta.kind
    if k is DeltaKind.SET_COLOR:
        _require(attrs.base_color == delta.old,
                 f"base_color is {attrs.base_color!r}, not {delta.old!r}")
        return dataclasses.replace(attrs, base_color=_banked("base_color", delta.new, COLOR_BANK))
    if k is DeltaKind.SET_PATTERN:
        _require(attrs.pattern == delta.old,
                 f"pattern is {attrs.pattern!r}, not {delta.old!r}")
        if delta.new != SOLID and delta.new not in PATTERN_BANK:
            raise OutOfBankValue("pattern", delta.new)
        return dataclasses.replace(attrs, pattern=delta.new)
    if k is DeltaKind.SET_MATERIAL:
        _require(attrs.material == delta.old,
                 f"material is {attrs.material!r}, not {delta.old!r}")
        return dataclasses.replace(attrs, material=_banked("material", delta.new, MATERIAL_BANK))
    if k is DeltaKind.SET_STRUCTURAL:
        attr = delta.attribute
        _require(attr in STRUCTURAL_BANKS, f"unknown structural attribute {attr!r}")
        _require(attrs.category is not GarmentCategory.LOWER_BODY,
                 "lower_body garments have no structural attributes")
        current = getattr(attrs, attr)
        _require(current == delta.old,
                 f"{attr} is {current!r}, not {delta.old!r}")
        _banked(attr, delta.new, STRUCTURAL_BANKS[attr])
        return dataclasses.replace(attrs, **{attr: delta.new})
    if k is DeltaKind.ADD_FEATURE:
        entry = delta.entry
        _require(entry is not None, "add_feature requires an entry")
        _require(attrs.feature(entry.name, entry.location) is None,
                 f"feature {entry.key} already present")
        return dataclasses.replace(
            attrs, distinctive_features=attrs.distinctive_features + (entry,))
    if k is DeltaKind.REMOVE_FEATURE:
        entry = delta.entry
        _require(entry is not None, "remove_feature requires an entry")
        remaining = tuple(f for f in attrs.distinctive_features
                          if f.key != entry.key)
        _require(len(remaining) < len(attrs.distinctive_features),
                 f"feature {entry.key} not present")
        return dataclasses.replace(attrs, distinctive_features=remaining)
    if k is DeltaKind.RECOLOR_FEATURE:
        target = _find_feature(attrs, delta.name, delta.location)
        _require(target.color_editable, f"feature {target.key} is not color-editable")
        _require(target.color == delta.old,
                 f"feature color is {target.color!r}, not {delta.old!r}")
        _banked("feature.color", delta.new, COLOR_BANK)
        updated = dataclasses.replace(target, color=delta.new)
        return _swap_feature(attrs, target, updated)
    if k is DeltaKind.REPLACE_FEATURE:
        _require((delta.old, delta.new) in REPLACEMENT_PAIRS,
                 f"({delta.old}, {delta.new}) is not a replacement pair")
        target = _find_feature(attrs, delta.old, delta.location)
        _require(target.replaceable_with == delta.new,
                 f"feature {target.key} is not replaceable with {delta.new!r}")
        updated = dataclasses.replace(target, name=delta.new,
                                      replaceable_with=delta.old)
        return _swap_feature(attrs, target, updated)
    raise InapplicableDelta(f"unknown delta kind {k}")


def _require(cond: bool, why: str) -> None:
    if not cond:
        raise InapplicableDelta(why)


def _banked(fieldname: str, value: str | None, bank: tuple[str, ...]) -> str:
    if value not in bank:
        raise OutOfBankValue(fieldname, value)
    return value


def _find_feature(attrs: GarmentAttributes, name: str | None,
                  location: str | None) -> FeatureEntry:
    for f in attrs.distinctive_features:
        if f.name == name and (location is None or f.location == location):
            return f
    raise InapplicableDelta(f"feature {name!r} (location={location!r}) not present")


def _swap_feature(attrs: GarmentAttributes, old: FeatureEntry,
                  new: FeatureEntry) -> GarmentAttributes:
    feats = tuple(new if f is old else f for f in attrs.distinctive_features)
    return dataclasses.replace(attrs, distinctive_features=feats)


def _feature_to_dict(f: FeatureEntry) -> dict:
    d: dict[str, Any] = {"name": f.name}
    if f.location is not None:
        d["location"] = f.location
    if f.color is not None:
        d["color"] = f.color
    d["color_editable"] = f.color_editable
    d["removable"] = f.removable
    if f.replaceable_with is not None:
        d["replaceable_with"] = f.replaceable_with
    return d


def _feature_from_dict(d: Mapping[str, Any]) -> FeatureEntry:
    if not isinstance(d, Mapping) or "name" not in d:
        raise MalformedDocument(f"bad feature entry: {d!r}")
    return FeatureEntry(
        name=d["name"],
        location=d.get("location"),
        color=d.get("color"),
        color_editable=bool(d.get("color_editable", False)),
        removable=bool(d.get("removable", False)),
        replaceable_with=d.get("replaceable_with"),
    )


def parse_attributes(document: str | bytes | Mapping[str, Any]) -> GarmentAttributes:
    """Parse a structured attribute document into validated GarmentAttributes.

    Accepts a JSON string/bytes or an already-decoded mapping. Unknown extra
    fields are ignored; ``color`` is accepted as an alias for ``base_color``.
    Structural fields are dropped for lower-body garments.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as e:
            raise MalformedDocument(f"invalid JSON: {e}") from e
    else:
        doc = document
    if not isinstance(doc, Mapping):
        raise MalformedDocument(f"expected an object, got {type(doc).__name__}")

    if "category" not in doc:
        raise MalformedDocument("missing required field: category")
    try:
        category = GarmentCategory(doc["category"])
    except ValueError:
        raise UnknownCategory(f"unknown category: {doc['category']!r}") from None

    color = doc.get("base_color", doc.get("color"))
    for req, val in (("base_color", color), ("pattern", doc.get("pattern")),
                     ("material", doc.get("material"))):
        if val is None:
            raise MalformedDocument(f"missing required field: {req}")

    sleeves = doc.get("sleeves")
    neckline = doc.get("neckline")
    if category is GarmentCategory.LOWER_BODY:
        sleeves = neckline = None

    features = tuple(_feature_from_dict(f)
                     for f in doc.get("distinctive_features", ()))
    return GarmentAttributes(
        category=category,
        base_color=color,
        pattern=doc["pattern"],
        material=doc["material"],
        sleeves=sleeves,
        neckline=neckline,
        distinctive_features=features,
        free_text=str(doc.get("free_text", "")),
    )


def serialize(attrs: GarmentAttributes) -> str:
    """Serialize to the canonical UTF-8 structured-text record.

    parse_attributes(serialize(a)) == a for every valid state.
    """
    doc: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "category": attrs.category.value,
        "base_color": attrs.base_color,
        "pattern": attrs.pattern,
        "material": attrs.material,
    }
    if attrs.sleeves is not None:
        doc["sleeves"] = attrs.sleeves
    if attrs.neckline is not None:
        doc["neckline"] = attrs.neckline
    if attrs.distinctive_features:
        doc["distinctive_features"] = [
            _feature_to_dict(f) for f in attrs.distinctive_features]
    if attrs.free_text:
        doc["free_text"] = attrs.free_text
    return json.dumps(doc, sort_keys=True)
