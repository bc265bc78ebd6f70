"""Rule-based synthesis of garment edit instructions.

Seven edit types, each rendered from a fixed template with category-aware
slot domains. Every synthesized instruction carries a paired reverse
instruction and an exactly invertible attribute delta, so forward-then-
reverse application is the identity on the source state.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping

from .attributes import (
    ADDABLE_FEATURES,
    COLOR_BANK,
    MATERIAL_BANK,
    PATTERN_BANK,
    SOLID,
    STRUCTURAL_BANKS,
    AttributeDelta,
    FeatureEntry,
    GarmentAttributes,
    is_solid,
)


class EditType(Enum):
    CHANGE_COLOR = "change_color"
    CHANGE_PATTERN = "change_pattern"
    CHANGE_MATERIAL = "change_material"
    MODIFY_STRUCTURE = "modify_structure"
    ADD_DETAIL = "add_detail"
    REMOVE_ELEMENT = "remove_element"
    FINE_GRAINED = "fine_grained"


# Target generation proportions (percent), used for at-scale sampling.
EDIT_TYPE_PROPORTIONS = {
    EditType.ADD_DETAIL: 27,
    EditType.CHANGE_PATTERN: 27,
    EditType.CHANGE_COLOR: 20,
    EditType.MODIFY_STRUCTURE: 11,
    EditType.CHANGE_MATERIAL: 10,
    EditType.REMOVE_ELEMENT: 4,
    EditType.FINE_GRAINED: 1,
}

# Human-readable names for structural attributes inside templates.
STRUCTURAL_DISPLAY = {"sleeves": "sleeve length", "neckline": "neckline"}
_DISPLAY_TO_STRUCTURAL = {v: k for k, v in STRUCTURAL_DISPLAY.items()}

# Template strings, keyed by (edit type, variant). Placeholders use {slot}.
TEMPLATES: dict[tuple[EditType, str], str] = {
    (EditType.CHANGE_COLOR, "default"):
        "Change the color of the garment to {target_color}",
    (EditType.CHANGE_PATTERN, "additive"):
        "Add a {target_pattern} pattern to the garment",
    (EditType.CHANGE_PATTERN, "replacement"):
        "Replace the {source_pattern} pattern with a {target_pattern} pattern",
    (EditType.CHANGE_PATTERN, "removal"):
        "Remove the {target_pattern} pattern from the garment, "
        "making it solid {base_color}",
    (EditType.CHANGE_MATERIAL, "default"):
        "Make the garment {garment_color} {target_material}",
    (EditType.MODIFY_STRUCTURE, "default"):
        "Change the {attribute} to {target_value}",
    (EditType.ADD_DETAIL, "default"):
        "Add a {feature} to the garment",
    (EditType.ADD_DETAIL, "located"):
        "Add a {feature} at the {location} of the garment",
    (EditType.REMOVE_ELEMENT, "default"):
        "Remove the {feature} from the garment",
    (EditType.FINE_GRAINED, "recolor"):
        "Change the color of the {feature} to {target_color}",
    (EditType.FINE_GRAINED, "replace"):
        "Replace the {source_feature} with {target_feature}",
}


class MissingSlot(KeyError):
    """A template placeholder has no corresponding slot value."""


class NoValidTarget(ValueError):
    """The candidate domain for the requested edit type is empty."""


class InvalidEditType(ValueError):
    """The edit type is not admissible for the given source state."""


@dataclass(frozen=True)
class FineGrainedOption:
    """One fine-grained candidate: recolor a detail or replace it."""

    variant: str  # "recolor" | "replace"
    entry: FeatureEntry
    target_color: str | None = None  # recolor only


@dataclass(frozen=True)
class EditCandidateSet:
    """Admissible slot domains per edit type for a given source state."""

    color_targets: tuple[str, ...]
    pattern_targets: tuple[str, ...]
    material_targets: tuple[str, ...]
    structure_targets: tuple[tuple[str, str], ...]  # (attribute, target value)
    addable: tuple[tuple[str, str | None], ...]      # (feature, location)
    removable: tuple[FeatureEntry, ...]
    fine_grained: tuple[FineGrainedOption, ...]

    def valid_types(self) -> tuple[EditType, ...]:
        out = []
        if self.color_targets:
            out.append(EditType.CHANGE_COLOR)
        if self.pattern_targets:
            out.append(EditType.CHANGE_PATTERN)
        if self.material_targets:
            out.append(EditType.CHANGE_MATERIAL)
        if self.structure_targets:
            out.append(EditType.MODIFY_STRUCTURE)
        if self.addable:
            out.append(EditType.ADD_DETAIL)
        if self.removable:
            out.append(EditType.REMOVE_ELEMENT)
        if self.fine_grained:
            out.append(EditType.FINE_GRAINED)
        return tuple(out)


@dataclass(frozen=True)
class EditInstruction:
    """A forward/reverse instruction pair with its attribute delta."""

    edit_type: EditType
    forward_text: str
    reverse_text: str
    forward_delta: AttributeDelta
    reverse_delta: AttributeDelta
    slots: Mapping[str, str]
    seed: int = 0

    def inverted(self) -> "EditInstruction":
        """The instruction that undoes this one (forward/reverse swapped)."""
        return EditInstruction(
            edit_type=self.edit_type,
            forward_text=self.reverse_text,
            reverse_text=self.forward_text,
            forward_delta=self.reverse_delta,
            reverse_delta=self.forward_delta,
            slots=self.slots,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return {
            "edit_type": self.edit_type.value,
            "forward_text": self.forward_text,
            "reverse_text": self.reverse_text,
            "forward_delta": self.forward_delta.to_dict(),
            "reverse_delta": self.reverse_delta.to_dict(),
            "slots": dict(self.slots),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EditInstruction":
        return cls(
            edit_type=EditType(d["edit_type"]),
            forward_text=d["forward_text"],
            reverse_text=d["reverse_text"],
            forward_delta=AttributeDelta.from_dict(d["forward_delta"]),
            reverse_delta=AttributeDelta.from_dict(d["reverse_delta"]),
            slots=dict(d["slots"]),
            seed=int(d.get("seed", 0)),
        )


def derive_seed(*parts: Any) -> int:
    """Stable 64-bit seed from arbitrary key parts (sha256-based)."""
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def render_template(edit_type: EditType, slots: Mapping[str, str],
                    variant: str | None = None) -> str:
    """Render the template for (edit_type, slots) by exact substitution.

    The variant is inferred from the slots present when not given.
    """
    if variant is None:
        variant = _infer_variant(edit_type, slots)
    template = TEMPLATES[(edit_type, variant)]
    try:
        return template.format_map(dict(slots))
    except KeyError as e:
        raise MissingSlot(f"template for {edit_type.value}/{variant} "
                          f"needs slot {e.args[0]!r}") from None


def _infer_variant(edit_type: EditType, slots: Mapping[str, str]) -> str:
    if edit_type is EditType.CHANGE_PATTERN:
        if "base_color" in slots:
            return "removal"
        return "replacement" if "source_pattern" in slots else "additive"
    if edit_type is EditType.ADD_DETAIL:
        return "located" if "location" in slots else "default"
    if edit_type is EditType.FINE_GRAINED:
        return "replace" if "source_feature" in slots else "recolor"
    return "default"


def enumerate_valid_edits(attrs: GarmentAttributes) -> EditCandidateSet:
    """Compute the admissible slot domains for every edit type.

    Color and material changes are restricted to solid garments; target
    domains never contain the corresponding source value.
    """
    solid = is_solid(attrs)
    present_colors = {attrs.base_color} | {
        f.color for f in attrs.distinctive_features if f.color}
    color_targets = tuple(c for c in COLOR_BANK
                          if c not in present_colors) if solid else ()
    pattern_targets = tuple(p for p in PATTERN_BANK if p != attrs.pattern)
    material_targets = tuple(m for m in MATERIAL_BANK
                             if m != attrs.material) if solid else ()

    structure_targets: list[tuple[str, str]] = []
    for attribute, bank in STRUCTURAL_BANKS.items():
        current = getattr(attrs, attribute)
        if current is not None:
            structure_targets.extend(
                (attribute, v) for v in bank if v != current)

    present_names = {f.name for f in attrs.distinctive_features}
    addable = tuple((name, loc)
                    for name, loc in ADDABLE_FEATURES[attrs.category]
                    if name not in present_names)
    removable = tuple(f for f in attrs.distinctive_features if f.removable)

    fine: list[FineGrainedOption] = []
    for f in attrs.distinctive_features:
        if f.color_editable and f.color is not None:
            fine.extend(FineGrainedOption("recolor", f, target_color=c)
                        for c in COLOR_BANK if c != f.color)
        if f.replaceable_with is not None and f.replaceable_with not in present_names:
            fine.append(FineGrainedOption("replace", f))

    return EditCandidateSet(
        color_targets=color_targets,
        pattern_targets=pattern_targets,
        material_targets=material_targets,
        structure_targets=tuple(structure_targets),
        addable=addable,
        removable=removable,
        fine_grained=tuple(fine),
    )


def synthesize_instruction(attrs: GarmentAttributes, edit_type: EditType,
                           seed: int) -> EditInstruction:
    """Sample one instruction of the given type, deterministically in seed."""
    candidates = enumerate_valid_edits(attrs)
    if edit_type not in candidates.valid_types():
        raise InvalidEditType(
            f"{edit_type.value} is not valid for this garment")
    rng = random.Random(seed)

    if edit_type is EditType.CHANGE_COLOR:
        target = rng.choice(candidates.color_targets)
        slots = {"target_color": target}
        delta = AttributeDelta.set_color(attrs.base_color, target)
    elif edit_type is EditType.CHANGE_PATTERN:
        target = rng.choice(candidates.pattern_targets)
        if is_solid(attrs):
            slots = {"target_pattern": target}
        else:
            slots = {"source_pattern": attrs.pattern, "target_pattern": target}
        delta = AttributeDelta.set_pattern(attrs.pattern, target)
    elif edit_type is EditType.CHANGE_MATERIAL:
        target = rng.choice(candidates.material_targets)
        slots = {"garment_color": attrs.base_color, "target_material": target}
        delta = AttributeDelta.set_material(attrs.material, target)
    elif edit_type is EditType.MODIFY_STRUCTURE:
        attribute, target = rng.choice(candidates.structure_targets)
        slots = {"attribute": STRUCTURAL_DISPLAY[attribute],
                 "target_value": target}
        delta = AttributeDelta.set_structural(
            attribute, getattr(attrs, attribute), target)
    elif edit_type is EditType.ADD_DETAIL:
        name, location = rng.choice(candidates.addable)
        slots = {"feature": name}
        if location is not None:
            slots["location"] = location
        entry = FeatureEntry(name=name, location=location, removable=True)
        delta = AttributeDelta.add_feature(entry)
    elif edit_type is EditType.REMOVE_ELEMENT:
        entry = rng.choice(candidates.removable)
        slots = {"feature": entry.name}
        delta = AttributeDelta.remove_feature(entry)
    elif edit_type is EditType.FINE_GRAINED:
        option = rng.choice(candidates.fine_grained)
        if option.variant == "recolor":
            slots = {"feature": option.entry.name,
                     "target_color": option.target_color}
            delta = AttributeDelta.recolor_feature(
                option.entry.name, option.entry.location,
                option.entry.color, option.target_color)
        else:
            slots = {"source_feature": option.entry.name,
                     "target_feature": option.entry.replaceable_with}
            delta = AttributeDelta.replace_feature(
                option.entry.name, option.entry.replaceable_with,
                option.entry.location)
    else:
        raise InvalidEditType(str(edit_type))

    forward_text = render_template(edit_type, slots)
    instruction = EditInstruction(
        edit_type=edit_type,
        forward_text=forward_text,
        reverse_text="",
        forward_delta=delta,
        reverse_delta=delta.inverse(),
        slots=slots,
        seed=seed,
    )
    reverse_text = reverse_of(instruction, attrs)
    return EditInstruction(
        edit_type=edit_type,
        forward_text=forward_text,
        reverse_text=reverse_text,
        forward_delta=delta,
        reverse_delta=delta.inverse(),
        slots=slots,
        seed=seed,
    )


def reverse_of(instruction: EditInstruction, source: GarmentAttributes) -> str:
    """Render the reverse instruction text for an instruction on its source.

    Reverse rules: symmetric templates rerender with source and target
    swapped; additive pattern edits reverse to a pattern-removal sentence;
    add/remove details reverse to each other's template.
    """
    et = instruction.edit_type
    delta = instruction.forward_delta
    slots = instruction.slots
    if et is EditType.CHANGE_COLOR:
        return render_template(et, {"target_color": delta.old})
    if et is EditType.CHANGE_PATTERN:
        if delta.old == SOLID:
            return render_template(et, {"target_pattern": delta.new,
                                        "base_color": source.base_color},
                                   variant="removal")
        return render_template(et, {"source_pattern": delta.new,
                                    "target_pattern": delta.old},
                               variant="replacement")
    if et is EditType.CHANGE_MATERIAL:
        return render_template(et, {"garment_color": slots["garment_color"],
                                    "target_material": delta.old})
    if et is EditType.MODIFY_STRUCTURE:
        return render_template(et, {"attribute": slots["attribute"],
                                    "target_value": delta.old})
    if et is EditType.ADD_DETAIL:
        return render_template(EditType.REMOVE_ELEMENT,
                               {"feature": slots["feature"]})
    if et is EditType.REMOVE_ELEMENT:
        entry = delta.entry
        rev_slots = {"feature": entry.name}
        if entry.location is not None:
            rev_slots["location"] = entry.location
        return render_template(EditType.ADD_DETAIL, rev_slots)
    if et is EditType.FINE_GRAINED:
        if delta.kind.value == "recolor_feature":
            return render_template(et, {"feature": slots["feature"],
                                        "target_color": delta.old},
                                   variant="recolor")
        return render_template(et, {"source_feature": delta.new,
                                    "target_feature": delta.old},
                               variant="replace")
    raise InvalidEditType(str(et))


def choose_edit_type(attrs: GarmentAttributes, seed: int,
                     proportions: Mapping[EditType, float] | None = None,
                     ) -> EditType:
    """Draw an edit type with the target mix, deterministically in seed.

    When the drawn type is not valid for the garment, fall back to the next
    valid type in descending-proportion order (tie-broken by enum order).
    Raises NoValidTarget when no edit type is admissible.
    """
    props = dict(proportions or EDIT_TYPE_PROPORTIONS)
    valid = set(enumerate_valid_edits(attrs).valid_types())
    if not valid:
        raise NoValidTarget("no edit type is admissible for this garment")
    rng = random.Random(seed)
    # Canonical draw order: the proportions mapping may arrive in any key
    # order (e.g. reloaded from a sorted JSON config) and must not change
    # the outcome for a given seed.
    order = sorted(props, key=lambda t: (-props[t], t.value))
    weights = [props[t] for t in order]
    drawn = rng.choices(order, weights=weights, k=1)[0]
    if drawn in valid:
        return drawn
    ranked = sorted(props, key=lambda t: (-props[t], t.value))
    start = ranked.index(drawn)
    for t in ranked[start + 1:] + ranked[:start]:
        if t in valid:
            return t
    raise NoValidTarget("no edit type is admissible for this garment")


# Regexes inverting each template, used by the mock judge to recover the
# edit type and slots from an instruction string. Most-literal templates are
# tried first so e.g. the structural template cannot shadow detail recoloring.
def _literal_length(template: str) -> int:
    return len(re.sub(r"\{\w+\}", "", template))


_TEMPLATE_PATTERNS = [
    (et, variant, re.compile(
        "^" + re.sub(r"\\{(\w+)\\}", r"(?P<\1>.+?)", re.escape(t)) + "$"))
    for (et, variant), t in sorted(TEMPLATES.items(),
                                   key=lambda kv: -_literal_length(kv[1]))
]


def parse_instruction(text: str) -> tuple[EditType, str, dict[str, str]]:
    """Recover (edit_type, variant, slots) from a rendered instruction.

    Raises ValueError when the text matches no known template.
    """
    for et, variant, pattern in _TEMPLATE_PATTERNS:
        m = pattern.match(text)
        if m:
            return et, variant, m.groupdict()
    raise ValueError(f"unrecognized instruction text: {text!r}")
