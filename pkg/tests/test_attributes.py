import json
import random

import pytest

from garmentlab.attributes import (
    COLOR_BANK,
    MATERIAL_BANK,
    PATTERN_BANK,
    SOLID,
    AttributeDelta,
    FeatureEntry,
    GarmentAttributes,
    GarmentCategory,
    InapplicableDelta,
    MalformedDocument,
    OutOfBankValue,
    UnknownCategory,
    apply_delta,
    is_solid,
    parse_attributes,
    serialize,
)
from garmentlab.synthetic import random_attributes


def test_banks_have_expected_sizes():
    assert len(COLOR_BANK) == 16
    assert len(PATTERN_BANK) == 11
    assert len(MATERIAL_BANK) == 6


def test_serialize_parse_round_trip():
    rng = random.Random(11)
    for _ in range(200):
        attrs = random_attributes(rng)
        assert parse_attributes(serialize(attrs)) == attrs


def test_parse_accepts_bytes_and_mapping():
    attrs = GarmentAttributes(category=GarmentCategory.UPPER_BODY,
                              base_color="red", pattern=SOLID,
                              material="cotton", sleeves="long sleeves",
                              neckline="v-neck")
    doc = serialize(attrs)
    assert parse_attributes(doc.encode("utf-8")) == attrs
    assert parse_attributes(json.loads(doc)) == attrs


def test_parse_accepts_color_alias():
    doc = {"category": "lower_body", "color": "navy",
           "pattern": "solid", "material": "denim"}
    attrs = parse_attributes(doc)
    assert attrs.base_color == "navy"


def test_parse_rejects_garbage():
    with pytest.raises(MalformedDocument):
        parse_attributes("not json {")
    with pytest.raises(UnknownCategory):
        parse_attributes({"category": "hats", "base_color": "red",
                          "pattern": "solid", "material": "denim"})
    with pytest.raises(OutOfBankValue):
        parse_attributes({"category": "upper_body", "base_color": "chartreuse",
                          "pattern": "solid", "material": "denim"})
    with pytest.raises(OutOfBankValue):
        parse_attributes({"category": "upper_body", "base_color": "red",
                          "pattern": "zigzag", "material": "denim"})


def test_lower_body_drops_structural_fields():
    doc = {"category": "lower_body", "base_color": "blue",
           "pattern": "solid", "material": "denim",
           "sleeves": "long sleeves"}
    attrs = parse_attributes(doc)
    assert attrs.sleeves is None and attrs.neckline is None


def test_lower_body_constructor_rejects_sleeves():
    with pytest.raises(ValueError):
        GarmentAttributes(category=GarmentCategory.LOWER_BODY,
                          base_color="blue", pattern=SOLID,
                          material="denim", sleeves="long sleeves")


def test_feature_order_is_canonical():
    f1 = FeatureEntry(name="belt", location="waist", removable=True)
    f2 = FeatureEntry(name="bow", location="neck", color="red",
                      color_editable=True)
    a = GarmentAttributes(category=GarmentCategory.DRESSES, base_color="red",
                          pattern=SOLID, material="silk",
                          sleeves="short sleeves", neckline="v-neck",
                          distinctive_features=(f1, f2))
    b = GarmentAttributes(category=GarmentCategory.DRESSES, base_color="red",
                          pattern=SOLID, material="silk",
                          sleeves="short sleeves", neckline="v-neck",
                          distinctive_features=(f2, f1))
    assert a == b
    assert serialize(a) == serialize(b)


def test_duplicate_features_rejected():
    f = FeatureEntry(name="belt", location="waist")
    with pytest.raises(ValueError):
        GarmentAttributes(category=GarmentCategory.DRESSES, base_color="red",
                          pattern=SOLID, material="silk",
                          sleeves="short sleeves", neckline="v-neck",
                          distinctive_features=(f, f))


def test_is_solid():
    assert is_solid(parse_attributes({"category": "lower_body",
                                      "base_color": "red",
                                      "pattern": "solid",
                                      "material": "denim"}))
    assert not is_solid(parse_attributes({"category": "lower_body",
                                          "base_color": "red",
                                          "pattern": "striped",
                                          "material": "denim"}))


def test_set_color_requires_matching_old_value():
    attrs = parse_attributes({"category": "lower_body", "base_color": "red",
                              "pattern": "solid", "material": "denim"})
    delta = AttributeDelta.set_color("blue", "green")
    with pytest.raises(InapplicableDelta):
        apply_delta(attrs, delta)


def test_add_existing_feature_rejected():
    f = FeatureEntry(name="belt", location="waist", removable=True)
    attrs = GarmentAttributes(category=GarmentCategory.DRESSES,
                              base_color="red", pattern=SOLID,
                              material="silk", sleeves="short sleeves",
                              neckline="v-neck", distinctive_features=(f,))
    with pytest.raises(InapplicableDelta):
        apply_delta(attrs, AttributeDelta.add_feature(f))


def test_remove_missing_feature_rejected():
    attrs = parse_attributes({"category": "lower_body", "base_color": "red",
                              "pattern": "solid", "material": "denim"})
    f = FeatureEntry(name="belt", location="waist", removable=True)
    with pytest.raises(InapplicableDelta):
        apply_delta(attrs, AttributeDelta.remove_feature(f))


def test_delta_inverse_restores_state():
    """apply(apply(x, d), d.inverse()) == x over random states and deltas."""
    from garmentlab.instructions import (
        enumerate_valid_edits,
        synthesize_instruction,
    )
    rng = random.Random(99)
    checked = 0
    while checked < 500:
        attrs = random_attributes(rng)
        valid = enumerate_valid_edits(attrs).valid_types()
        if not valid:
            continue
        edit_type = rng.choice(sorted(valid, key=lambda t: t.value))
        ins = synthesize_instruction(attrs, edit_type, rng.getrandbits(32))
        edited = apply_delta(attrs, ins.forward_delta)
        restored = apply_delta(edited, ins.reverse_delta)
        assert restored == attrs
        checked += 1


def test_delta_dict_round_trip():
    rng = random.Random(3)
    from garmentlab.instructions import (
        enumerate_valid_edits,
        synthesize_instruction,
    )
    for _ in range(100):
        attrs = random_attributes(rng)
        valid = enumerate_valid_edits(attrs).valid_types()
        if not valid:
            continue
        edit_type = rng.choice(sorted(valid, key=lambda t: t.value))
        ins = synthesize_instruction(attrs, edit_type, rng.getrandbits(32))
        d = ins.forward_delta
        assert AttributeDelta.from_dict(d.to_dict()) == d
