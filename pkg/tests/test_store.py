import json

import pytest

from garmentlab.attributes import GarmentCategory
from garmentlab.clients import ImageRole
from garmentlab.instructions import EditType
from garmentlab.store import (
    BenchmarkTaskKind,
    DuplicateId,
    Manifest,
    ManifestWriter,
    RecordStatus,
    Split,
    SplitNotAssigned,
    StorageFailure,
    UnmappedIdentity,
    assign_splits,
    compute_stats,
    export_benchmark_tasks,
    load_tasks,
    save_tasks,
)

from conftest import make_record


def small_manifest(n=6, threshold=80.0) -> Manifest:
    m = Manifest(seed=3, threshold=threshold)
    for i in range(n):
        m.append(make_record(f"g{i:03d}-e00", identity=f"g{i:03d}",
                             category=list(GarmentCategory)[i % 3]))
    return m


def test_record_requires_all_four_roles():
    record = make_record("g000-e00")
    images = dict(record.images)
    del images[ImageRole.PERSON_EDIT]
    from dataclasses import replace
    with pytest.raises(ValueError):
        replace(record, images=images)


def test_duplicate_sample_ids_rejected():
    m = small_manifest()
    with pytest.raises(DuplicateId):
        m.append(make_record("g000-e00"))
    with pytest.raises(DuplicateId):
        Manifest(seed=1, threshold=80.0,
                 records=[make_record("a-e00"), make_record("a-e00")])


def test_status_must_agree_with_scores():
    m = Manifest(seed=1, threshold=80.0)
    bad = make_record("x-e00", garment_score=50.0, person_score=50.0,
                      status=RecordStatus.VERIFIED)
    with pytest.raises(ValueError):
        m.append(bad)


def test_finalize_sorts_by_sample_id():
    m = Manifest(seed=1, threshold=80.0)
    for sid in ("b-e00", "a-e01", "a-e00"):
        m.append(make_record(sid))
    m.finalize()
    assert [r.sample_id for r in m.records] == ["a-e00", "a-e01", "b-e00"]


def test_save_load_round_trip_is_byte_stable(tmp_path):
    m = small_manifest()
    m.finalize()
    p1, p2 = tmp_path / "m1.jsonl", tmp_path / "m2.jsonl"
    m.save(p1)
    Manifest.load(p1).save(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_drops_partial_trailing_line(tmp_path):
    m = small_manifest()
    m.finalize()
    path = tmp_path / "m.jsonl"
    m.save(path)
    full = Manifest.load(path)
    # simulate a crash mid-append: a final record without its newline
    with open(path, "a", encoding="utf-8") as fh:
        fh.write('{"sample_id": "torn')
    recovered = Manifest.load(path)
    assert [r.sample_id for r in recovered.records] == \
           [r.sample_id for r in full.records]


def test_load_rejects_headerless_file(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text('{"not": "a header"}\n', encoding="utf-8")
    with pytest.raises(StorageFailure):
        Manifest.load(path)
    path.write_text("", encoding="utf-8")
    with pytest.raises(StorageFailure):
        Manifest.load(path)


def test_manifest_writer_appends_durably(tmp_path):
    path = tmp_path / "m.jsonl"
    writer = ManifestWriter(path, Manifest(seed=2, threshold=80.0))
    records = [make_record(f"w{i}-e00") for i in range(4)]
    for r in records:
        writer.append(r)
    loaded = Manifest.load(path)
    assert [r.sample_id for r in loaded.records] == \
           [r.sample_id for r in records]
    assert loaded.seed == 2


def test_resolve_paths_rebases_relative_only(tmp_path):
    m = small_manifest(n=1)
    rel = m.records[0].images[ImageRole.GARMENT].path
    assert not rel.startswith("/")
    resolved = m.resolve_paths("/data/root")
    assert resolved.records[0].images[ImageRole.GARMENT].path == \
           f"/data/root/{rel}"
    # absolute paths pass through untouched
    again = resolved.resolve_paths("/elsewhere")
    assert again.records[0].images[ImageRole.GARMENT].path == \
           f"/data/root/{rel}"


def test_assign_splits_is_identity_level():
    m = Manifest(seed=1, threshold=80.0)
    for sid in ("a-e00", "a-e01", "b-e00"):
        m.append(make_record(sid))
    out = assign_splits(m, {"a": "train", "b": "test"})
    by_id = {r.sample_id: r.split for r in out.records}
    assert by_id == {"a-e00": Split.TRAIN, "a-e01": Split.TRAIN,
                     "b-e00": Split.TEST}
    with pytest.raises(UnmappedIdentity):
        assign_splits(m, {"a": "train"})


def test_compute_stats_counts_verified_only():
    m = Manifest(seed=1, threshold=80.0)
    m.append(make_record("a-e00", edit_type=EditType.CHANGE_COLOR))
    m.append(make_record("a-e01", edit_type=EditType.CHANGE_COLOR))
    m.append(make_record("b-e00", edit_type=EditType.ADD_DETAIL,
                         category=GarmentCategory.DRESSES))
    m.append(make_record("c-e00", garment_score=10.0))  # rejected
    stats = compute_stats(m)
    assert stats.total_verified == 3
    assert stats.by_edit_type[EditType.CHANGE_COLOR] == 2
    assert stats.edit_type_pct[EditType.CHANGE_COLOR] == 67
    assert stats.by_category[GarmentCategory.DRESSES] == 1
    assert stats.category_pct[GarmentCategory.DRESSES] == 33.3
    assert stats.distinct_identities == 2
    assert stats.unique_instructions <= 3
    rendered = stats.render()
    assert "verified samples: 3" in rendered


def split_manifest(n_test=5, n_train=5) -> Manifest:
    m = Manifest(seed=9, threshold=80.0)
    for i in range(n_train):
        m.append(make_record(f"tr{i:03d}-e00", split=Split.TRAIN))
    for i in range(n_test):
        m.append(make_record(f"te{i:03d}-e00", split=Split.TEST,
                             category=list(GarmentCategory)[i % 3]))
    m.finalize()
    return m


def test_export_requires_assigned_splits():
    m = small_manifest()  # splits unassigned
    with pytest.raises(SplitNotAssigned):
        export_benchmark_tasks(m, BenchmarkTaskKind.VTON_PAIRED)


def test_paired_tasks_reconstruct_own_originals():
    m = split_manifest()
    tasks = export_benchmark_tasks(m, BenchmarkTaskKind.VTON_PAIRED)
    assert len(tasks) == 5
    for t in tasks:
        record = m.get(t.task_id)
        assert t.inputs["garment_edit"] == record.images[ImageRole.GARMENT_EDIT]
        assert t.inputs["person_edit"] == record.images[ImageRole.PERSON_EDIT]
        assert t.ground_truth == record.images[ImageRole.PERSON]
        assert t.instruction_text == record.instruction.reverse_text


def test_vtoff_tasks_target_the_garment():
    m = split_manifest()
    tasks = export_benchmark_tasks(m, BenchmarkTaskKind.VTOFF)
    assert len(tasks) == 5
    for t in tasks:
        record = m.get(t.task_id)
        assert set(t.inputs) == {"person_edit"}
        assert t.ground_truth == record.images[ImageRole.GARMENT]


def test_unpaired_tasks_are_a_derangement():
    m = split_manifest(n_test=9)
    tasks = export_benchmark_tasks(m, BenchmarkTaskKind.VTON_UNPAIRED)
    assert len(tasks) == 9
    for t in tasks:
        record = m.get(t.task_id)
        own = record.images[ImageRole.GARMENT_EDIT]
        assert t.inputs["garment_edit"] != own  # no self-pairing
    # reproducible: same manifest, same pairing
    again = export_benchmark_tasks(m, BenchmarkTaskKind.VTON_UNPAIRED)
    assert [t.inputs["garment_edit"].id for t in tasks] == \
           [t.inputs["garment_edit"].id for t in again]


def test_unpaired_donors_share_category_when_possible():
    m = split_manifest(n_test=9)
    for t in export_benchmark_tasks(m, BenchmarkTaskKind.VTON_UNPAIRED):
        donor_id = t.inputs["garment_edit"].id.split("-")[0]
        donor = next(r for r in m.records
                     if r.sample_id.startswith(donor_id))
        assert donor.category is m.get(t.task_id).category


def test_tasks_jsonl_round_trip(tmp_path):
    m = split_manifest()
    tasks = export_benchmark_tasks(m, BenchmarkTaskKind.VTON_PAIRED)
    path = tmp_path / "tasks.jsonl"
    save_tasks(tasks, path)
    assert load_tasks(path) == tasks
    # each line is standalone JSON
    for line in path.read_text(encoding="utf-8").splitlines():
        json.loads(line)
