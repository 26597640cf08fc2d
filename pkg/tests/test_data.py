"""Dataset directory ingestion and the seeded synthetic corpus."""

import hashlib

import numpy as np
import pytest

from igprobe.data import Dataset, gen_synthetic, load_dataset
from igprobe.imgio import write_ppm
from igprobe.tensor import SeededRng


def put_image(directory, name, seed=1, side=8):
    write_ppm(directory / name, SeededRng(seed).uniform([side, side, 3]))


def test_load_two_rows_two_classes(tmp_path):
    put_image(tmp_path, "a.ppm", 1)
    put_image(tmp_path, "b.ppm", 2)
    (tmp_path / "labels.csv").write_text(
        "filename,class_name\na.ppm,cat\nb.ppm,dog\n")
    ds = load_dataset(tmp_path)
    assert len(ds.items) == 2
    assert ds.num_classes == 2
    assert ds.class_names == ["cat", "dog"]  # first-appearance order
    assert [it.label for it in ds.items] == [0, 1]
    assert [it.id for it in ds.items] == ["a.ppm", "b.ppm"]


def test_load_missing_file_names_the_row(tmp_path):
    put_image(tmp_path, "a.ppm")
    (tmp_path / "labels.csv").write_text(
        "filename,class_name\na.ppm,cat\nghost.ppm,dog\n")
    with pytest.raises(ValueError, match=r"row 3.*ghost\.ppm"):
        load_dataset(tmp_path)


def test_load_duplicate_id_rejected(tmp_path):
    put_image(tmp_path, "a.ppm")
    (tmp_path / "labels.csv").write_text(
        "filename,class_name\na.ppm,cat\na.ppm,dog\n")
    with pytest.raises(ValueError, match="duplicate id"):
        load_dataset(tmp_path)


def test_load_requires_labels_csv(tmp_path):
    with pytest.raises(ValueError, match="labels.csv"):
        load_dataset(tmp_path)


def test_load_rejects_bad_header(tmp_path):
    (tmp_path / "labels.csv").write_text("file,klass\na.ppm,cat\n")
    with pytest.raises(ValueError, match="header"):
        load_dataset(tmp_path)


def test_load_rejects_mixed_shapes_naming_offenders(tmp_path):
    put_image(tmp_path, "a.ppm", 1, side=8)
    put_image(tmp_path, "b.ppm", 2, side=8)
    put_image(tmp_path, "odd.ppm", 3, side=9)
    (tmp_path / "labels.csv").write_text(
        "filename,class_name\na.ppm,cat\nb.ppm,cat\nodd.ppm,dog\n")
    with pytest.raises(ValueError, match=r"odd\.ppm.*shape"):
        load_dataset(tmp_path)


def test_load_aggregates_multiple_problems(tmp_path):
    put_image(tmp_path, "a.ppm")
    (tmp_path / "labels.csv").write_text(
        "filename,class_name\na.ppm,cat\na.ppm,cat\nmissing.ppm,dog\nshort\n")
    with pytest.raises(ValueError) as err:
        load_dataset(tmp_path)
    msg = str(err.value)
    assert "duplicate id" in msg and "missing.ppm" in msg and "columns" in msg


# ------------------------------------------------------------------- synthetic

def test_synthetic_counts_and_balance():
    ds = gen_synthetic(1, classes=4, per_class=25, side=32)
    assert len(ds.items) == 100
    assert ds.num_classes == 4
    labels = [it.label for it in ds.items]
    assert all(labels.count(c) == 25 for c in range(4))
    assert ds.image_shape == (32, 32, 3)


def test_synthetic_determinism():
    a = gen_synthetic(3, classes=4, per_class=2, side=16)
    b = gen_synthetic(3, classes=4, per_class=2, side=16)
    for ia, ib in zip(a.items, b.items):
        assert np.array_equal(ia.image, ib.image)
        assert ia.id == ib.id


def test_synthetic_seeds_differ():
    def corpus_hash(seed):
        h = hashlib.sha256()
        for it in gen_synthetic(seed, classes=2, per_class=2, side=16).items:
            h.update(it.image.tobytes())
        return h.hexdigest()
    assert corpus_hash(1) != corpus_hash(2)


def test_synthetic_pixels_in_unit_range():
    ds = gen_synthetic(9, classes=5, per_class=2, side=16)
    for it in ds.items:
        assert it.image.min() >= 0.0 and it.image.max() <= 1.0


def test_synthetic_ids_are_unique_and_class_prefixed():
    ds = gen_synthetic(2, classes=4, per_class=3, side=8)
    ids = [it.id for it in ds.items]
    assert len(set(ids)) == len(ids)
    for it in ds.items:
        assert it.id.startswith(ds.class_names[it.label])


def test_synthetic_validation_errors():
    with pytest.raises(ValueError, match="classes"):
        gen_synthetic(1, classes=1, per_class=2, side=16)
    with pytest.raises(ValueError, match="side"):
        gen_synthetic(1, classes=2, per_class=2, side=4)
    with pytest.raises(ValueError, match="per_class"):
        gen_synthetic(1, classes=2, per_class=0, side=16)
