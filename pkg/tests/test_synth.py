"""Synthetic generator: label rule, sparsity, determinism."""

import hashlib

import numpy as np
import pytest

from ainet.errors import ConfigError
from ainet.synth import SynthConfig, class_signatures, generate_bag, generate_dataset


def cfg(**kw):
    base = dict(n_bags=40, n_instances=64, dim=8, n_classes=2, tumor_rate=0.1,
                n_morphologies=4, noise_sigma=0.5, seed=123)
    base.update(kw)
    return SynthConfig(**base)


def dir_hash(path):
    h = hashlib.sha256()
    for f in sorted(path.iterdir()):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()


class TestLabelRule:
    def test_negative_bags_have_zero_tumors(self):
        c = cfg()
        for i in range(0, 40, 2):  # even indices are class 0
            bag, info = generate_bag(c, i)
            assert bag.label == 0
            assert info["tumor_count"] == 0

    def test_positive_bags_have_at_least_one_tumor(self):
        c = cfg()
        for i in range(1, 40, 2):
            bag, info = generate_bag(c, i)
            assert bag.label == 1
            assert info["tumor_count"] >= 1

    def test_zero_rate_positive_bag_forces_one_tumor(self):
        c = cfg(tumor_rate=0.0)
        bag, info = generate_bag(c, 1)
        assert bag.label == 1
        assert info["tumor_count"] == 1

    def test_tumors_confined_to_one_morphology_block(self):
        c = cfg(tumor_rate=0.15)
        for i in (1, 3, 5, 7):
            _, info = generate_bag(c, i)
            blocks = set(info["morphology"][info["tumor_indices"]].tolist())
            assert len(blocks) == 1


def test_empirical_tumor_rate():
    c = cfg(n_bags=4000)
    fractions = []
    for i in range(1, 4000, 2):
        _, info = generate_bag(c, i)
        fractions.append(info["tumor_count"] / c.n_instances)
    assert abs(np.mean(fractions) - c.tumor_rate) < 0.02


def test_signatures_orthonormal():
    c = cfg(n_classes=4, dim=8)
    sig = class_signatures(c)
    assert sig.shape == (3, 8)
    gram = sig @ sig.T
    assert np.abs(gram - np.eye(3)).max() < 1e-12


def test_signature_appears_in_tumor_instances():
    c = cfg(noise_sigma=0.0, tumor_rate=0.2)
    sig = class_signatures(c)[0]
    bag, info = generate_bag(c, 1)
    tumor = info["tumor_indices"]
    non_tumor_same_block = [
        i for i in range(c.n_instances)
        if info["morphology"][i] == info["morphology"][tumor[0]] and i not in set(tumor)
    ]
    delta = bag.features[tumor[0]] - bag.features[non_tumor_same_block[0]]
    assert np.abs(delta - sig).max() < 1e-6  # float32 rounding only


def test_too_many_classes_for_dim():
    with pytest.raises(ConfigError, match="orthogonal"):
        cfg(n_classes=10, dim=4).validate()


def test_grid_coords_and_blocked_morphologies():
    c = cfg(n_instances=16)
    bag, info = generate_bag(c, 0)
    assert sorted(map(tuple, bag.coords.tolist())) == [
        (x, y) for x in range(4) for y in range(4)
    ]
    # morphology blocks are contiguous index ranges
    m = info["morphology"]
    changes = int(np.sum(m[1:] != m[:-1]))
    assert changes == c.n_morphologies - 1


class TestDeterminism:
    def test_same_seed_identical_bytes(self, tmp_path):
        c = cfg(n_bags=6)
        generate_dataset(c, tmp_path / "a")
        generate_dataset(c, tmp_path / "b")
        assert dir_hash(tmp_path / "a") == dir_hash(tmp_path / "b")

    def test_different_seed_differs(self, tmp_path):
        generate_dataset(cfg(n_bags=6), tmp_path / "a")
        generate_dataset(cfg(n_bags=6, seed=124), tmp_path / "b")
        assert dir_hash(tmp_path / "a") != dir_hash(tmp_path / "b")

    def test_bag_generation_is_order_independent(self):
        c = cfg()
        bag5_first, _ = generate_bag(c, 5)
        generate_bag(c, 0)
        bag5_again, _ = generate_bag(c, 5)
        assert np.array_equal(bag5_first.features, bag5_again.features)

    def test_in_memory_matches_file_round_trip(self, tmp_path):
        from ainet.bags import read_bag_file

        c = cfg(n_bags=3)
        manifest = generate_dataset(c, tmp_path)
        bag, _ = generate_bag(c, 1)
        back = read_bag_file(tmp_path / "bag_00001.aifb")
        assert np.array_equal(bag.features, back.features)
        assert manifest.name == "manifest.csv"


def test_multiclass_labels_round_robin(tmp_path):
    c = cfg(n_classes=3, n_bags=9)
    generate_dataset(c, tmp_path)
    from ainet.bags import read_manifest

    records = read_manifest(tmp_path / "manifest.csv", 3)
    assert [r[2] for r in records] == [0, 1, 2, 0, 1, 2, 0, 1, 2]
