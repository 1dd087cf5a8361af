"""Bag partitioning, feature-file format, and manifest parsing."""

import struct

import numpy as np
import pytest

from ainet.bags import (Bag, morton_codes, partition, read_bag_file,
                        read_manifest, write_bag_file, write_manifest)
from ainet.errors import FormatError, ManifestError, PartitionError


def make_bag(n, d=3, seed=0, coords=None, label=0):
    rng = np.random.default_rng(seed)
    if coords is None:
        coords = rng.integers(-50, 50, size=(n, 2))
    feats = rng.standard_normal((n, d)).astype(np.float32).astype(np.float64)
    return Bag(bag_id=f"b{seed}", features=feats,
               coords=np.asarray(coords, dtype=np.int32), label=label)


class TestPartition:
    def test_even_split_sizes(self):
        part = partition(make_bag(8), 4)
        assert part.sizes == [2, 2, 2, 2]

    def test_uneven_split_sizes(self):
        part = partition(make_bag(10), 4)
        assert part.sizes == [3, 3, 2, 2]

    def test_morton_order_two_bit(self):
        coords = [(0, 0), (1, 1), (0, 1), (1, 0)]
        bag = make_bag(4, coords=coords)
        order = np.argsort(morton_codes(bag.coords), kind="stable")
        visited = [coords[i] for i in order]
        assert visited == [(0, 0), (1, 0), (0, 1), (1, 1)]

    def test_morton_matches_bit_interleave_oracle(self):
        rng = np.random.default_rng(1)
        coords = rng.integers(-(1 << 15), 1 << 15, size=(64, 2))

        def interleave(x, y):
            out = 0
            for bit in range(32):
                out |= ((x >> bit) & 1) << (2 * bit)
                out |= ((y >> bit) & 1) << (2 * bit + 1)
            return out

        # codes are computed on coordinates shifted by the per-bag minimum
        x0, y0 = coords[:, 0].min(), coords[:, 1].min()
        expected = [interleave(int(x - x0), int(y - y0)) for x, y in coords]
        assert morton_codes(coords).tolist() == expected

    def test_negative_coords_offset(self):
        # same relative layout, shifted into negatives: identical partition
        coords = np.array([[0, 0], [3, 1], [1, 2], [2, 3], [0, 3], [3, 0]])
        a = partition(make_bag(6, coords=coords), 3)
        b = partition(make_bag(6, coords=coords - 100), 3)
        for ra, rb in zip(a.regions, b.regions):
            assert np.array_equal(ra, rb)

    def test_regions_partition_all_indices(self):
        bag = make_bag(23, seed=3)
        part = partition(bag, 4)
        joined = np.concatenate(part.regions)
        assert sorted(joined.tolist()) == list(range(23))
        assert max(part.sizes) - min(part.sizes) <= 1

    def test_too_few_instances(self):
        with pytest.raises(PartitionError):
            partition(make_bag(3), 4)

    def test_deterministic_across_runs(self):
        bag = make_bag(40, seed=4)
        a = partition(bag, 4)
        b = partition(bag, 4)
        for ra, rb in zip(a.regions, b.regions):
            assert np.array_equal(ra, rb)

    def test_permutation_equivariance(self):
        # distinct coords: permuting instances permutes indices but the
        # regions cover the same instance identities
        rng = np.random.default_rng(5)
        n = 24
        coords = np.stack([np.arange(n), rng.permutation(n)], axis=1)
        bag = make_bag(n, coords=coords, seed=6)
        perm = rng.permutation(n)
        permuted = Bag(bag_id="p", features=bag.features[perm],
                       coords=bag.coords[perm], label=0)
        parts_a = partition(bag, 4)
        parts_b = partition(permuted, 4)
        for ra, rb in zip(parts_a.regions, parts_b.regions):
            assert set(ra.tolist()) == set(perm[rb].tolist())


class TestBagFile:
    def test_round_trip_bit_exact(self, tmp_path):
        bag = make_bag(17, d=5, seed=7, label=1)
        p1, p2 = tmp_path / "a.aifb", tmp_path / "b.aifb"
        write_bag_file(bag, p1)
        back = read_bag_file(p1, bag_id=bag.bag_id, label=bag.label)
        assert np.array_equal(back.features, bag.features)
        assert np.array_equal(back.coords, bag.coords)
        write_bag_file(back, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_minimal_file_is_28_bytes(self, tmp_path):
        bag = Bag(bag_id="one", features=np.array([[0.5]]),
                  coords=np.array([[0, 0]], dtype=np.int32), label=0)
        path = tmp_path / "one.aifb"
        write_bag_file(bag, path)
        assert path.stat().st_size == 28

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.aifb"
        path.write_bytes(b"XXXX" + b"\x00" * 24)
        with pytest.raises(FormatError, match="magic"):
            read_bag_file(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "v9.aifb"
        path.write_bytes(b"AIFB" + struct.pack("<III", 9, 1, 1) + b"\x00" * 12)
        with pytest.raises(FormatError, match="version"):
            read_bag_file(path)

    def test_truncated_payload(self, tmp_path):
        bag = make_bag(4, seed=8)
        path = tmp_path / "t.aifb"
        write_bag_file(bag, path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FormatError, match="bytes"):
            read_bag_file(path)

    def test_non_finite_rejected_on_write(self, tmp_path):
        bag = make_bag(2, seed=9)
        bag.features[0, 0] = np.inf
        with pytest.raises(FormatError, match="finite"):
            write_bag_file(bag, tmp_path / "inf.aifb")

    def test_non_finite_rejected_on_read(self, tmp_path):
        bag = Bag(bag_id="n", features=np.array([[1.0]]),
                  coords=np.array([[0, 0]], dtype=np.int32), label=0)
        path = tmp_path / "n.aifb"
        write_bag_file(bag, path)
        raw = bytearray(path.read_bytes())
        raw[-4:] = struct.pack("<f", float("nan"))
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="finite"):
            read_bag_file(path)


class TestManifest:
    def test_empty_data_section(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest([], path)
        assert read_manifest(path, 2) == []

    def test_single_row(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest([("b1", "b1.aifb", 0)], path)
        records = read_manifest(path, 2)
        assert len(records) == 1
        assert records[0][0] == "b1"
        assert records[0][1] == tmp_path / "b1.aifb"
        assert records[0][2] == 0

    def test_label_out_of_range(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest([("b1", "b1.aifb", 2)], path)
        with pytest.raises(ManifestError, match=r"label 2"):
            read_manifest(path, 2)

    def test_duplicate_bag_id(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest([("b1", "x.aifb", 0), ("b1", "y.aifb", 1)], path)
        with pytest.raises(ManifestError, match="duplicate"):
            read_manifest(path, 2)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("id,file,y\nb1,b1.aifb,0\n")
        with pytest.raises(ManifestError, match="header"):
            read_manifest(path, 2)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ManifestError, match="not found"):
            read_manifest(tmp_path / "nope.csv", 2)

    def test_non_integer_label(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("bag_id,path,label\nb1,b1.aifb,xyz\n")
        with pytest.raises(ManifestError, match="integer"):
            read_manifest(path, 2)
