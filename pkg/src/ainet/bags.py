"""Bag data model, spatial region partitioning, and feature-file I/O.

A bag is a set of N instance feature vectors with integer grid
coordinates and one class label. Partitioning sorts instances along the
Morton (Z-order) curve of their coordinates and cuts the sequence into L
near-equal contiguous regions, so regions are spatially compact and the
split is deterministic.

Bag feature file (.aifb), little-endian:
    magic "AIFB" | version u32=1 | N u32 | D u32
    | coords: N x (x i32, y i32) | features: N x D float32, row-major
Manifest: UTF-8 CSV with header exactly "bag_id,path,label", paths
relative to the manifest's directory.
"""

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ManifestError, PartitionError

MAGIC = b"AIFB"
VERSION = 1


@dataclass
class Bag:
    bag_id: str
    features: np.ndarray  # (N, D) float64
    coords: np.ndarray  # (N, 2) int32
    label: int

    @property
    def n_instances(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]


@dataclass
class RegionPartition:
    """Ordered split of a bag into disjoint index lists covering [0, N)."""

    regions: list  # L arrays of instance indices, each spatially contiguous

    @property
    def n_regions(self):
        return len(self.regions)

    @property
    def sizes(self):
        return [len(r) for r in self.regions]


def _interleave_bits(v):
    """Spread the low 32 bits of each uint64 so they occupy even positions."""
    v = v & np.uint64(0x00000000FFFFFFFF)
    v = (v | (v << np.uint64(16))) & np.uint64(0x0000FFFF0000FFFF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x00FF00FF00FF00FF)
    v = (v | (v << np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    v = (v | (v << np.uint64(2))) & np.uint64(0x3333333333333333)
    v = (v | (v << np.uint64(1))) & np.uint64(0x5555555555555555)
    return v


def morton_codes(coords):
    """Z-order key per coordinate pair, x in the even bit positions.

    Coordinates are shifted by their per-bag minimum first, so negative
    grid positions are fine.
    """
    c = np.asarray(coords, dtype=np.int64)
    shifted = (c - c.min(axis=0)).astype(np.uint64)
    return _interleave_bits(shifted[:, 0]) | (_interleave_bits(shifted[:, 1]) << np.uint64(1))


def chunk_sizes(n, parts):
    """Near-equal split: the first n % parts chunks get the extra item."""
    base, extra = divmod(n, parts)
    return [base + 1] * extra + [base] * (parts - extra)


def partition(bag, n_regions):
    """Split a bag into n_regions spatially coherent, near-equal regions.

    Instances are ordered by the Morton code of their coordinates (ties
    keep their original index order) and the sequence is cut into
    contiguous chunks.
    """
    n = bag.n_instances
    if n < n_regions:
        raise PartitionError(
            f"bag {bag.bag_id!r} has {n} instances, fewer than {n_regions} regions"
        )
    order = np.argsort(morton_codes(bag.coords), kind="stable")
    regions = []
    start = 0
    for size in chunk_sizes(n, n_regions):
        regions.append(order[start:start + size].copy())
        start += size
    return RegionPartition(regions=regions)


# ----------------------------------------------------------------- .aifb

def write_bag_file(bag, path):
    feats = np.asarray(bag.features)
    coords = np.asarray(bag.coords, dtype=np.int32)
    if not np.isfinite(feats).all():
        raise FormatError(f"bag {bag.bag_id!r} has non-finite features")
    n, d = feats.shape
    if coords.shape != (n, 2):
        raise FormatError(f"bag {bag.bag_id!r}: coords shape {coords.shape} != ({n}, 2)")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", VERSION, n, d))
        f.write(coords.astype("<i4").tobytes())
        f.write(feats.astype("<f4").tobytes())


def read_bag_file(path, bag_id=None, label=0):
    """Read a .aifb file. Features come back as float64 (exact from f32)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, n, d = struct.unpack_from("<III", raw, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}, expected {VERSION}")
    expected = 16 + 8 * n + 4 * n * d
    if len(raw) != expected:
        raise FormatError(f"{path}: payload is {len(raw)} bytes, expected {expected}")
    coords = np.frombuffer(raw, dtype="<i4", count=2 * n, offset=16)
    feats = np.frombuffer(raw, dtype="<f4", count=n * d, offset=16 + 8 * n)
    if not np.isfinite(feats).all():
        raise FormatError(f"{path}: non-finite feature values")
    return Bag(
        bag_id=bag_id if bag_id is not None else path.stem,
        features=feats.reshape(n, d).astype(np.float64),
        coords=coords.reshape(n, 2).astype(np.int32),
        label=label,
    )


# -------------------------------------------------------------- manifest

MANIFEST_HEADER = ["bag_id", "path", "label"]


def write_manifest(records, path):
    """Write (bag_id, relative path, label) rows. LF line endings."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for bag_id, rel, label in records:
            writer.writerow([bag_id, rel, label])


def read_manifest(path, n_classes):
    """Parse a manifest into (bag_id, absolute path, label) records."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    base = path.parent
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ManifestError(
                f"{path}: bad header {header!r}, expected {MANIFEST_HEADER!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ManifestError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            bag_id, rel, label_s = row
            try:
                label = int(label_s)
            except ValueError:
                raise ManifestError(f"{path}:{lineno}: label {label_s!r} is not an integer")
            if not 0 <= label < n_classes:
                raise ManifestError(
                    f"{path}:{lineno}: label {label} outside [0, {n_classes})"
                )
            if bag_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate bag_id {bag_id!r}")
            seen.add(bag_id)
            records.append((bag_id, base / rel, label))
    return records


def load_bags(records):
    """Load every manifest record into memory."""
    bags = []
    for bag_id, bag_path, label in records:
        if not Path(bag_path).is_file():
            raise ManifestError(f"bag file not found: {bag_path}")
        bags.append(read_bag_file(bag_path, bag_id=bag_id, label=label))
    return bags
