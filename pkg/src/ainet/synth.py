"""Deterministic synthetic bag generator.

Bags embody the MIL label rule exactly: a bag's label is nonzero iff it
contains at least one tumor instance. Two heterogeneity factors are
built in: instances cluster into G Gaussian "morphologies" laid out as
contiguous coordinate blocks (regional diversity), and tumor instances
are a sparse random subset confined to a single morphology block (tumor
sparsity). Class c >= 1 adds a class-specific unit signature direction
(mutually orthogonal across classes, fixed per run seed) to each tumor
instance.

Generation is counter-based: bag i draws only from the (seed, bag, i)
substream, so bags can be produced in any order or in parallel and the
output bytes depend only on the config.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bags import Bag, chunk_sizes, write_bag_file, write_manifest
from .errors import ConfigError
from .rng import STREAM_BAG, STREAM_SIGNATURE, substream

CENTER_SCALE = 3.0


@dataclass
class SynthConfig:
    n_bags: int = 200
    n_instances: int = 256
    dim: int = 32
    n_classes: int = 2
    tumor_rate: float = 0.05
    n_morphologies: int = 4
    noise_sigma: float = 0.5
    seed: int = 42

    def validate(self):
        if self.n_bags < 0:
            raise ConfigError("n_bags must be >= 0")
        if self.n_instances < 1:
            raise ConfigError("n_instances must be >= 1")
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.n_classes < 1:
            raise ConfigError("n_classes must be >= 1")
        if not 0.0 <= self.tumor_rate <= 1.0:
            raise ConfigError("tumor_rate must be in [0, 1]")
        if self.n_morphologies < 1:
            raise ConfigError("n_morphologies must be >= 1")
        if self.noise_sigma < 0.0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.n_classes > 1 + self.dim:
            raise ConfigError(
                f"cannot build {self.n_classes - 1} orthogonal class signatures "
                f"in {self.dim} dimensions (need n_classes <= dim + 1)"
            )


def class_signatures(cfg):
    """(n_classes - 1, dim) orthonormal signature directions, or empty.

    QR of a seeded Gaussian matrix, columns sign-fixed so the result is
    canonical.
    """
    k = cfg.n_classes - 1
    if k == 0:
        return np.zeros((0, cfg.dim))
    rng = substream(cfg.seed, STREAM_SIGNATURE)
    q, r = np.linalg.qr(rng.standard_normal((cfg.dim, k)))
    q = q * np.sign(np.diag(r))
    return q.T.copy()


def generate_bag(cfg, index, signatures=None):
    """Build bag `index` in memory.

    Returns (bag, info) where info records the tumor indices and the
    per-instance morphology assignment; the file format keeps neither.
    Features are rounded through float32 so the in-memory bag equals its
    on-disk round trip bit for bit.
    """
    if signatures is None:
        signatures = class_signatures(cfg)
    n, d = cfg.n_instances, cfg.dim
    rng = substream(cfg.seed, STREAM_BAG, index)
    label = index % cfg.n_classes

    side = math.isqrt(n - 1) + 1
    ar = np.arange(n, dtype=np.int32)
    coords = np.stack([ar % side, ar // side], axis=1)

    # contiguous morphology blocks along the grid order
    g = min(cfg.n_morphologies, n)
    sizes = chunk_sizes(n, g)
    morphology = np.repeat(np.arange(g), sizes)
    centers = CENTER_SCALE * rng.standard_normal((g, d))
    feats = centers[morphology] + cfg.noise_sigma * rng.standard_normal((n, d))

    tumor_idx = np.empty(0, dtype=np.int64)
    if label >= 1:
        block = int(rng.integers(g))
        start = int(np.sum(sizes[:block]))
        bsize = sizes[block]
        p = min(1.0, cfg.tumor_rate * n / bsize)
        mask = rng.random(bsize) < p
        if not mask.any():
            mask[int(rng.integers(bsize))] = True  # a positive bag needs a positive instance
        tumor_idx = start + np.flatnonzero(mask)
        feats[tumor_idx] += signatures[label - 1]

    feats = feats.astype(np.float32).astype(np.float64)
    bag = Bag(bag_id=f"bag_{index:05d}", features=feats, coords=coords, label=label)
    info = {"tumor_indices": tumor_idx, "tumor_count": len(tumor_idx), "morphology": morphology}
    return bag, info


def generate_dataset(cfg, out_dir):
    """Write cfg.n_bags .aifb files plus a manifest; returns the manifest path."""
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    signatures = class_signatures(cfg)
    records = []
    for i in range(cfg.n_bags):
        bag, _ = generate_bag(cfg, i, signatures)
        fname = f"{bag.bag_id}.aifb"
        write_bag_file(bag, out_dir / fname)
        records.append((bag.bag_id, fname, bag.label))
    manifest = out_dir / "manifest.csv"
    write_manifest(records, manifest)
    return manifest
