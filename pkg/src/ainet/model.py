"""Full pipeline: parameter set, variant forward passes, model file I/O.

The forward pass composes the pieces per the configured variant:

  baseline   raw region features -> predictor
  dam        project -> mine anchors -> fuse into regions -> predictor
  dam-mha    ... -> multi-head self-attention per region -> predictor
  dam-acf    ... -> self-attention per region -> mask -> predictor
  full       ... -> cross-region attention -> mask -> predictor

Model file (.aipm), little-endian:
    magic "AIPM" | version u32=1 | tensor count u32
    | per tensor: name_len u32, name utf-8, rank u32, dims u32 x rank,
      values float64
A trained model embeds its RunConfig as scalar "config.*" entries so
evaluation needs nothing beyond the file.
"""

import math
import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import arc, dam, losses, predictor
from . import tensor as at
from .arc import ArcParams
from .config import NEIGHBOR_MODES, SELECTORS, VARIANTS, RunConfig
from .dam import DamParams
from .errors import ConfigError, FormatError
from .predictor import PredictorParams
from .rng import STREAM_INIT, substream
from .tensor import Tensor

MAGIC = b"AIPM"
VERSION = 1

PARAM_NAMES = (
    "dam.w1", "dam.b1", "dam.w2", "dam.b2",
    "arc.w_q", "arc.w_k", "arc.w_v",
    "pred.att_v", "pred.att_u", "pred.att_w",
    "pred.cls_w", "pred.cls_b",
)


@dataclass
class ModelParams:
    dam: DamParams
    arc: ArcParams
    pred: PredictorParams

    def named(self):
        """Fixed-order name -> Tensor mapping of every learnable tensor."""
        d, a, p = self.dam, self.arc, self.pred
        return {
            "dam.w1": d.w1, "dam.b1": d.b1, "dam.w2": d.w2, "dam.b2": d.b2,
            "arc.w_q": a.w_q, "arc.w_k": a.w_k, "arc.w_v": a.w_v,
            "pred.att_v": p.att_v, "pred.att_u": p.att_u, "pred.att_w": p.att_w,
            "pred.cls_w": p.cls_w, "pred.cls_b": p.cls_b,
        }


def init_params(cfg, dim):
    """Fresh parameters from the run seed.

    Weights are uniform in +-sqrt(6/(fan_in+fan_out)), biases zero; the
    draw order is fixed so the same seed always gives the same model.
    """
    rng = substream(cfg.seed, STREAM_INIT)

    def xavier(fan_in, fan_out):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        return at.parameter(rng.uniform(-bound, bound, (fan_in, fan_out)))

    d, h, c = dim, cfg.hidden_dim, cfg.classes
    dam_p = DamParams(
        w1=xavier(d, d), b1=at.parameter(np.zeros(d)),
        w2=xavier(d, d), b2=at.parameter(np.zeros(d)),
        alpha=cfg.alpha,
    )
    arc_p = ArcParams(
        w_q=xavier(d, d), w_k=xavier(d, d), w_v=xavier(d, d),
        mask_ratio=cfg.mask_ratio, neighbor_mode=cfg.neighbor_mode,
    )
    pred_p = PredictorParams(
        att_v=xavier(d, h), att_u=xavier(d, h), att_w=xavier(h, 1),
        cls_w=xavier(d, c), cls_b=at.parameter(np.zeros(c)),
    )
    return ModelParams(dam=dam_p, arc=arc_p, pred=pred_p)


@dataclass
class ForwardResult:
    region_probs: Tensor  # (L, C)
    bag_probs: Tensor  # (C,)
    mse: Tensor  # scalar consistency loss (0 for baseline)
    anchors: object  # AnchorSet or None
    corrected: list  # CorrectedRegion per region


def forward(bag, part, params, cfg):
    """One bag through the configured variant."""
    feats = at.constant(bag.features)

    if cfg.variant == "baseline":
        corrected = [
            arc.unmasked_region(at.gather_rows(feats, idx), 0) for idx in part.regions
        ]
        anchors = None
        mse = at.constant(0.0)
    else:
        latent = dam.project(feats, params.dam)
        with at.no_grad():
            f_bag, f_reg = dam.embeddings(latent.data, part)
            weights = dam.selector_variant(
                cfg.selector, latent.data, part, f_bag, f_reg,
                alpha=params.dam.alpha,
                scorer=lambda rows: predictor.gated_scores_values(rows, params.pred),
            )
        anchors = dam.select_anchors(latent, weights, cfg.k_percent)
        fused = [
            arc.fuse_anchors(at.gather_rows(latent, idx), anchors)
            for idx in part.regions
        ]
        n_anchors = len(anchors)

        if cfg.variant == "dam":
            corrected = [arc.unmasked_region(f, n_anchors) for f in fused]
        elif cfg.variant == "dam-mha":
            outs = arc.mha_fuse(fused, params.arc, heads=cfg.heads)
            corrected = [arc.unmasked_region(o, n_anchors) for o in outs]
        elif cfg.variant in ("dam-acf", "full"):
            attend = arc.acf_attend if cfg.variant == "dam-acf" else arc.cross_attend
            outs = attend(fused, params.arc)
            scores = predictor.gated_scores_values(
                np.concatenate([o.data for o in outs]), params.pred
            )
            corrected = []
            start = 0
            for o in outs:
                stop = start + o.shape[0]
                corrected.append(
                    arc.mask_low_attention(o, scores[start:stop], params.arc.mask_ratio,
                                           n_anchors)
                )
                start = stop
        else:
            raise ConfigError(f"unknown variant {cfg.variant!r}; expected one of {VARIANTS}")
        mse = losses.mse_consistency(feats, latent)

    region_probs, bag_probs = predictor.predict(corrected, params.pred)
    return ForwardResult(
        region_probs=region_probs, bag_probs=bag_probs, mse=mse,
        anchors=anchors, corrected=corrected,
    )


def bag_loss(result, label):
    """(total, bag CE, region CE, mse), total summed as bag + region + mse."""
    lb = losses.cross_entropy_bag(result.bag_probs, label)
    lr = losses.cross_entropy_region(result.region_probs, label)
    return losses.total_loss(lb, lr, result.mse), lb, lr, result.mse


# ------------------------------------------------------------------ .aipm

def write_tensor_file(named, path):
    """Write an ordered name -> array mapping in .aipm layout."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(named)))
        for name, arr in named.items():
            arr = np.asarray(arr, dtype=np.float64)
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype("<f8").tobytes())


def read_tensor_file(path):
    """Read an .aipm file back into an ordered name -> array mapping."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}, expected {VERSION}")
    named = {}
    off = 12
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", raw, off)
            off += 4
            if len(raw) < off + name_len:
                raise FormatError(f"{path}: truncated tensor name")
            name = raw[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<I", raw, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", raw, off)
            off += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            values = np.frombuffer(raw, dtype="<f8", count=size, offset=off)
            off += 8 * size
            named[name] = values.reshape(dims).astype(np.float64)
    except (struct.error, ValueError):
        raise FormatError(f"{path}: truncated payload")
    if off != len(raw):
        raise FormatError(f"{path}: {len(raw) - off} trailing bytes")
    return named


_CONFIG_NUMERIC = (
    "epochs", "lr", "weight_decay", "beta1", "beta2", "eps", "regions",
    "k_percent", "mask_ratio", "alpha", "seed", "folds", "classes",
    "hidden_dim", "heads", "bags", "instances", "dim", "tumor_rate",
    "morphologies", "noise",
)
_CONFIG_ENUMS = {"variant": VARIANTS, "selector": SELECTORS, "neighbor_mode": NEIGHBOR_MODES}
_INT_FIELDS = {
    f.name for f in fields(RunConfig)
    if (f.type if isinstance(f.type, str) else f.type.__name__) == "int"
}


def save_model(params, cfg, path):
    """Serialize parameters with the run config embedded as scalars."""
    named = {}
    for key in _CONFIG_NUMERIC:
        named[f"config.{key}"] = np.float64(getattr(cfg, key))
    for key, options in _CONFIG_ENUMS.items():
        named[f"config.{key}"] = np.float64(options.index(getattr(cfg, key)))
    for name, tensor in params.named().items():
        named[name] = tensor.data
    write_tensor_file(named, path)


def load_model(path):
    """Rebuild (ModelParams, RunConfig) from an .aipm file."""
    named = read_tensor_file(path)
    kwargs = {}
    for key in _CONFIG_NUMERIC:
        full = f"config.{key}"
        if full not in named:
            raise FormatError(f"{path}: missing {full}")
        value = float(named[full])
        kwargs[key] = int(value) if key in _INT_FIELDS else value
    for key, options in _CONFIG_ENUMS.items():
        idx = int(float(named[f"config.{key}"]))
        if not 0 <= idx < len(options):
            raise FormatError(f"{path}: bad enum index for {key}")
        kwargs[key] = options[idx]
    cfg = RunConfig(**kwargs).validate()

    missing = [n for n in PARAM_NAMES if n not in named]
    if missing:
        raise FormatError(f"{path}: missing parameter tensors {missing}")
    t = {n: at.parameter(named[n]) for n in PARAM_NAMES}
    params = ModelParams(
        dam=DamParams(w1=t["dam.w1"], b1=t["dam.b1"], w2=t["dam.w2"], b2=t["dam.b2"],
                      alpha=cfg.alpha),
        arc=ArcParams(w_q=t["arc.w_q"], w_k=t["arc.w_k"], w_v=t["arc.w_v"],
                      mask_ratio=cfg.mask_ratio, neighbor_mode=cfg.neighbor_mode),
        pred=PredictorParams(att_v=t["pred.att_v"], att_u=t["pred.att_u"],
                             att_w=t["pred.att_w"], cls_w=t["pred.cls_w"],
                             cls_b=t["pred.cls_b"]),
    )
    return params, cfg
