"""Run configuration: a flat key=value text file.

One file carries both the training hyperparameters and the synthetic
generator settings. Blank lines and #-comments are allowed; unknown or
duplicate keys are rejected; every key has the default shown in
DEFAULTS. CLI flags override file values.
"""

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

VARIANTS = ("baseline", "dam", "dam-mha", "dam-acf", "full")
SELECTORS = ("dam", "attention", "maxpool", "bag", "region")
NEIGHBOR_MODES = ("wrap", "self-last")


@dataclass
class RunConfig:
    # training
    epochs: int = 100
    lr: float = 1e-4
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    regions: int = 4
    k_percent: float = 20.0
    mask_ratio: float = 0.9
    alpha: float = 0.7
    seed: int = 42
    variant: str = "full"
    selector: str = "dam"
    folds: int = 5
    classes: int = 2
    hidden_dim: int = 128
    heads: int = 4
    neighbor_mode: str = "wrap"
    # synthetic data
    bags: int = 200
    instances: int = 256
    dim: int = 32
    tumor_rate: float = 0.05
    morphologies: int = 4
    noise: float = 0.5

    def validate(self):
        checks = [
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.lr >= 0, "lr must be >= 0"),
            (self.weight_decay >= 0, "weight_decay must be >= 0"),
            (0 <= self.beta1 < 1, "beta1 must be in [0, 1)"),
            (0 <= self.beta2 < 1, "beta2 must be in [0, 1)"),
            (self.eps > 0, "eps must be > 0"),
            (self.regions >= 1, "regions must be >= 1"),
            (0 <= self.k_percent <= 100, "k_percent must be in [0, 100]"),
            (0 <= self.mask_ratio < 1, "mask_ratio must be in [0, 1)"),
            (0 <= self.alpha <= 1, "alpha must be in [0, 1]"),
            (self.variant in VARIANTS, f"variant must be one of {VARIANTS}"),
            (self.selector in SELECTORS, f"selector must be one of {SELECTORS}"),
            (self.folds >= 2, "folds must be >= 2"),
            (self.classes >= 2, "classes must be >= 2"),
            (self.hidden_dim >= 1, "hidden_dim must be >= 1"),
            (self.heads >= 1, "heads must be >= 1"),
            (self.neighbor_mode in NEIGHBOR_MODES,
             f"neighbor_mode must be one of {NEIGHBOR_MODES}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def synth(self):
        from .synth import SynthConfig

        return SynthConfig(
            n_bags=self.bags,
            n_instances=self.instances,
            dim=self.dim,
            n_classes=self.classes,
            tumor_rate=self.tumor_rate,
            n_morphologies=self.morphologies,
            noise_sigma=self.noise,
            seed=self.seed,
        )


_FIELD_TYPES = {
    f.name: (f.type if isinstance(f.type, str) else f.type.__name__)
    for f in fields(RunConfig)
}


def _convert(key, raw):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"config key {key}: cannot parse {raw!r} as {kind}")


def parse_config(path):
    """Read a key=value file into a validated RunConfig."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate config key {key!r}")
        values[key] = _convert(key, raw)
    return RunConfig(**values).validate()


def override(cfg, **kwargs):
    """Apply non-None overrides (CLI flags beat file values)."""
    updates = {k: v for k, v in kwargs.items() if v is not None}
    return replace(cfg, **updates).validate() if updates else cfg
