"""Dataclass configuration for the model, losses, training, and dataset
synthesis, plus strict YAML loading (unknown keys are hard errors)."""

import dataclasses
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError


@dataclass(frozen=True)
class StageConfig:
    """Per-stage hyperparameters; stage p halves spatial dims and doubles
    channels relative to stage p-1."""

    channels: int
    blocks: int
    groups: int
    heads: int
    spatial_cap: int

    def __post_init__(self):
        if self.blocks % 2:
            raise ConfigError(f"blocks per stage must be even, got {self.blocks}")
        if self.groups < 1:
            raise ConfigError(f"groups must be >= 1, got {self.groups}")
        if self.channels % self.heads:
            raise ConfigError(f"{self.channels} channels not divisible by {self.heads} heads")


@dataclass(frozen=True)
class SdpConfig:
    reorg_factor: int = 2
    svd_rank_divisor: int = 16
    fusion_heads: int = 4
    max_pool_branch: str = "sobel"  # that fused branch gets max pooling, the other global-average
    use_sobel: bool = True
    use_svd: bool = True

    def __post_init__(self):
        if self.max_pool_branch not in ("sobel", "svd"):
            raise ConfigError(f"max_pool_branch must be sobel|svd, got {self.max_pool_branch!r}")
        if self.reorg_factor < 1:
            raise ConfigError("reorg_factor must be >= 1")
        if self.svd_rank_divisor < 1:
            raise ConfigError("svd_rank_divisor must be >= 1")
        if not (self.use_sobel or self.use_svd):
            raise ConfigError("at least one of use_sobel/use_svd must be enabled")


@dataclass(frozen=True)
class ModelConfig:
    base_channels: int = 16
    blocks: tuple = (4, 4, 4, 4)
    groups: tuple = (4, 4, 2, 2)
    heads: tuple = (1, 2, 4, 8)
    refinement_blocks: int = 2
    spatial_cap: int = 4096
    ffn_expansion: float = 2.0
    sdp: SdpConfig = field(default_factory=SdpConfig)
    use_sdp: bool = True
    use_fga: bool = True
    use_cross_group: bool = True
    attention_mix: str = "mixed"  # mixed | channel_only
    seed: int = 0

    def __post_init__(self):
        for name in ("blocks", "groups", "heads"):
            value = getattr(self, name)
            object.__setattr__(self, name, tuple(int(v) for v in value))
            if len(getattr(self, name)) != 4:
                raise ConfigError(f"{name} must list exactly 4 stages")
        if self.base_channels < 2 or self.base_channels % 2:
            raise ConfigError("base_channels must be an even integer >= 2")
        if self.attention_mix not in ("mixed", "channel_only"):
            raise ConfigError(f"attention_mix must be mixed|channel_only, got {self.attention_mix!r}")
        for p in range(4):
            fusion_width = 4 * self.channels(p)
            if fusion_width % self.sdp.fusion_heads:
                raise ConfigError(
                    f"fusion_heads={self.sdp.fusion_heads} does not divide the "
                    f"stage-{p + 1} fusion width {fusion_width}"
                )
        _ = self.stages  # run StageConfig validation

    def channels(self, p: int) -> int:
        return self.base_channels * (2**p)

    @property
    def stages(self):
        return tuple(
            StageConfig(
                channels=self.channels(p),
                blocks=self.blocks[p],
                groups=self.groups[p],
                heads=self.heads[p],
                spatial_cap=self.spatial_cap,
            )
            for p in range(4)
        )

    @classmethod
    def tiny(cls, **overrides) -> "ModelConfig":
        base = dict(
            base_channels=8,
            blocks=(2, 2, 2, 2),
            groups=(2, 2, 2, 2),
            heads=(1, 2, 4, 8),
            refinement_blocks=1,
            sdp=SdpConfig(fusion_heads=2),
        )
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class LossConfig:
    beta: float = 0.05
    patch_size: int = 7
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError("beta must be >= 0")
        if self.patch_size < 2:
            raise ConfigError("patch_size must be >= 2")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_size: int = 2
    lr: float = 2e-3
    final_lr_factor: float = 0.05
    clip_norm: float = 1.0
    crop: int = 64
    checkpoint_every: int = 500
    val_every: int = 0  # 0 disables periodic validation
    log_every: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigError("steps and batch_size must be >= 1")
        if self.crop % 16:
            raise ConfigError("crop size must be a multiple of 16")
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")


@dataclass(frozen=True)
class SynthConfig:
    train_scenes: int = 4
    val_scenes: int = 0
    size: int = 96
    kinds: tuple = ("rain", "snow", "raindrop")
    clean_dir: str | None = None
    seed: int = 0
    params: dict = field(default_factory=dict)  # kind -> DegradationSpec field overrides

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(self.kinds))
        from .degrade import KINDS

        for kind in self.kinds:
            if kind not in KINDS:
                raise ConfigError(f"unknown degradation kind {kind!r}")
        for kind in self.params:
            if kind not in KINDS:
                raise ConfigError(f"params given for unknown kind {kind!r}")


@dataclass(frozen=True)
class RunConfig:
    """Top-level configuration file contents."""

    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    data_root: str = "data"
    out_dir: str = "runs/default"


_NESTED = {
    "model": ModelConfig,
    "loss": LossConfig,
    "train": TrainConfig,
    "synth": SynthConfig,
    "sdp": SdpConfig,
}


def from_dict(cls, data: dict, path: str = ""):
    """Build a config dataclass from a nested dict, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping at {path or 'top level'}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key {path + key!r}")
        if key in _NESTED and isinstance(value, dict):
            kwargs[key] = from_dict(_NESTED[key], value, path=f"{path}{key}.")
        elif isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config at {path or 'top level'}: {exc}") from exc


def _listify(obj):
    if isinstance(obj, tuple):
        return [_listify(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _listify(v) for k, v in obj.items()}
    return obj


def to_dict(cfg) -> dict:
    return _listify(dataclasses.asdict(cfg))


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return from_dict(RunConfig, raw or {})


def model_config_to_yaml(cfg: ModelConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=True)


def model_config_from_yaml(text: str) -> ModelConfig:
    return from_dict(ModelConfig, yaml.safe_load(text))
