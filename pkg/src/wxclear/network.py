"""Full restoration network: 4-stage encoder-decoder with per-stage
spectral prompts and grouping masks, skip connections, refinement blocks,
and a global residual to the degraded input."""

import torch
import torch.nn as nn

from .blocks import TransformerBlock
from .config import ModelConfig
from .errors import ConfigError, DimensionError, ValidationError
from .grouping import MaskGenerator
from .ops import channel_to_space, conv2d_reflect, reflect_pad2d, space_to_channel
from .sdp import SimplePrompt, SpectralPrompt

PAD_MULTIPLE = 16  # stage-4 features stay even for the s=2 reorganizations


class Downsample(nn.Module):
    """Space-to-channel then 1x1 conv: halves spatial dims, doubles channels."""

    def __init__(self, channels):
        super().__init__()
        self.proj = nn.Conv2d(4 * channels, 2 * channels, 1, bias=False)

    def forward(self, x):
        if x.shape[-2] % 2 or x.shape[-1] % 2:
            raise DimensionError(f"downsample needs even dims, got {tuple(x.shape[-2:])}")
        return self.proj(space_to_channel(x, 2))


class Upsample(nn.Module):
    """Exact mirror of Downsample: 1x1 conv then pixel shuffle."""

    def __init__(self, channels):
        super().__init__()
        self.proj = nn.Conv2d(channels, 2 * channels, 1, bias=False)

    def forward(self, x):
        return channel_to_space(self.proj(x), 2)


def padded_size(h, w, groups):
    """Smallest (H, W) >= (h, w), multiples of PAD_MULTIPLE, whose per-stage
    token counts are divisible by every stage's group count."""

    def ok(hh, ww):
        return all(((hh >> p) * (ww >> p)) % g == 0 for p, g in enumerate(groups))

    def up(v):
        return ((v + PAD_MULTIPLE - 1) // PAD_MULTIPLE) * PAD_MULTIPLE

    base_h, base_w = up(h), up(w)
    for total in range(0, 9):
        for i in range(total + 1):
            hh = base_h + PAD_MULTIPLE * i
            ww = base_w + PAD_MULTIPLE * (total - i)
            if ok(hh, ww):
                return hh, ww
    raise ConfigError(f"no padded size found for ({h}, {w}) with groups {groups}")


def _stage_blocks(stage, cfg: ModelConfig, count=None, kind_override=None):
    count = stage.blocks if count is None else count
    blocks = []
    for i in range(count):
        if kind_override is not None:
            kind = kind_override
        elif cfg.attention_mix == "channel_only":
            kind = "channel"
        else:
            kind = "channel" if i < count // 2 else "spatial"
        blocks.append(
            TransformerBlock(
                stage.channels,
                heads=stage.heads,
                kind=kind,
                groups=stage.groups if cfg.use_fga else 1,
                spatial_cap=stage.spatial_cap,
                ffn_expansion=cfg.ffn_expansion,
                use_cross=cfg.use_cross_group and cfg.use_fga,
                use_mask=cfg.use_fga,
            )
        )
    return nn.ModuleList(blocks)


class RestorationNet(nn.Module):
    def __init__(self, cfg: ModelConfig | None = None):
        super().__init__()
        cfg = cfg or ModelConfig()
        self.cfg = cfg
        torch.manual_seed(cfg.seed)
        stages = cfg.stages

        self.embed = nn.Conv2d(3, stages[0].channels, 3, bias=False)
        if cfg.use_sdp:
            self.prompts = nn.ModuleList(
                SpectralPrompt(s.channels, cfg.sdp) for s in stages
            )
        else:
            self.prompts = nn.ModuleList(SimplePrompt(s.channels) for s in stages)
        self.maskgens = nn.ModuleList(MaskGenerator(s.channels) for s in stages)
        self.encoder = nn.ModuleList(_stage_blocks(s, cfg) for s in stages)
        self.downs = nn.ModuleList(Downsample(s.channels) for s in stages[:3])
        self.ups = nn.ModuleList(Upsample(stages[p + 1].channels) for p in (2, 1, 0))
        self.skip_fuse = nn.ModuleList(
            nn.Conv2d(2 * stages[p].channels, stages[p].channels, 1, bias=False)
            for p in (2, 1, 0)
        )
        self.decoder = nn.ModuleList(_stage_blocks(stages[p], cfg) for p in (2, 1, 0))
        self.refinement = _stage_blocks(
            stages[0], cfg, count=cfg.refinement_blocks, kind_override="channel"
        )
        self.out_conv = nn.Conv2d(stages[0].channels, 3, 3, bias=False)
        nn.init.zeros_(self.out_conv.weight)  # identity restoration at init

    def _validate(self, img):
        if img.ndim != 4 or img.shape[1] != 3:
            raise DimensionError(f"expected (B, 3, H, W) input, got {tuple(img.shape)}")
        if not torch.isfinite(img).all():
            raise ValidationError("non-finite values in input image")
        if img.min() < -1e-6 or img.max() > 1 + 1e-6:
            raise ValidationError(
                f"input values outside [0, 1]: [{img.min():.4g}, {img.max():.4g}]"
            )

    def _encode_decode(self, padded, collect=None):
        x = conv2d_reflect(padded, self.embed.weight)
        skips, masks, prompts = [], [], []
        for p in range(4):
            f_s = self.prompts[p](padded, size=x.shape[-2:])
            mask = self.maskgens[p](f_s)
            prompts.append(f_s)
            masks.append(mask)
            for blk in self.encoder[p]:
                x = blk(x, f_s, mask)
            if p < 3:
                skips.append(x)
                x = self.downs[p](x)
        for d, p in enumerate((2, 1, 0)):
            x = self.ups[d](x)
            x = self.skip_fuse[d](torch.cat([x, skips[p]], dim=1))
            for blk in self.decoder[d]:
                x = blk(x, prompts[p], masks[p])
        for blk in self.refinement:
            x = blk(x, prompts[0], masks[0])
        if collect is not None:
            collect["masks"] = masks
            collect["prompts"] = prompts
        return x

    def forward(self, img, clamp=True, collect=None):
        self._validate(img)
        h, w = img.shape[-2:]
        ph, pw = padded_size(h, w, self.cfg.groups)
        padded = reflect_pad2d(img, (0, pw - w, 0, ph - h))
        x = self._encode_decode(padded, collect=collect)
        out = padded + conv2d_reflect(x, self.out_conv.weight)
        if clamp:
            out = out.clamp(0.0, 1.0)
        return out[..., :h, :w]

    @torch.no_grad()
    def restore(self, img, collect=None):
        return self.forward(img, clamp=True, collect=collect)
