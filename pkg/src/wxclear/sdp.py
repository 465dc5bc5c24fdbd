"""Spectral decomposition prompt: refine the Sobel and SVD channels,
fuse them with multi-head linear attention conditioned on the image,
and gate the pooled branches into the per-stage degradation feature."""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .attention import linear_attention
from .config import SdpConfig
from .errors import DimensionError
from .ops import (
    channel_to_space,
    conv2d_reflect,
    reflect_index,
    resize_bilinear,
    space_to_channel,
)
from .spectral import _sobel_any_size, default_rank, svd_lowrank, to_grayscale


def bilinear_sample(x, py, px):
    """Sample (B, C, H, W) at float positions (B, H', W') with repeated
    mirror reflection outside the image. Differentiable in x and positions."""
    b, c, h, w = x.shape
    y0 = torch.floor(py)
    x0 = torch.floor(px)
    wy = (py - y0).unsqueeze(1)
    wx = (px - x0).unsqueeze(1)
    y0 = y0.long()
    x0 = x0.long()
    rows0, rows1 = reflect_index(y0, h), reflect_index(y0 + 1, h)
    cols0, cols1 = reflect_index(x0, w), reflect_index(x0 + 1, w)
    flat = x.reshape(b, c, h * w)
    oh, ow = py.shape[-2], py.shape[-1]

    def take(r, cix):
        idx = (r * w + cix).reshape(b, 1, oh * ow).expand(b, c, oh * ow)
        return flat.gather(2, idx).reshape(b, c, oh, ow)

    v00, v01 = take(rows0, cols0), take(rows0, cols1)
    v10, v11 = take(rows1, cols0), take(rows1, cols1)
    return (
        v00 * (1 - wy) * (1 - wx)
        + v01 * (1 - wy) * wx
        + v10 * wy * (1 - wx)
        + v11 * wy * wx
    )


def deform_conv3x3(x, offsets, weight):
    """3x3 deformable convolution: per-tap offsets, bilinear sampling,
    weighted sum. Single group, no modulation mask.

    x: (B, C_in, H, W); offsets: (B, 18, H, W) ordered (dy, dx) per tap in
    raster tap order; weight: (C_out, C_in, 3, 3).
    """
    b, c, h, w = x.shape
    if offsets.shape[1] != 18:
        raise DimensionError(f"expected 18 offset channels, got {offsets.shape[1]}")
    grid_y = torch.arange(h, dtype=x.dtype, device=x.device).view(1, h, 1)
    grid_x = torch.arange(w, dtype=x.dtype, device=x.device).view(1, 1, w)
    out = None
    for t in range(9):
        di, dj = t // 3 - 1, t % 3 - 1
        py = grid_y + di + offsets[:, 2 * t]
        px = grid_x + dj + offsets[:, 2 * t + 1]
        sampled = bilinear_sample(x, py, px)
        tap = torch.einsum("bchw,oc->bohw", sampled, weight[:, :, di + 1, dj + 1])
        out = tap if out is None else out + tap
    return out


def _tokens(x):
    b, c, h, w = x.shape
    return x.reshape(b, c, h * w).transpose(1, 2), (h, w)


def _maps(tokens, hw):
    b, n, c = tokens.shape
    return tokens.transpose(1, 2).reshape(b, c, hw[0], hw[1])


class SpectralPrompt(nn.Module):
    """Per-stage prompt builder operating on the degraded image resized to
    the stage resolution."""

    def __init__(self, stage_channels: int, cfg: SdpConfig | None = None):
        super().__init__()
        cfg = cfg or SdpConfig()
        self.cfg = cfg
        s = cfg.reorg_factor
        c = stage_channels
        cf = c // 2
        self.stage_channels = c
        self.branch_channels = cf
        token_c = 2 * cf * s * s  # both refined branches concatenated
        self.token_channels = token_c

        self.sobel_conv = nn.Conv2d(1, cf, 3, bias=False)
        self.svd_conv = nn.Conv2d(1, cf, 3, bias=False)
        self.offset_conv = nn.Conv2d(3, 18, 3, bias=False)
        self.deform = nn.Conv2d(cf, cf, 3, bias=False)
        self.img_embed = nn.Conv2d(3, cf, 3, bias=False)

        kv_c = token_c + cf * s * s  # image tokens join the key/value context
        self.q_proj = nn.Linear(token_c, token_c, bias=False)
        self.k_proj = nn.Linear(kv_c, token_c, bias=False)
        self.v_proj = nn.Linear(kv_c, token_c, bias=False)

        self.gate_img = nn.Conv2d(3, cf, 1, bias=False)
        self.gate_svd = nn.Conv2d(1, cf, 1, bias=False)
        self.out_proj = nn.Conv2d(2 * cf, c, 1, bias=False)

        nn.init.zeros_(self.offset_conv.weight)  # start as regular sampling

    def sobel_refine(self, f):
        """Refine the edge channel: conv then space-to-channel, flattened
        to tokens. (B, 1, H, W) -> (B, HW/s^2, cf*s^2)."""
        y = conv2d_reflect(f, self.sobel_conv.weight)
        return _tokens(space_to_channel(y, self.cfg.reorg_factor))[0]

    def svd_refine(self, f, img):
        """Refine the low-rank channel, modulated by a deformable conv whose
        offsets are predicted from the resized image."""
        y = conv2d_reflect(f, self.svd_conv.weight)
        offsets = conv2d_reflect(img, self.offset_conv.weight)
        y = deform_conv3x3(y, offsets, self.deform.weight)
        return _tokens(space_to_channel(y, self.cfg.reorg_factor))[0]

    def fuse(self, sobel_tokens, svd_tokens, img):
        """Fuse both refined branches with linear attention (image embedding
        joins the key/value context), split channels, pixel-shuffle back to
        stage resolution, and pool each branch."""
        if sobel_tokens.shape != svd_tokens.shape:
            raise DimensionError(
                f"branch token shapes differ: {sobel_tokens.shape} vs {svd_tokens.shape}"
            )
        s = self.cfg.reorg_factor
        h, w = img.shape[-2], img.shape[-1]
        tok = torch.cat([sobel_tokens, svd_tokens], dim=-1)
        img_tok = _tokens(space_to_channel(conv2d_reflect(img, self.img_embed.weight), s))[0]
        kv_in = torch.cat([tok, img_tok], dim=-1)
        fused = linear_attention(
            self.q_proj(tok), self.k_proj(kv_in), self.v_proj(kv_in), self.cfg.fusion_heads
        )
        sob_f, svd_f = fused.chunk(2, dim=-1)
        sob_map = channel_to_space(_maps(sob_f, (h // s, w // s)), s)
        svd_map = channel_to_space(_maps(svd_f, (h // s, w // s)), s)
        if self.cfg.max_pool_branch == "sobel":
            return self._pool_max(sob_map), self._pool_avg(svd_map)
        return self._pool_avg(sob_map), self._pool_max(svd_map)

    @staticmethod
    def _pool_max(x):
        return F.max_pool2d(x, kernel_size=3, stride=1, padding=1)

    @staticmethod
    def _pool_avg(x):
        return x.mean(dim=(-2, -1), keepdim=True).expand_as(x)

    def spectral_channels(self, img):
        """Sobel magnitude and truncated-SVD channels of the stage-resized
        image, each (B, 1, H, W). Disabled filters yield zeros."""
        gray = to_grayscale(img)
        h, w = gray.shape[-2], gray.shape[-1]
        if self.cfg.use_sobel:
            f_sob = _sobel_any_size(gray).unsqueeze(1)
        else:
            f_sob = torch.zeros_like(gray).unsqueeze(1)
        if self.cfg.use_svd:
            rank = default_rank(h, w, self.cfg.svd_rank_divisor)
            f_svd = svd_lowrank(gray, rank).unsqueeze(1)
        else:
            f_svd = torch.zeros_like(gray).unsqueeze(1)
        return f_sob, f_svd

    def forward(self, img, size=None):
        """Build the degradation feature for one stage.

        img: the degraded image (B, 3, H0, W0); size: stage resolution
        (defaults to the image's own resolution).
        """
        if size is not None:
            img = resize_bilinear(img, size)
        f_sob, f_svd = self.spectral_channels(img)
        sob_t = self.sobel_refine(f_sob)
        svd_t = self.svd_refine(f_svd, img)
        sob_b, svd_b = self.fuse(sob_t, svd_t, img)
        half_sob = sob_b * self.gate_img(img)
        half_svd = svd_b * self.gate_svd(f_svd)
        if not self.cfg.use_sobel:
            half_sob = torch.zeros_like(half_sob)
        if not self.cfg.use_svd:
            half_svd = torch.zeros_like(half_svd)
        return self.out_proj(torch.cat([half_sob, half_svd], dim=1))


class SimplePrompt(nn.Module):
    """Plain visual prompt used when spectral decomposition is disabled:
    a single convolution of the stage-resized image."""

    def __init__(self, stage_channels: int):
        super().__init__()
        self.conv = nn.Conv2d(3, stage_channels, 3, bias=False)

    def forward(self, img, size=None):
        if size is not None:
            img = resize_bilinear(img, size)
        return conv2d_reflect(img, self.conv.weight)
