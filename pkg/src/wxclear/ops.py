"""Shared tensor utilities: reflect padding, reflect-padded convolution,
and the exact space<->channel rearrangements used throughout the network."""

import torch
import torch.nn.functional as F
from einops import rearrange

from .errors import DimensionError


def reflect_index(idx: torch.Tensor, n: int) -> torch.Tensor:
    """Map arbitrary integer indices into [0, n-1] by mirror reflection
    without edge repetition (period 2n-2). Matches torch reflect padding
    for small overhangs and keeps reflecting for larger ones."""
    if n == 1:
        return torch.zeros_like(idx)
    period = 2 * n - 2
    m = torch.remainder(idx, period)
    return torch.where(m >= n, period - m, m)


def reflect_pad2d(x: torch.Tensor, pad) -> torch.Tensor:
    """Reflect-pad the last two dims. `pad` is (left, right, top, bottom)
    or a single int for all four sides. Unlike F.pad this allows padding
    wider than the input (repeated reflection)."""
    if isinstance(pad, int):
        pad = (pad, pad, pad, pad)
    left, right, top, bottom = pad
    h, w = x.shape[-2], x.shape[-1]
    if max(left, right) < w and max(top, bottom) < h and x.ndim >= 3:
        return F.pad(x, pad, mode="reflect")
    rows = reflect_index(torch.arange(-top, h + bottom, device=x.device), h)
    cols = reflect_index(torch.arange(-left, w + right, device=x.device), w)
    return x.index_select(-2, rows).index_select(-1, cols)


def conv2d_reflect(x: torch.Tensor, weight: torch.Tensor, bias=None,
                   groups: int = 1) -> torch.Tensor:
    """Shape-preserving conv2d with reflect padding for odd-sized kernels."""
    kh, kw = weight.shape[-2], weight.shape[-1]
    xp = reflect_pad2d(x, (kw // 2, kw // 2, kh // 2, kh // 2))
    return F.conv2d(xp, weight, bias, groups=groups)


def space_to_channel(x: torch.Tensor, s: int) -> torch.Tensor:
    """(B, C, H, W) -> (B, C*s*s, H/s, W/s); exact inverse of channel_to_space."""
    h, w = x.shape[-2], x.shape[-1]
    if h % s or w % s:
        raise DimensionError(f"spatial dims ({h}, {w}) not divisible by {s}")
    return rearrange(x, "... c (h s1) (w s2) -> ... (c s1 s2) h w", s1=s, s2=s)


def channel_to_space(x: torch.Tensor, s: int) -> torch.Tensor:
    """(B, C*s*s, H, W) -> (B, C, H*s, W*s); pixel shuffle."""
    c = x.shape[-3]
    if c % (s * s):
        raise DimensionError(f"channel dim {c} not divisible by {s * s}")
    return rearrange(x, "... (c s1 s2) h w -> ... c (h s1) (w s2)", s1=s, s2=s)


def resize_bilinear(x: torch.Tensor, size) -> torch.Tensor:
    """Bilinear resize of (B, C, H, W) to `size = (H', W')`."""
    if x.shape[-2:] == tuple(size):
        return x
    return F.interpolate(x, size=tuple(size), mode="bilinear", align_corners=False)
