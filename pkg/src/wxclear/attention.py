"""Attention primitives over token matrices.

All three ops accept q, k, v of shape (..., N, C) with C divisible by the
head count; leading dims are treated as batch. They are stateless: the
learnable per-head temperature of the softmax variants is passed in by the
owning block.
"""

import math

import torch
from einops import rearrange

from .errors import DimensionError, ResourceError

LINEAR_ATTN_EPS = 1e-6


def _split_heads(x: torch.Tensor, heads: int) -> torch.Tensor:
    if x.shape[-1] % heads:
        raise DimensionError(f"channels {x.shape[-1]} not divisible by {heads} heads")
    return rearrange(x, "... n (h d) -> ... h n d", h=heads)


def _merge_heads(x: torch.Tensor) -> torch.Tensor:
    return rearrange(x, "... h n d -> ... n (h d)")


def _check_qkv(q, k, v, heads):
    if q.shape != k.shape or q.shape != v.shape:
        raise DimensionError(f"q/k/v shapes differ: {q.shape} {k.shape} {v.shape}")
    if q.shape[-1] % heads:
        raise DimensionError(f"channels {q.shape[-1]} not divisible by {heads} heads")


def positive_feature_map(x: torch.Tensor) -> torch.Tensor:
    """Smooth strictly positive map: exp(x) below zero, x + 1 above."""
    return torch.where(x > 0, x + 1.0, torch.exp(torch.clamp(x, max=0.0)))


def linear_attention(q, k, v, heads: int) -> torch.Tensor:
    """Kernelized attention: phi(q) (phi(k)^T v) / (phi(q) sum phi(k) + eps)."""
    _check_qkv(q, k, v, heads)
    qh = positive_feature_map(_split_heads(q, heads))
    kh = positive_feature_map(_split_heads(k, heads))
    vh = _split_heads(v, heads)
    context = kh.transpose(-2, -1) @ vh                      # (..., h, d, d)
    denom = qh @ kh.sum(dim=-2, keepdim=True).transpose(-2, -1)
    out = (qh @ context) / (denom + LINEAR_ATTN_EPS)
    return _merge_heads(out)


def _l2_normalize(x: torch.Tensor, dim: int) -> torch.Tensor:
    return x / x.norm(dim=dim, keepdim=True).clamp_min(1e-12)


def channel_attention(q, k, v, heads: int, temperature) -> torch.Tensor:
    """Transposed attention: per head a (C/h, C/h) matrix, softmax over the
    key-channel axis, after L2-normalizing q and k along the token axis."""
    _check_qkv(q, k, v, heads)
    temp = _as_head_scale(temperature, heads, q)
    # temperature folded into q before the matmul (cheaper than scaling logits)
    qh = _l2_normalize(_split_heads(q, heads), dim=-2) * temp
    kh = _l2_normalize(_split_heads(k, heads), dim=-2)
    vh = _split_heads(v, heads)
    attn = torch.softmax(qh.transpose(-2, -1) @ kh, dim=-1)
    out = (attn @ vh.transpose(-2, -1)).transpose(-2, -1)
    return _merge_heads(out)


def spatial_attention(q, k, v, heads: int, temperature, cap: int | None = None) -> torch.Tensor:
    """Token-to-token attention: per head an (N, N) matrix, softmax over keys,
    logits scaled by 1/sqrt(C/h) times the per-head temperature."""
    _check_qkv(q, k, v, heads)
    n = q.shape[-2]
    if cap is not None and n > cap:
        raise ResourceError(f"{n} tokens exceed the spatial-attention cap {cap}")
    temp = _as_head_scale(temperature, heads, q)
    scale = 1.0 / math.sqrt(q.shape[-1] // heads)
    qh = _split_heads(q, heads) * (scale * temp)
    kh = _split_heads(k, heads)
    vh = _split_heads(v, heads)
    attn = torch.softmax(qh @ kh.transpose(-2, -1), dim=-1)
    return _merge_heads(attn @ vh)


def _as_head_scale(temperature, heads: int, ref: torch.Tensor) -> torch.Tensor:
    """Broadcast a per-head temperature to (..., h, 1, 1)."""
    t = torch.as_tensor(temperature, dtype=ref.dtype, device=ref.device)
    if t.ndim == 0:
        t = t.expand(heads)
    if t.shape[-1] != heads:
        raise DimensionError(f"temperature has {t.shape[-1]} entries for {heads} heads")
    return t.reshape(heads, 1, 1)
