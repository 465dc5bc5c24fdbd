"""Grouping transformer blocks: prompt injection, channel layer norm,
feature-grouped attention with in-group and cross-group paths, and the
gated feed-forward network."""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .attention import channel_attention, spatial_attention
from .errors import DimensionError, ResourceError
from .grouping import gather, partition, scatter, select_partner
from .ops import conv2d_reflect

ATTENTION_KINDS = ("channel", "spatial")


class ChannelLayerNorm(nn.Module):
    """LayerNorm over channels at each spatial position, bias-free."""

    def __init__(self, channels, eps=1e-6):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.eps = eps

    def forward(self, x):
        y = F.layer_norm(
            x.permute(0, 2, 3, 1), (x.shape[1],), weight=self.weight, eps=self.eps
        )
        return y.permute(0, 3, 1, 2)


class FeedForward(nn.Module):
    """1x1 expand -> 3x3 depthwise -> GELU gate -> 1x1 contract."""

    def __init__(self, channels, expansion=2.0):
        super().__init__()
        hidden = int(channels * expansion)
        self.expand = nn.Conv2d(channels, hidden, 1, bias=False)
        self.dw = nn.Conv2d(hidden, hidden, 3, groups=hidden, bias=False)
        self.contract = nn.Conv2d(hidden // 2, channels, 1, bias=False)

    def forward(self, x):
        h = self.expand(x)
        h = conv2d_reflect(h, self.dw.weight, groups=h.shape[1])
        a, b = h.chunk(2, dim=1)
        return self.contract(a * F.gelu(b))


@dataclass
class FgaTrace:
    """Instrumentation snapshot of one attention call, for tests."""

    order: torch.Tensor
    partners: torch.Tensor | None
    q_cross_groups: torch.Tensor
    k_cross_groups: torch.Tensor
    v_groups: torch.Tensor
    a_in_groups: torch.Tensor
    a_cross_groups: torch.Tensor | None


class FeatureGroupedAttention(nn.Module):
    """Attention over mask-sorted token groups. Each group attends within
    itself; the cross path reuses the query of the most similar group with
    this group's keys and values. `kind` picks a channel-by-channel or
    token-by-token attention matrix."""

    def __init__(self, channels, heads, kind, groups, spatial_cap=4096, use_cross=True):
        super().__init__()
        if kind not in ATTENTION_KINDS:
            raise ValueError(f"kind must be one of {ATTENTION_KINDS}, got {kind!r}")
        self.heads = heads
        self.kind = kind
        self.groups = groups
        self.spatial_cap = spatial_cap
        self.use_cross = use_cross
        self.qkv = nn.Conv2d(channels, 5 * channels, 1, bias=False)
        self.out_proj = nn.Conv2d(channels, channels, 1, bias=False)
        self.temperature = nn.Parameter(torch.ones(heads))
        self.alpha_in = nn.Parameter(torch.ones(channels))
        self.alpha_cross = nn.Parameter(torch.full((channels,), 0.1))

    def _attend(self, q, k, v):
        if self.kind == "channel":
            return channel_attention(q, k, v, self.heads, self.temperature)
        return spatial_attention(q, k, v, self.heads, self.temperature, cap=self.spatial_cap)

    def forward(self, x, mask, trace=False):
        b, c, h, w = x.shape
        if mask.shape[-2:] != (h, w):
            raise DimensionError(f"mask {mask.shape[-2:]} vs feature {(h, w)}")
        g = self.groups
        n = h * w
        if self.kind == "spatial" and n // g > self.spatial_cap:
            raise ResourceError(
                f"{n // g} tokens per group exceed spatial_cap={self.spatial_cap}; "
                "increase the group count or the cap"
            )
        qkv = self.qkv(x)
        q_i, q_c, k_i, k_c, v = (
            t.reshape(b, c, n).transpose(1, 2) for t in qkv.chunk(5, dim=1)
        )
        part = partition(mask.reshape(b, n), g)
        q_i_g, k_i_g, v_g = gather(q_i, part), gather(k_i, part), gather(v, part)
        a_in_g = self._attend(q_i_g, k_i_g, v_g)
        a_in = scatter(a_in_g, part).transpose(1, 2).reshape(b, c, h, w)

        partners = None
        a_cross_g = None
        if g >= 2 and self.use_cross:
            q_c_g, k_c_g = gather(q_c, part), gather(k_c, part)
            partners = select_partner(v_g)  # (b, g)
            sel = partners.reshape(b, g, 1, 1).expand_as(q_c_g)
            q_sel = q_c_g.gather(1, sel)
            a_cross_g = self._attend(q_sel, k_c_g, v_g)
            a_cross = scatter(a_cross_g, part).transpose(1, 2).reshape(b, c, h, w)
        else:
            a_cross = torch.zeros_like(a_in)

        alpha_in = self.alpha_in.view(1, c, 1, 1)
        alpha_cross = self.alpha_cross.view(1, c, 1, 1)
        out = self.out_proj(alpha_in * a_in + alpha_cross * a_cross)
        if trace:
            k_c_g = gather(k_c, part) if partners is None else k_c_g
            return out, FgaTrace(
                order=part.order,
                partners=partners,
                q_cross_groups=gather(q_c, part),
                k_cross_groups=k_c_g,
                v_groups=v_g,
                a_in_groups=a_in_g,
                a_cross_groups=a_cross_g,
            )
        return out


class TransformerBlock(nn.Module):
    """One grouping transformer block: prompt injection, masked-normalized
    grouped attention, and a gated FFN, both on residual paths."""

    def __init__(
        self,
        channels,
        heads,
        kind,
        groups,
        spatial_cap=4096,
        ffn_expansion=2.0,
        use_cross=True,
        use_mask=True,
        prompt_channels=None,
    ):
        super().__init__()
        prompt_channels = channels if prompt_channels is None else prompt_channels
        self.fuse = nn.Conv2d(channels + prompt_channels, channels, 1, bias=False)
        self.norm1 = ChannelLayerNorm(channels)
        self.attn = FeatureGroupedAttention(
            channels, heads, kind, groups, spatial_cap=spatial_cap, use_cross=use_cross
        )
        self.norm2 = ChannelLayerNorm(channels)
        self.ffn = FeedForward(channels, expansion=ffn_expansion)
        self.use_mask = use_mask

    def inject(self, f_prev, f_s):
        if f_prev.shape[-2:] != f_s.shape[-2:]:
            raise DimensionError(
                f"prompt resolution {f_s.shape[-2:]} vs feature {f_prev.shape[-2:]}"
            )
        return self.fuse(torch.cat([f_prev, f_s], dim=1))

    def forward(self, f_prev, f_s, mask):
        x = self.inject(f_prev, f_s)
        gated = self.norm1(x) * mask if self.use_mask else self.norm1(x)
        x = x + self.attn(gated, mask)
        x = x + self.ffn(self.norm2(x))
        return x
