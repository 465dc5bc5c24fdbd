"""Grouping machinery: the single-channel grouping mask, the mask-sorted
equal-size token partition, gather/scatter between feature maps and group
stacks, and cosine-similarity partner selection for cross-group attention.

The partition is a hard permutation; gradients flow through values only.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import DimensionError, PartitionError, SelectorError
from .ops import conv2d_reflect


class MaskGenerator(nn.Module):
    """Single 7x7 reflect-padded convolution producing a one-channel mask."""

    def __init__(self, in_channels: int):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, 1, kernel_size=7, bias=False)

    def forward(self, f_s: torch.Tensor) -> torch.Tensor:
        return conv2d_reflect(f_s, self.conv.weight)


@dataclass(frozen=True)
class GroupPartition:
    """Permutation of token indices plus equal-size group boundaries.

    `order` has shape (..., N); token `order[..., i]` is the i-th token in
    ascending mask order, and group m owns positions [m*n, (m+1)*n).
    """

    order: torch.Tensor
    group_count: int
    group_size: int

    @property
    def num_tokens(self) -> int:
        return self.group_count * self.group_size

    def inverse(self) -> torch.Tensor:
        inv = torch.empty_like(self.order)
        src = torch.arange(self.order.shape[-1], device=self.order.device)
        inv.scatter_(-1, self.order, src.expand_as(self.order))
        return inv


def partition(mask: torch.Tensor, g: int) -> GroupPartition:
    """Sort tokens by mask value ascending (stable, raster-index tie-break)
    and split into g contiguous equal chunks. `mask` is (..., N)."""
    n_tokens = mask.shape[-1]
    if g < 1:
        raise PartitionError(f"group count must be >= 1, got {g}")
    if n_tokens % g:
        raise PartitionError(f"{n_tokens} tokens not divisible into {g} groups")
    order = torch.argsort(mask, dim=-1, stable=True)
    return GroupPartition(order=order, group_count=g, group_size=n_tokens // g)


def gather(tokens: torch.Tensor, part: GroupPartition) -> torch.Tensor:
    """(..., N, C) -> (..., g, N/g, C) following the partition order."""
    n, c = tokens.shape[-2], tokens.shape[-1]
    if n != part.num_tokens:
        raise DimensionError(f"{n} tokens vs partition over {part.num_tokens}")
    idx = part.order.unsqueeze(-1).expand(*part.order.shape, c)
    sorted_tokens = tokens.gather(-2, idx)
    return sorted_tokens.reshape(*tokens.shape[:-2], part.group_count, part.group_size, c)


def scatter(groups: torch.Tensor, part: GroupPartition) -> torch.Tensor:
    """Exact inverse of gather: (..., g, N/g, C) -> (..., N, C)."""
    g, n_per, c = groups.shape[-3], groups.shape[-2], groups.shape[-1]
    if g != part.group_count or n_per != part.group_size:
        raise DimensionError(
            f"group stack ({g}, {n_per}) vs partition ({part.group_count}, {part.group_size})"
        )
    flat = groups.reshape(*groups.shape[:-3], part.num_tokens, c)
    idx = part.order.unsqueeze(-1).expand(*part.order.shape, c)
    out = torch.empty_like(flat)
    out.scatter_(-2, idx, flat)
    return out


def select_partner(values: torch.Tensor) -> torch.Tensor:
    """For each group, the index of the most cosine-similar other group.

    `values` is (..., g, n, C); the representative of a group is the mean of
    its value tokens. Zero-norm representatives have similarity 0 to every
    other group; argmax ties break toward the lowest group index.
    """
    g = values.shape[-3]
    if g < 2:
        raise SelectorError(f"partner selection needs >= 2 groups, got {g}")
    with torch.no_grad():
        rep = values.mean(dim=-2)                               # (..., g, C)
        norm = rep.norm(dim=-1, keepdim=True)
        unit = torch.where(norm > 0, rep / norm.clamp_min(1e-30), torch.zeros_like(rep))
        sim = unit @ unit.transpose(-2, -1)                     # (..., g, g)
        eye = torch.eye(g, dtype=torch.bool, device=values.device)
        sim = sim.masked_fill(eye, float("-inf"))
        best = sim.max(dim=-1, keepdim=True).values
        is_best = sim == best
        first_best = is_best & (is_best.cumsum(dim=-1) == 1)
        return first_best.int().argmax(dim=-1)
