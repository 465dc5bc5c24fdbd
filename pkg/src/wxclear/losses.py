"""Training objective: mean absolute error plus a patchwise Pearson
correlation term weighted by beta."""

import torch
from einops import rearrange

from .config import LossConfig
from .errors import DimensionError
from .ops import reflect_pad2d


def _check_pair(pred, target):
    if pred.shape != target.shape:
        raise DimensionError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")


def l1_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    _check_pair(pred, target)
    return (pred - target).abs().mean()


def _patches(x: torch.Tensor, p: int) -> torch.Tensor:
    """Non-overlapping p x p patches per channel, reflect-padded to fit:
    (..., C, H, W) -> (..., n_patches, p*p)."""
    h, w = x.shape[-2], x.shape[-1]
    pad_h = (p - h % p) % p
    pad_w = (p - w % p) % p
    if pad_h or pad_w:
        x = reflect_pad2d(x, (0, pad_w, 0, pad_h))
    return rearrange(x, "... c (hp p1) (wp p2) -> ... (c hp wp) (p1 p2)", p1=p, p2=p)


def correlation_loss(pred: torch.Tensor, target: torch.Tensor,
                     cfg: LossConfig | None = None) -> torch.Tensor:
    """Mean over patches of (1 - Pearson rho), rho epsilon-guarded so that
    constant patches contribute the neutral value 1. Always in [0, 2]."""
    cfg = cfg or LossConfig()
    _check_pair(pred, target)
    p = _patches(pred, cfg.patch_size)
    t = _patches(target, cfg.patch_size)
    pc = p - p.mean(dim=-1, keepdim=True)
    tc = t - t.mean(dim=-1, keepdim=True)
    cov = (pc * tc).mean(dim=-1)
    # epsilon inside the sqrt keeps constant patches differentiable
    sp = (pc.pow(2).mean(dim=-1) + cfg.epsilon**2).sqrt()
    st = (tc.pow(2).mean(dim=-1) + cfg.epsilon**2).sqrt()
    rho = cov / (sp * st + cfg.epsilon)
    return (1.0 - rho).mean()


def total_loss(pred: torch.Tensor, target: torch.Tensor,
               cfg: LossConfig | None = None) -> torch.Tensor:
    cfg = cfg or LossConfig()
    if cfg.beta == 0.0:
        return l1_loss(pred, target)
    return l1_loss(pred, target) + cfg.beta * correlation_loss(pred, target, cfg)
