"""Training loop: Adam with cosine decay and gradient clipping, periodic
checkpointing with exact-resume RNG capture, and paired-image evaluation."""

import math
import os
from dataclasses import dataclass

import numpy as np
import torch

from .checkpoint import load_checkpoint, restore_optimizer, save_checkpoint
from .config import LossConfig, TrainConfig
from .data import PairDataset, to_image, to_tensor
from .errors import NanLossError
from .losses import correlation_loss, l1_loss
from .metrics import psnr, ssim

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass
class StepRecord:
    step: int
    l1: float
    cor: float
    total: float
    lr: float
    checkpoint_path: str | None = None


def cosine_lr(base: float, step: int, total_steps: int, final_factor: float = 0.05) -> float:
    """Cosine decay from `base` at step 1 to `base * final_factor` at the end."""
    if total_steps <= 1:
        return base
    t = (step - 1) / (total_steps - 1)
    return base * (final_factor + (1.0 - final_factor) * 0.5 * (1.0 + math.cos(math.pi * t)))


def _dump_nan_batch(out_dir, step, degraded, clean, losses):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"nan_dump_step{step:06d}.npz")
    np.savez(
        path,
        degraded=degraded.detach().cpu().numpy(),
        clean=clean.detach().cpu().numpy(),
        step=step,
        l1=losses[0],
        cor=losses[1],
    )
    return path


def train_loop(model, dataset: PairDataset, loss_cfg: LossConfig, cfg: TrainConfig,
               out_dir, resume_from=None, total_steps=None):
    """Iterate optimization steps, yielding one StepRecord per step.

    Checkpoints are written every `cfg.checkpoint_every` steps and at the
    final step; they capture optimizer state and the batch-sampling RNG so
    a resumed run continues bit-identically.
    """
    os.makedirs(out_dir, exist_ok=True)
    total_steps = cfg.steps if total_steps is None else total_steps
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.lr, betas=ADAM_BETAS, eps=ADAM_EPS
    )
    hyper = {"lr": cfg.lr, "betas": ADAM_BETAS, "eps": ADAM_EPS, "weight_decay": 0.0}
    if resume_from is not None:
        data = load_checkpoint(resume_from, expected_config=model.cfg)
        from .checkpoint import apply_parameters

        apply_parameters(model, data)
        restore_optimizer(optimizer, model, data)
        rng = np.random.default_rng()
        rng.bit_generator.state = data.numpy_rng_state
        if data.torch_rng_state is not None:
            torch.set_rng_state(data.torch_rng_state)
        start = data.iteration
    else:
        rng = np.random.default_rng(cfg.seed)
        start = 0

    def save(step):
        path = os.path.join(out_dir, f"step{step:06d}.ckpt")
        save_checkpoint(
            path,
            model,
            iteration=step,
            optimizer=optimizer,
            optimizer_hyper=hyper,
            numpy_rng_state=rng.bit_generator.state,
        )
        return path

    model.train()
    for step in range(start + 1, total_steps + 1):
        lr = cosine_lr(cfg.lr, step, total_steps, cfg.final_lr_factor)
        for group in optimizer.param_groups:
            group["lr"] = lr
        degraded, clean = dataset.sample_batch(rng, cfg.batch_size, crop=cfg.crop)
        pred = model(degraded, clamp=False)
        l1 = l1_loss(pred, clean)
        cor = correlation_loss(pred, clean, loss_cfg)
        total = l1 + loss_cfg.beta * cor
        l1_v, cor_v, total_v = (float(t.detach()) for t in (l1, cor, total))
        if not np.isfinite(total_v):
            dump = _dump_nan_batch(out_dir, step, degraded, clean, (l1_v, cor_v))
            raise NanLossError(f"non-finite loss at step {step}", dump_path=dump)
        optimizer.zero_grad()
        total.backward()
        if cfg.clip_norm > 0:
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)
        optimizer.step()
        ckpt = None
        if (cfg.checkpoint_every and step % cfg.checkpoint_every == 0) or step == total_steps:
            ckpt = save(step)
        yield StepRecord(
            step=step, l1=l1_v, cor=cor_v, total=total_v, lr=lr, checkpoint_path=ckpt
        )


def run_training(model, dataset, loss_cfg, cfg, out_dir, resume_from=None,
                 log=None, stop_when=None):
    """Drive train_loop to completion; returns the list of StepRecords.
    `stop_when(record)` may end training early (a checkpoint is written)."""
    records = []
    loop = train_loop(model, dataset, loss_cfg, cfg, out_dir, resume_from=resume_from)
    for record in loop:
        records.append(record)
        if log is not None:
            log(record)
        if stop_when is not None and stop_when(record) and record.step < cfg.steps:
            loop.close()
            break
    return records


@torch.no_grad()
def evaluate_pairs(model, dataset: PairDataset, limit=None):
    """Per-kind and average PSNR/SSIM of restored vs clean, plus the
    degraded-vs-clean baseline."""
    model.eval()
    per_kind = {}
    n = len(dataset) if limit is None else min(limit, len(dataset))
    for i in range(n):
        degraded, clean, kind = dataset.load_pair(i)
        restored = to_image(model.restore(to_tensor(degraded).unsqueeze(0))[0])
        entry = per_kind.setdefault(kind, {"psnr": [], "ssim": [], "base_psnr": [], "base_ssim": []})
        entry["psnr"].append(psnr(restored, clean))
        entry["ssim"].append(ssim(restored, clean))
        entry["base_psnr"].append(psnr(degraded, clean))
        entry["base_ssim"].append(ssim(degraded, clean))
    table = {}
    for kind, vals in sorted(per_kind.items()):
        table[kind] = {
            "count": len(vals["psnr"]),
            "psnr": float(np.mean(vals["psnr"])),
            "ssim": float(np.mean(vals["ssim"])),
            "base_psnr": float(np.mean(vals["base_psnr"])),
            "base_ssim": float(np.mean(vals["base_ssim"])),
        }
    if table:
        table["average"] = {
            "count": sum(v["count"] for k, v in table.items()),
            "psnr": float(np.mean([v["psnr"] for k, v in table.items()])),
            "ssim": float(np.mean([v["ssim"] for k, v in table.items()])),
            "base_psnr": float(np.mean([v["base_psnr"] for k, v in table.items()])),
            "base_ssim": float(np.mean([v["base_ssim"] for k, v in table.items()])),
        }
    return table
