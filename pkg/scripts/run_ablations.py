#!/usr/bin/env python3
"""Generalization experiment with spectral-filter ablations: train the
combined, Sobel-only, and SVD-only configurations on the same synthetic
split and compare held-out PSNR gains."""

import argparse
import dataclasses
import os
import tempfile
import time

from wxclear.config import LossConfig, ModelConfig, SdpConfig, SynthConfig, TrainConfig
from wxclear.data import PairDataset, build_dataset
from wxclear.network import RestorationNet
from wxclear.train import evaluate_pairs, run_training


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=700)
    parser.add_argument("--train-scenes", type=int, default=22, help="x3 kinds = pairs")
    parser.add_argument("--val-scenes", type=int, default=6)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workdir", default=None)
    args = parser.parse_args()

    root = args.workdir or tempfile.mkdtemp(prefix="ablate_")
    build_dataset(root, SynthConfig(train_scenes=args.train_scenes,
                                    val_scenes=args.val_scenes, size=64,
                                    seed=args.seed))
    train_set = PairDataset(root, "train")
    val_set = PairDataset(root, "val")
    print(f"train pairs={len(train_set)}  val pairs={len(val_set)}")

    variants = {
        "combined": ModelConfig(seed=args.seed),
        "sobel_only": ModelConfig(seed=args.seed, sdp=SdpConfig(use_svd=False)),
        "svd_only": ModelConfig(seed=args.seed, sdp=SdpConfig(use_sobel=False)),
    }
    cfg = TrainConfig(steps=args.steps, batch_size=1, lr=2e-3, crop=48,
                      checkpoint_every=0, seed=args.seed)
    results = {}
    for name, model_cfg in variants.items():
        start = time.time()
        model = RestorationNet(model_cfg)
        run_training(model, train_set, LossConfig(), cfg, os.path.join(root, name))
        table = evaluate_pairs(model, val_set)
        avg = table["average"]
        gain = avg["psnr"] - avg["base_psnr"]
        results[name] = gain
        print(f"{name:11s} restored={avg['psnr']:.2f} dB  degraded={avg['base_psnr']:.2f} dB  "
              f"gain={gain:+.2f} dB  ({(time.time() - start) / 60:.1f} min)")

    ok = (
        results["combined"] >= 1.5
        and results["sobel_only"] <= results["combined"] + 0.25
        and results["svd_only"] <= results["combined"] + 0.25
    )
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
