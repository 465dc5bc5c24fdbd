#!/usr/bin/env python3
"""Overfit smoke experiment: memorize 8 synthetic 64x64 pairs and report
final training L1 plus the per-pair PSNR gain over the degraded baseline."""

import argparse
import os
import tempfile
import time

import numpy as np

from wxclear.config import LossConfig, ModelConfig, SynthConfig, TrainConfig
from wxclear.data import PairDataset, build_dataset, to_image, to_tensor
from wxclear.metrics import psnr
from wxclear.network import RestorationNet
from wxclear.train import train_loop


def build_overfit_pairs(root, seed=0):
    build_dataset(root, SynthConfig(train_scenes=3, val_scenes=0, size=64, seed=seed))
    manifest = os.path.join(root, "train", "manifest.tsv")
    lines = open(manifest).read().strip().splitlines()[:8]
    with open(manifest, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return PairDataset(root, "train")


def pair_stats(model, dataset):
    gains, l1s = [], []
    for i in range(len(dataset)):
        degraded, clean, _ = dataset.load_pair(i)
        restored = to_image(model.restore(to_tensor(degraded).unsqueeze(0))[0])
        gains.append(psnr(restored, clean) - psnr(degraded, clean))
        l1s.append(float(np.abs(restored - clean).mean()))
    return np.asarray(gains), float(np.mean(l1s))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workdir", default=None)
    args = parser.parse_args()

    root = args.workdir or tempfile.mkdtemp(prefix="overfit_")
    dataset = build_overfit_pairs(root, seed=args.seed)
    model = RestorationNet(ModelConfig(seed=args.seed))
    cfg = TrainConfig(steps=args.steps, batch_size=1, lr=2e-3, crop=48,
                      checkpoint_every=0, seed=args.seed)
    start = time.time()
    for rec in train_loop(model, dataset, LossConfig(), cfg, os.path.join(root, "run")):
        if rec.step % 200 == 0:
            gains, l1 = pair_stats(model, dataset)
            print(f"step {rec.step:5d}  t={time.time() - start:6.0f}s  "
                  f"train_l1={rec.l1:.4f}  full_l1={l1:.4f}  "
                  f"gain min/mean={gains.min():+.2f}/{gains.mean():+.2f} dB", flush=True)
            if gains.min() > 3.5 and l1 < 0.027:
                print("early stop: criteria met with margin")
                break
    gains, l1 = pair_stats(model, dataset)
    elapsed = time.time() - start
    print(f"\nfinal: wall={elapsed / 60:.1f} min  training L1={l1:.4f}  "
          f"min gain={gains.min():+.2f} dB  mean gain={gains.mean():+.2f} dB")
    ok = l1 < 0.03 and gains.min() >= 3.0 and elapsed <= 1800
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
