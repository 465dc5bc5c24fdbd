"""Command-line surface: dataset synthesis, training, restoration, and
evaluation. Exit codes: 0 ok, 2 usage/data problems, 3 numeric failure."""

import argparse
import json
import os
import sys

import numpy as np
import torch

from .checkpoint import build_model, load_checkpoint
from .config import LossConfig, ModelConfig, from_dict, load_config
from .data import PairDataset, build_dataset, load_image, save_image, to_image, to_tensor
from .errors import ConfigError, DataError, NanLossError, ValidationError, WxclearError
from .grouping import partition
from .network import RestorationNet
from .train import evaluate_pairs, train_loop

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

LOG_LINE = "step={step:06d} l1={l1:.8f} cor={cor:.8f} total={total:.8f} lr={lr:.8f}"


def _with_seed(cfg, seed, attr):
    if seed is None:
        return cfg
    import dataclasses

    return dataclasses.replace(cfg, **{attr: seed})


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    synth = _with_seed(cfg.synth, args.seed, "seed")
    os.makedirs(args.out, exist_ok=True)
    counts = build_dataset(args.out, synth)
    for split, count in counts.items():
        print(f"{split}: {count} pairs")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    model_cfg = _with_seed(cfg.model, args.seed, "seed")
    train_cfg = _with_seed(cfg.train, args.seed, "seed")
    dataset = PairDataset(cfg.data_root, "train")
    val = None
    try:
        val = PairDataset(cfg.data_root, "val")
    except DataError:
        pass
    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    model = RestorationNet(model_cfg)
    resume = args.resume
    log_path = os.path.join(out_dir, "train.log")
    mode = "a" if resume else "w"
    with open(log_path, mode) as log:

        def emit(line):
            print(line)
            log.write(line + "\n")
            log.flush()

        for rec in train_loop(model, dataset, cfg.loss, train_cfg, out_dir,
                              resume_from=resume):
            emit(LOG_LINE.format(step=rec.step, l1=rec.l1, cor=rec.cor,
                                 total=rec.total, lr=rec.lr))
            if rec.checkpoint_path:
                emit(f"checkpoint {rec.checkpoint_path}")
            if val is not None and train_cfg.val_every and rec.step % train_cfg.val_every == 0:
                table = evaluate_pairs(model, val)
                avg = table["average"]
                emit(f"val step={rec.step:06d} psnr={avg['psnr']:.4f} ssim={avg['ssim']:.6f}")
    return EXIT_OK


def _dump_mask(path_base, mask, groups):
    arr = mask[0, 0].detach().cpu().numpy().astype(np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    norm = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
    save_image(path_base + ".mask.png", norm[..., None].repeat(3, axis=-1))
    n = arr.size
    part = partition(torch.tensor(arr.reshape(-1)), groups)
    values = arr.reshape(-1)[part.order.numpy()]
    with open(path_base + ".groups.txt", "w") as fh:
        fh.write(f"tokens={n} groups={groups} group_size={n // groups}\n")
        for m in range(groups):
            chunk = values[m * (n // groups) : (m + 1) * (n // groups)]
            fh.write(
                f"group {m}: positions [{m * (n // groups)}, {(m + 1) * (n // groups)}) "
                f"mask_range [{chunk.min():.6g}, {chunk.max():.6g}]\n"
            )


def _dump_prompt(path_base, prompt):
    arr = prompt[0].detach().cpu().numpy()
    c, h, w = arr.shape
    cols = int(np.ceil(np.sqrt(c)))
    rows = int(np.ceil(c / cols))
    grid = np.zeros((rows * h, cols * w), dtype=np.float64)
    for i in range(c):
        ch = arr[i]
        lo, hi = ch.min(), ch.max()
        norm = (ch - lo) / (hi - lo) if hi > lo else np.zeros_like(ch)
        r, col = divmod(i, cols)
        grid[r * h : (r + 1) * h, col * w : (col + 1) * w] = norm
    save_image(path_base + ".fs.png", grid[..., None].repeat(3, axis=-1))


def cmd_restore(args) -> int:
    data = load_checkpoint(args.checkpoint)
    model = build_model(data)
    model.eval()
    os.makedirs(args.out, exist_ok=True)
    for image_path in args.images:
        img = load_image(image_path)
        name = os.path.splitext(os.path.basename(image_path))[0]
        collect = {}
        restored = model.restore(to_tensor(img).unsqueeze(0), collect=collect)
        save_image(os.path.join(args.out, name + ".png"), to_image(restored[0]))
        if args.dump_masks:
            for p, mask in enumerate(collect["masks"]):
                _dump_mask(
                    os.path.join(args.out, f"{name}.stage{p + 1}"),
                    mask,
                    model.cfg.groups[p],
                )
        if args.dump_fs:
            for p, prompt in enumerate(collect["prompts"]):
                _dump_prompt(os.path.join(args.out, f"{name}.stage{p + 1}"), prompt)
        print(f"restored {image_path} -> {os.path.join(args.out, name + '.png')}")
    return EXIT_OK


def _format_table(table) -> str:
    lines = [f"{'kind':<10} {'count':>5} {'psnr':>8} {'ssim':>8} {'base_psnr':>10} {'base_ssim':>10}"]
    order = [k for k in table if k != "average"] + (["average"] if "average" in table else [])
    for kind in order:
        row = table[kind]
        lines.append(
            f"{kind:<10} {row['count']:>5} {row['psnr']:>8.2f} {row['ssim']:>8.4f} "
            f"{row['base_psnr']:>10.2f} {row['base_ssim']:>10.4f}"
        )
    return "\n".join(lines)


def _plot_table(table, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kinds = [k for k in table if k != "average"]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, metric in zip(axes, ("psnr", "ssim")):
        restored = [table[k][metric] for k in kinds]
        base = [table[k][f"base_{metric}"] for k in kinds]
        x = np.arange(len(kinds))
        ax.bar(x - 0.2, base, width=0.4, label="degraded")
        ax.bar(x + 0.2, restored, width=0.4, label="restored")
        ax.set_xticks(x, kinds)
        ax.set_title(metric.upper())
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def cmd_eval(args) -> int:
    data = load_checkpoint(args.checkpoint)
    model = build_model(data)
    dataset = PairDataset(args.data, args.split)
    table = evaluate_pairs(model, dataset)
    text = _format_table(table)
    print(text)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "eval_table.txt"), "w") as fh:
        fh.write(text + "\n")
    with open(os.path.join(args.out, "eval_metrics.json"), "w") as fh:
        json.dump(table, fh, indent=1, sort_keys=True)
    if args.plot:
        _plot_table(table, os.path.join(args.out, "eval_plot.png"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wxclear",
        description="All-in-one adverse-weather image restoration",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a paired dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("restore", help="restore images with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-masks", action="store_true")
    p.add_argument("--dump-fs", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a paired dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="val")
    p.add_argument("--out", default=".")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NanLossError as exc:
        print(f"error: {exc} (dump: {exc.dump_path})", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DataError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WxclearError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
