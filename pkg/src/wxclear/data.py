"""Dataset layout and loading.

Layout: root/{train,val}/{degraded,clean}/NAME.png with identical filenames
pairing images, plus root/{split}/manifest.tsv lines of `NAME<TAB>kind`.
Images are 8-bit PNG on disk; all in-memory math is float32 in [0, 1].
"""

import os
from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image

from .config import SynthConfig
from .degrade import DegradationSpec, synthesize_degradation
from .errors import DataError
from .scenes import procedural_scene

SPLITS = ("train", "val")


def load_image(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    except FileNotFoundError as exc:
        raise DataError(f"image not found: {path}") from exc
    return arr / 255.0


def save_image(path, img: np.ndarray):
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[..., None].repeat(3, axis=-1)
    quantized = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(quantized).save(path, format="PNG")


def to_tensor(img: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1))).float()


def to_image(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().transpose(1, 2, 0)


@dataclass(frozen=True)
class PairRecord:
    name: str
    kind: str
    degraded_path: str
    clean_path: str


class PairDataset:
    def __init__(self, root, split="train"):
        self.root = str(root)
        self.split = split
        manifest = os.path.join(self.root, split, "manifest.tsv")
        if not os.path.exists(manifest):
            raise DataError(f"missing manifest: {manifest}")
        self.records = []
        with open(manifest) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    name, kind = line.split("\t")
                except ValueError as exc:
                    raise DataError(f"malformed manifest line: {line!r}") from exc
                self.records.append(
                    PairRecord(
                        name=name,
                        kind=kind,
                        degraded_path=os.path.join(self.root, split, "degraded", name + ".png"),
                        clean_path=os.path.join(self.root, split, "clean", name + ".png"),
                    )
                )
        if not self.records:
            raise DataError(f"empty dataset: {manifest}")

    def __len__(self):
        return len(self.records)

    def load_pair(self, index):
        rec = self.records[index]
        return load_image(rec.degraded_path), load_image(rec.clean_path), rec.kind

    def sample_batch(self, rng: np.random.Generator, batch_size: int,
                     crop: int | None = None, augment: bool = True):
        """Random paired crops with flips; identical transform on both sides."""
        degraded, clean = [], []
        for _ in range(batch_size):
            idx = int(rng.integers(0, len(self.records)))
            d, c, _ = self.load_pair(idx)
            if crop is not None:
                h, w = d.shape[:2]
                if h < crop or w < crop:
                    raise DataError(f"image {self.records[idx].name} smaller than crop {crop}")
                y0 = int(rng.integers(0, h - crop + 1))
                x0 = int(rng.integers(0, w - crop + 1))
                d = d[y0 : y0 + crop, x0 : x0 + crop]
                c = c[y0 : y0 + crop, x0 : x0 + crop]
            if augment:
                if rng.integers(0, 2):
                    d, c = d[:, ::-1], c[:, ::-1]
                if rng.integers(0, 2):
                    d, c = d[::-1], c[::-1]
            degraded.append(to_tensor(np.ascontiguousarray(d)))
            clean.append(to_tensor(np.ascontiguousarray(c)))
        return torch.stack(degraded), torch.stack(clean)


def _scene_sources(cfg: SynthConfig, count: int, seed_base: int):
    if cfg.clean_dir is not None:
        names = sorted(
            f for f in os.listdir(cfg.clean_dir) if f.lower().endswith(".png")
        )
        if len(names) < count:
            raise DataError(
                f"clean_dir has {len(names)} PNGs, need {count} for this split"
            )
        for name in names[:count]:
            img = load_image(os.path.join(cfg.clean_dir, name))
            yield _fit(img, cfg.size)
    else:
        for i in range(count):
            yield procedural_scene(seed_base + i, cfg.size, cfg.size)


def _fit(img, size):
    from PIL import Image as PilImage

    pil = PilImage.fromarray(np.round(img * 255).astype(np.uint8))
    pil = pil.resize((size, size), PilImage.BILINEAR)
    return np.asarray(pil, dtype=np.float32) / 255.0


def build_dataset(root, cfg: SynthConfig) -> dict:
    """Write the paired layout from procedural scenes or a clean directory.
    Returns pair counts per split."""
    counts = {}
    for split, n_scenes, split_tag in (
        ("train", cfg.train_scenes, 0),
        ("val", cfg.val_scenes, 1),
    ):
        if n_scenes == 0:
            continue
        base = os.path.join(root, split)
        os.makedirs(os.path.join(base, "degraded"), exist_ok=True)
        os.makedirs(os.path.join(base, "clean"), exist_ok=True)
        entries = []
        seed_base = cfg.seed * 1_000_003 + split_tag * 500_009
        for i, clean in enumerate(_scene_sources(cfg, n_scenes, seed_base)):
            for k, kind in enumerate(cfg.kinds):
                spec = DegradationSpec(kind=kind, seed=seed_base + 31 * i + 7 * k + 1)
                overrides = cfg.params.get(kind, {})
                if overrides:
                    spec = spec.replace(**dict(overrides))
                sample = synthesize_degradation(clean, spec)
                name = f"scene{i:04d}_{kind}"
                save_image(os.path.join(base, "degraded", name + ".png"), sample.degraded)
                save_image(os.path.join(base, "clean", name + ".png"), sample.clean)
                entries.append((name, kind))
        with open(os.path.join(base, "manifest.tsv"), "w") as fh:
            for name, kind in entries:
                fh.write(f"{name}\t{kind}\n")
        counts[split] = len(entries)
    return counts
