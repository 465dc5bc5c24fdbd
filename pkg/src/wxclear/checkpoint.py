"""Checkpoint archive: a single zip holding raw little-endian tensor blobs
(model parameters and optimizer state), a YAML config snapshot, RNG states,
and an integrity checksum. Round-trips bit-exactly."""

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass

import numpy as np
import torch

from .config import ModelConfig, model_config_from_yaml, model_config_to_yaml
from .errors import ConfigError, ValidationError

FORMAT_NAME = "wxclear-checkpoint"
FORMAT_VERSION = 1

_DTYPES = {
    torch.float32: "<f4",
    torch.float64: "<f8",
    torch.int64: "<i8",
}
_TORCH_DTYPES = {v: k for k, v in _DTYPES.items()}

# fixed timestamp keeps archives byte-identical across rewrites
_ZIP_DATE = (2020, 1, 1, 0, 0, 0)


def _tensor_bytes(t: torch.Tensor) -> bytes:
    code = _DTYPES.get(t.dtype)
    if code is None:
        raise ValidationError(f"unsupported checkpoint dtype {t.dtype}")
    return t.detach().cpu().numpy().astype(np.dtype(code), copy=False).tobytes()


def _named_tensors(model, optimizer=None):
    items = [(f"param/{name}", p) for name, p in model.named_parameters()]
    if optimizer is not None:
        names = [name for name, _ in model.named_parameters()]
        state = optimizer.state_dict()["state"]
        for idx, slots in state.items():
            for slot, value in slots.items():
                if isinstance(value, torch.Tensor):
                    items.append((f"opt/{names[idx]}/{slot}", value))
    return items


@dataclass
class CheckpointData:
    config: ModelConfig
    iteration: int
    tensors: dict
    optimizer_hyper: dict | None
    numpy_rng_state: dict | None
    torch_rng_state: torch.Tensor | None


def save_checkpoint(path, model, iteration=0, optimizer=None,
                    optimizer_hyper=None, numpy_rng_state=None,
                    save_torch_rng=True):
    tensors = _named_tensors(model, optimizer)
    config_text = model_config_to_yaml(model.cfg)
    digest = hashlib.sha256()
    digest.update(config_text.encode())
    entries = []
    blobs = []
    for name, tensor in tensors:
        blob = _tensor_bytes(tensor)
        digest.update(name.encode())
        digest.update(blob)
        entries.append(
            {"name": name, "shape": list(tensor.shape), "dtype": _DTYPES[tensor.dtype]}
        )
        blobs.append(blob)
    torch_rng = torch.get_rng_state().numpy().tobytes() if save_torch_rng else None
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "iteration": int(iteration),
        "tensors": entries,
        "sha256": digest.hexdigest(),
        "optimizer_hyper": optimizer_hyper,
        "numpy_rng": numpy_rng_state,
        "has_torch_rng": torch_rng is not None,
    }

    def add(zf, name, data):
        info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
        zf.writestr(info, data)

    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", zipfile.ZIP_STORED) as zf:
        add(zf, "meta.json", json.dumps(meta, indent=1, sort_keys=True))
        add(zf, "config.yaml", config_text)
        for entry, blob in zip(entries, blobs):
            add(zf, "blobs/" + entry["name"], blob)
        if torch_rng is not None:
            add(zf, "rng/torch.bin", torch_rng)
    with open(path, "wb") as fh:
        fh.write(buffer.getvalue())


def load_checkpoint(path, expected_config: ModelConfig | None = None) -> CheckpointData:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != FORMAT_NAME:
            raise ValidationError(f"{path} is not a {FORMAT_NAME} archive")
        config_text = zf.read("config.yaml").decode()
        digest = hashlib.sha256()
        digest.update(config_text.encode())
        tensors = {}
        for entry in meta["tensors"]:
            blob = zf.read("blobs/" + entry["name"])
            digest.update(entry["name"].encode())
            digest.update(blob)
            arr = np.frombuffer(blob, dtype=np.dtype(entry["dtype"])).copy()
            tensors[entry["name"]] = torch.from_numpy(arr).to(
                _TORCH_DTYPES[entry["dtype"]]
            ).reshape(entry["shape"])
        if digest.hexdigest() != meta["sha256"]:
            raise ValidationError(f"checksum mismatch in {path}")
        torch_rng = None
        if meta.get("has_torch_rng"):
            torch_rng = torch.from_numpy(
                np.frombuffer(zf.read("rng/torch.bin"), dtype=np.uint8).copy()
            )
    config = model_config_from_yaml(config_text)
    if expected_config is not None and config != expected_config:
        raise ConfigError("checkpoint config snapshot does not match the requested config")
    return CheckpointData(
        config=config,
        iteration=meta["iteration"],
        tensors=tensors,
        optimizer_hyper=meta.get("optimizer_hyper"),
        numpy_rng_state=meta.get("numpy_rng"),
        torch_rng_state=torch_rng,
    )


def apply_parameters(model, data: CheckpointData):
    named = dict(model.named_parameters())
    loaded = {k[len("param/"):]: v for k, v in data.tensors.items() if k.startswith("param/")}
    if set(named) != set(loaded):
        missing = set(named) ^ set(loaded)
        raise ValidationError(f"parameter names mismatch: {sorted(missing)[:4]}...")
    with torch.no_grad():
        for name, param in named.items():
            if tuple(param.shape) != tuple(loaded[name].shape):
                raise ValidationError(f"shape mismatch for {name}")
            param.copy_(loaded[name])


def build_model(data: CheckpointData):
    from .network import RestorationNet

    model = RestorationNet(data.config)
    apply_parameters(model, data)
    return model


def restore_optimizer(optimizer, model, data: CheckpointData):
    """Rebuild Adam state from checkpoint tensors; exact continuation."""
    names = [name for name, _ in model.named_parameters()]
    state = {}
    for idx, name in enumerate(names):
        slots = {}
        for key, tensor in data.tensors.items():
            prefix = f"opt/{name}/"
            if key.startswith(prefix):
                slots[key[len(prefix):]] = tensor.clone()
        if slots:
            state[idx] = slots
    sd = optimizer.state_dict()
    sd["state"] = state
    if data.optimizer_hyper:
        for group in sd["param_groups"]:
            group.update(data.optimizer_hyper)
    optimizer.load_state_dict(sd)
