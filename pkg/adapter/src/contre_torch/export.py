"""Run a PyTorch classifier over image manifests and export predictions.

The output is the JSON-lines interchange format the analysis pipeline
consumes: one line per (sample, view) with the predicted class, the logit
vector, and the penultimate-layer feature vector when one can be extracted.
Records keep a fixed key order and features travel as base64 over
little-endian float32 bytes, so re-exporting the same model over the same
manifest yields a byte-identical file.

Images receive no processing beyond PNG decode and the tensor layout the
framework expects (RGB, float32 in [0, 1], channels first).  Resizing,
normalization, and augmentation all belong to whoever produced the manifest.
"""

from __future__ import annotations

import base64
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np
import torch
from PIL import Image

VIEWS = ("train_orig", "train_contre", "test_orig", "test_contre")

_ID_CHARS = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-")

_DATASET_HEADER = "sample_id,path,label"
_VIEW_HEADER = "sample_id,view_index,path,label,ops,seed"


class AdapterError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AdapterError):
    """A request is malformed before any model or data is touched."""


class DataError(AdapterError):
    """A manifest, image, or produced record violates a contract."""


class ModelLoadError(AdapterError):
    """The model spec does not yield a usable classifier."""


# --- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class AdapterConfig:
    """One export request.

    ``model`` is a checkpoint path (TorchScript archive or pickled module)
    or, when no such file exists, a torchvision model name resolved with its
    default weights.  ``feature_layer`` selects the module whose output is
    recorded as the feature vector; left unset, the feature is the input of
    the last Linear layer to fire, which is the classifier's input.
    """

    model: str
    manifest: str
    view: str
    out: str
    model_id: str | None = None
    batch_size: int = 64
    device: str = "cpu"
    feature_layer: str | None = None

    def __post_init__(self):
        if self.view not in VIEWS:
            raise ConfigError(f"view {self.view!r} not one of {VIEWS}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, "
                              f"got {self.batch_size}")
        try:
            torch.device(self.device)
        except RuntimeError as exc:
            raise ConfigError(f"bad device {self.device!r}: {exc}") from None

    def resolved_model_id(self) -> str:
        if self.model_id is not None:
            return self.model_id
        stem = Path(self.model).stem
        cleaned = "".join(c if c in _ID_CHARS else "-" for c in stem)
        return cleaned or "model"


class ExportResult(NamedTuple):
    out_path: str
    record_count: int
    notes: tuple[str, ...]


# --- manifests ---------------------------------------------------------------

class ManifestEntry(NamedTuple):
    sample_id: str
    view_index: int
    path: str
    label: int


def read_entries(manifest: str | os.PathLike, view: str) -> list[ManifestEntry]:
    """Read either manifest flavor, in file order.

    Original views come from dataset manifests (sample_id, path, label) and
    get view_index 0; contrastive views come from generation manifests
    (sample_id, view_index, path, label, ops, seed).  The header decides
    which flavor a file is, and it must match the requested view tag.
    Relative image paths resolve against the manifest's directory.
    """
    p = Path(manifest)
    try:
        lines = p.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read manifest {p}: {exc}") from None
    if not lines or lines[0] not in (_DATASET_HEADER, _VIEW_HEADER):
        raise DataError(f"{p}:1: expected header {_DATASET_HEADER!r} or "
                        f"{_VIEW_HEADER!r}")
    contrastive = lines[0] == _VIEW_HEADER
    if view.endswith("_orig") and contrastive:
        raise DataError(f"view {view} needs a dataset manifest, but {p} "
                        f"is a generation manifest")
    if view.endswith("_contre") and not contrastive:
        raise DataError(f"view {view} needs a generation manifest, but {p} "
                        f"is a dataset manifest")

    n_cols = 6 if contrastive else 3
    entries = []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != n_cols:
            raise DataError(f"{p}:{i}: expected {n_cols} columns, "
                            f"got {len(parts)}")
        if contrastive:
            sid, vidx_text, rel, label_text = parts[:4]
        else:
            sid, rel, label_text = parts
            vidx_text = "0"
        if not sid or not set(sid) <= _ID_CHARS:
            raise DataError(f"{p}:{i}: sample_id {sid!r} must be non-empty "
                            f"and use only [A-Za-z0-9._-]")
        try:
            view_index = int(vidx_text)
            label = int(label_text)
        except ValueError:
            raise DataError(f"{p}:{i}: view_index and label must be "
                            f"integers") from None
        if label < 0:
            raise DataError(f"{p}:{i}: label must be >= 0, got {label}")
        if not os.path.isabs(rel):
            rel = str(p.parent / rel)
        entries.append(ManifestEntry(sample_id=sid, view_index=view_index,
                                     path=rel, label=label))
    if not entries:
        raise DataError(f"{p}: manifest has no rows")
    return entries


def _decode_image(path: str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from None


# --- model loading -----------------------------------------------------------

def load_model(spec: str, device: str) -> torch.nn.Module:
    """Load a classifier from a checkpoint path or a torchvision name.

    Checkpoint files may be TorchScript archives or whole pickled modules.
    Bare state dicts are rejected: they carry weights without the network
    that gives them meaning.
    """
    if os.path.exists(spec):
        model = _load_checkpoint(spec)
    else:
        model = _load_hub(spec)
    model.eval()
    return model.to(torch.device(device))


def _load_checkpoint(path: str) -> torch.nn.Module:
    try:
        return torch.jit.load(path, map_location="cpu")
    except (RuntimeError, ValueError):
        pass
    try:
        loaded = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise ModelLoadError(f"cannot load checkpoint {path}: {exc}") \
            from None
    if isinstance(loaded, dict):
        raise ModelLoadError(
            f"{path} holds a bare state dict; save the full module "
            f"(torch.save(model, ...)) or a TorchScript archive instead")
    if not isinstance(loaded, torch.nn.Module):
        raise ModelLoadError(f"{path} holds {type(loaded).__name__}, "
                             f"not a torch.nn.Module")
    return loaded


def _load_hub(name: str) -> torch.nn.Module:
    try:
        from torchvision.models import get_model
    except ImportError:
        raise ModelLoadError(
            f"{name!r} is not a checkpoint file, and torchvision is not "
            f"installed to resolve it as a model name") from None
    try:
        return get_model(name, weights="DEFAULT")
    except Exception as exc:
        raise ModelLoadError(f"{name!r} is neither an existing checkpoint "
                             f"file nor a loadable torchvision model: "
                             f"{exc}") from None


# --- feature extraction ------------------------------------------------------

class _FeatureTap:
    """Captures the penultimate activation during forward passes.

    Eager modules are tapped with forward hooks: on the module a selector
    names (recording its output), or by default on every Linear layer, where
    the input of the last one to fire is the classifier's input.  Loaded
    TorchScript archives refuse hooks, so they are tapped through an exported
    ``forward_features`` method when the archive provides one; without it the
    export carries no features.
    """

    def __init__(self, model: torch.nn.Module, selector: str | None):
        self.model = model
        self.notes: tuple[str, ...] = ()
        self._captured: list[torch.Tensor] = []
        self._script_features = None
        scripted = isinstance(model, torch.jit.ScriptModule)
        if scripted:
            if selector is not None:
                raise ConfigError(
                    "TorchScript archives do not support feature hooks; "
                    "export from the original module to use --feature-layer")
            if hasattr(model, "forward_features"):
                self._script_features = model.forward_features
            else:
                self.notes = ("no forward_features method in the TorchScript "
                              "archive; exporting without features",)
        elif selector is not None:
            named = dict(model.named_modules())
            if selector not in named:
                leaves = [n for n, m in named.items()
                          if n and not any(m.children())]
                raise ConfigError(
                    f"feature layer {selector!r} not found; leaf modules "
                    f"are {leaves[:8]}")
            named[selector].register_forward_hook(self._keep_output)
        else:
            linears = [m for m in model.modules()
                       if isinstance(m, torch.nn.Linear)]
            if not linears:
                raise ConfigError("model has no Linear layer to treat as "
                                  "the classifier; pass --feature-layer")
            for module in linears:
                module.register_forward_hook(self._keep_input)

    def _keep_output(self, module, inputs, output):
        self._captured.append(output)

    def _keep_input(self, module, inputs, output):
        self._captured.append(inputs[0])

    def run(self, batch: torch.Tensor) -> tuple[torch.Tensor,
                                                np.ndarray | None]:
        """Forward one batch; returns (logits, features or None)."""
        self._captured.clear()
        logits = self.model(batch)
        if not isinstance(logits, torch.Tensor) or logits.dim() != 2:
            got = (tuple(logits.shape) if isinstance(logits, torch.Tensor)
                   else type(logits).__name__)
            raise ModelLoadError(f"model output must be a 2-D logit "
                                 f"tensor, got {got}")
        if self._script_features is not None:
            feats = self._script_features(batch)
        elif self._captured:
            # last capture wins: the final Linear to fire is the classifier
            feats = self._captured[-1]
        else:
            return logits, None
        arr = feats.detach().reshape(feats.shape[0], -1)
        return logits, arr.cpu().numpy().astype(np.float32)


# --- record emission ---------------------------------------------------------

def _record_obj(model_id: str, view: str, entry: ManifestEntry, pred: int,
                logits: list[float], feature: np.ndarray | None) -> dict:
    obj: dict = {
        "model_id": model_id,
        "view": view,
        "sample_id": entry.sample_id,
        "view_index": entry.view_index,
        "label": entry.label,
        "pred": pred,
    }
    obj["logits"] = logits
    if feature is not None:
        raw = np.asarray(feature, dtype="<f4").ravel().tobytes()
        obj["feature"] = base64.b64encode(raw).decode("ascii")
        obj["feature_dim"] = int(feature.size)
    return obj


def _check_record(obj: dict) -> None:
    """Enforce the consumer's schema before anything reaches disk.

    A failure aborts the export with the offending record spelled out, so a
    bad manifest or a mismatched classifier head never produces a file the
    pipeline would reject halfway through.
    """
    def fail(reason: str):
        raise DataError(f"record fails validation ({reason}): "
                        f"{json.dumps(obj, separators=(',', ':'))}")

    if not obj["model_id"]:
        fail("model_id must be non-empty")
    if obj["view"].endswith("_orig") and obj["view_index"] != 0:
        fail(f"view {obj['view']} requires view_index 0")
    if obj["view"].endswith("_contre") and obj["view_index"] < 1:
        fail(f"view {obj['view']} requires view_index >= 1")
    if obj["label"] >= len(obj["logits"]):
        fail(f"label {obj['label']} out of range for "
             f"{len(obj['logits'])} logits; does the manifest match "
             f"the classifier head?")
    if any(not math.isfinite(v) for v in obj["logits"]):
        fail("non-finite logits")
    if "feature" in obj and obj["feature_dim"] < 1:
        fail("empty feature")


def export_predictions(config: AdapterConfig) -> ExportResult:
    """Run the model over every manifest row and write prediction lines.

    Records are written in manifest order, one batch at a time, to a
    temporary file that replaces ``config.out`` only after every record
    validates.
    """
    entries = read_entries(config.manifest, config.view)
    model = load_model(config.model, config.device)
    tap = _FeatureTap(model, config.feature_layer)
    model_id = config.resolved_model_id()
    device = torch.device(config.device)

    out_path = Path(config.out)
    if out_path.parent != Path("."):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = out_path.with_name(out_path.name + ".tmp")
    count = 0
    first_shape = None
    try:
        with open(tmp_path, "w", encoding="utf-8", newline="\n") as fh:
            for start in range(0, len(entries), config.batch_size):
                chunk = entries[start:start + config.batch_size]
                images = []
                for entry in chunk:
                    image = _decode_image(entry.path)
                    if first_shape is None:
                        first_shape = image.shape
                    elif image.shape != first_shape:
                        raise DataError(
                            f"{entry.path} is {image.shape}, but earlier "
                            f"images are {first_shape}; one manifest must "
                            f"hold one image size")
                    images.append(image)
                batch = torch.from_numpy(np.stack(images)) \
                    .permute(0, 3, 1, 2).float().div_(255.0).to(device)
                with torch.inference_mode():
                    logits, feats = tap.run(batch)
                preds = logits.argmax(dim=1)
                for j, entry in enumerate(chunk):
                    obj = _record_obj(
                        model_id, config.view, entry,
                        pred=int(preds[j]),
                        logits=[float(v) for v in logits[j]],
                        feature=None if feats is None else feats[j])
                    _check_record(obj)
                    fh.write(json.dumps(obj, separators=(",", ":")))
                    fh.write("\n")
                    count += 1
        os.replace(tmp_path, out_path)
    finally:
        if tmp_path.exists():
            tmp_path.unlink()
    return ExportResult(out_path=str(out_path), record_count=count,
                        notes=tap.notes)
