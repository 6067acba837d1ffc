"""Image encoders: published checkpoints plus a procedural test family.

The five benchmark checkpoints load through torch/transformers when
those are installed and the weights are reachable; each entry records
its published preprocessing recipe so the bank sidecar can carry it
verbatim. The ``patchproj-<dim>`` family is a deterministic,
dependency-light encoder (pooled 16x16 patches through a fixed seeded
projection) for pipeline tests and offline use: any
compatible-checkpoint consumer sees the same interface.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable

import numpy as np
from PIL import Image

PATCH = 16
SIDE = 224


@dataclass(frozen=True)
class EncoderInfo:
    model_id: str
    dim: int
    preprocessing: str
    pooling: str


class Encoder:
    """Batched image -> embedding mapper."""

    def __init__(self, info: EncoderInfo, fn: Callable[[list[Image.Image]], np.ndarray]):
        self.info = info
        self._fn = fn

    def encode(self, images: list[Image.Image]) -> np.ndarray:
        out = np.asarray(self._fn(images), dtype=np.float32)
        if out.ndim != 2 or out.shape[1] != self.info.dim:
            raise ValueError(
                f"{self.info.model_id}: encoder yielded width {out.shape[-1]}, "
                f"checkpoint declares {self.info.dim}"
            )
        return out


# Published checkpoints: model id -> (embedding width, hub name, pooling).
HUB_CHECKPOINTS = {
    "clip-vit-l14": (768, "openai/clip-vit-large-patch14", "image_features"),
    "siglip-vit-b16": (768, "google/siglip-base-patch16-224", "image_features"),
    "dinov2-vit-g14": (1536, "facebook/dinov2-giant", "cls_token"),
    "dinov3-vit-hplus16": (1280, "facebook/dinov3-vith16plus-pretrain-lvd1689m", "cls_token"),
    "bioclip-2": (768, "imageomics/bioclip-2", "image_features"),
}


def _patchproj_matrix(model_id: str, dim: int) -> np.ndarray:
    """Fixed projection keyed by the model name alone."""
    key = int.from_bytes(
        hashlib.sha256(model_id.encode("utf-8")).digest()[:16], "little"
    )
    g = np.random.Generator(np.random.Philox(key=key))
    n_features = (SIDE // PATCH) ** 2 * 3
    w = g.normal(size=(n_features, dim)).astype(np.float32)
    return w / np.sqrt(n_features)


def _patchproj_features(images: list[Image.Image]) -> np.ndarray:
    feats = []
    for img in images:
        arr = np.asarray(
            img.convert("RGB").resize((SIDE, SIDE), Image.Resampling.BICUBIC),
            dtype=np.float32,
        )
        arr = (arr / 255.0 - 0.5) / 0.5
        grid = arr.reshape(SIDE // PATCH, PATCH, SIDE // PATCH, PATCH, 3)
        pooled = grid.mean(axis=(1, 3))
        feats.append(pooled.reshape(-1))
    return np.stack(feats)


def _make_patchproj(model_id: str, dim: int) -> Encoder:
    w = _patchproj_matrix(model_id, dim)
    info = EncoderInfo(
        model_id=model_id,
        dim=dim,
        preprocessing=(
            f"RGB, bicubic resize {SIDE}x{SIDE}, scale 1/255, "
            f"normalize mean 0.5 std 0.5, {PATCH}x{PATCH} patch mean-pool"
        ),
        pooling="patch-mean + fixed seeded projection, L2 normalized",
    )

    def fn(images: list[Image.Image]) -> np.ndarray:
        feats = _patchproj_features(images)
        out = feats @ w
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        return out / np.maximum(norms, 1e-12)

    return Encoder(info, fn)


def _make_hub(model_id: str) -> Encoder:
    dim, hub_name, pooling = HUB_CHECKPOINTS[model_id]
    try:
        import torch
        from transformers import AutoImageProcessor, AutoModel, AutoProcessor
    except ImportError as exc:
        raise RuntimeError(
            f"{model_id} needs the optional torch/transformers extra"
        ) from exc

    if pooling == "image_features":
        processor = AutoProcessor.from_pretrained(hub_name)
        model = AutoModel.from_pretrained(hub_name)
    else:
        processor = AutoImageProcessor.from_pretrained(hub_name)
        model = AutoModel.from_pretrained(hub_name)
    model.eval()

    def fn(images: list[Image.Image]) -> np.ndarray:
        with torch.no_grad():
            inputs = processor(
                images=[img.convert("RGB") for img in images], return_tensors="pt"
            )
            if pooling == "image_features":
                feats = model.get_image_features(**inputs)
            else:
                feats = model(**inputs).last_hidden_state[:, 0]
        return feats.cpu().numpy()

    info = EncoderInfo(
        model_id=model_id,
        dim=dim,
        preprocessing=f"published inference transform of {hub_name}",
        pooling=pooling,
    )
    return Encoder(info, fn)


def load_encoder(model_id: str) -> Encoder:
    """Resolve a model id to an encoder.

    ``patchproj-<dim>`` builds the procedural encoder at that width;
    the five published checkpoints load from the hub.
    """
    if model_id.startswith("patchproj-"):
        try:
            dim = int(model_id.split("-", 1)[1])
        except ValueError as exc:
            raise ValueError(f"bad patchproj width in {model_id!r}") from exc
        if dim < 1:
            raise ValueError(f"bad patchproj width in {model_id!r}")
        return _make_patchproj(model_id, dim)
    if model_id in HUB_CHECKPOINTS:
        return _make_hub(model_id)
    raise ValueError(
        f"unknown model {model_id!r}; choose one of "
        f"{sorted(HUB_CHECKPOINTS)} or patchproj-<dim>"
    )
