"""Image-classification backbones for per-frame embeddings."""

from __future__ import annotations

import numpy as np
import torch
from torchvision import models
from torchvision.models.feature_extraction import create_feature_extractor

from . import ExtractionError

_IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


class TorchBackbone:
    """Embeds RGB frames with a named layer of a torchvision model.

    `weights` is either a checkpoint path or "none" for a seeded random
    initialization (deterministic; useful where no checkpoint is available).
    Inference runs single-threaded in eval mode so repeated extraction of the
    same clip is bit-identical.
    """

    def __init__(self, arch: str = "alexnet", layer: str = "classifier.6",
                 weights: str = "none", seed: int = 0, input_size: int = 224):
        torch.set_num_threads(1)
        torch.manual_seed(seed)
        try:
            model = models.get_model(arch, weights=None)
        except ValueError as exc:
            raise ExtractionError(f"unknown architecture {arch!r}: {exc}") from None
        if weights != "none":
            state = torch.load(weights, map_location="cpu", weights_only=True)
            model.load_state_dict(state)
        model.eval()
        try:
            self._extractor = create_feature_extractor(model, {layer: "out"})
        except ValueError as exc:
            raise ExtractionError(f"layer {layer!r} not found in {arch}: {exc}") from None
        self.arch = arch
        self.layer = layer
        self.input_size = input_size
        self.width = self._probe_width()

    def _probe_width(self) -> int:
        with torch.no_grad():
            out = self._extractor(torch.zeros(1, 3, self.input_size, self.input_size))
        return int(out["out"].reshape(1, -1).shape[1])

    def embed(self, frames: np.ndarray) -> np.ndarray:
        """frames: N x H x W x 3 uint8 RGB -> N x width float64, rectified.

        Negative activations are clamped at zero to satisfy the pipeline's
        non-negativity invariant.
        """
        if frames.ndim != 4 or frames.shape[3] != 3:
            raise ExtractionError(f"expected N x H x W x 3 frames, got {frames.shape}")
        x = frames.astype(np.float32) / 255.0
        x = (x - _IMAGENET_MEAN) / _IMAGENET_STD
        batch = torch.from_numpy(x.transpose(0, 3, 1, 2)).contiguous()
        with torch.no_grad():
            out = self._extractor(batch)["out"]
        flat = out.reshape(out.shape[0], -1).clamp_(min=0)
        return flat.double().numpy()
