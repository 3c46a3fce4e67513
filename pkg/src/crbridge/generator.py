"""Encoder-decoder CR generator built from the autodiff primitives.

Encoder: per level ``conv -> activation -> maxpool``.
Decoder: per level ``upsample -> conv -> activation``, mirroring the encoder
channel widths, followed by a 1-channel conv head and a sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

DEFAULT_CHANNELS = (16, 32, 64, 128)


@dataclass(frozen=True)
class GeneratorConfig:
    input_width: int = 320
    input_height: int = 160
    encoder_channels: tuple[int, ...] = DEFAULT_CHANNELS
    kernel_size: int = 3
    activation: str = "leaky_relu"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "encoder_channels", tuple(int(c) for c in self.encoder_channels))
        if not self.encoder_channels or any(c < 1 for c in self.encoder_channels):
            raise ValueError("encoder_channels must be a non-empty list of positive ints")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.activation not in ("leaky_relu", "sigmoid"):
            raise ValueError(f"unknown activation {self.activation!r}")
        div = 2 ** len(self.encoder_channels)
        if self.input_width % div or self.input_height % div:
            raise ValueError(
                f"input {self.input_width}x{self.input_height} must be divisible by "
                f"2^{len(self.encoder_channels)} = {div} in both dimensions"
            )

    @property
    def depth(self) -> int:
        return len(self.encoder_channels)

    @property
    def bottleneck_shape(self) -> tuple[int, int]:
        div = 2**self.depth
        return self.input_height // div, self.input_width // div

    def layer_shapes(self) -> list[tuple[str, int, int]]:
        """(name, in_channels, out_channels) for every conv layer in order."""
        chans = self.encoder_channels
        shapes = []
        c_in = 1
        for i, c in enumerate(chans):
            shapes.append((f"enc{i}", c_in, c))
            c_in = c
        # decoder level i restores the width of encoder level depth-2-i; the
        # last level keeps the first encoder width
        dec_out = list(reversed(chans[:-1])) + [chans[0]]
        for i, c in enumerate(dec_out):
            shapes.append((f"dec{i}", c_in, c))
            c_in = c
        shapes.append(("head", c_in, 1))
        return shapes

    def to_dict(self) -> dict:
        return {
            "input_width": self.input_width,
            "input_height": self.input_height,
            "encoder_channels": list(self.encoder_channels),
            "kernel_size": self.kernel_size,
            "activation": self.activation,
            "seed": self.seed,
        }


@dataclass
class GeneratorWeights:
    config: GeneratorConfig
    layers: list[tuple[str, Tensor, Tensor]] = field(default_factory=list)

    def parameters(self) -> list[Tensor]:
        params = []
        for _, k, b in self.layers:
            params.extend((k, b))
        return params

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "GeneratorWeights":
        layers = [
            (name, Tensor(k.data.copy(), requires_grad=k.requires_grad), Tensor(b.data.copy(), requires_grad=b.requires_grad))
            for name, k, b in self.layers
        ]
        return GeneratorWeights(self.config, layers)

    def astype(self, dtype) -> "GeneratorWeights":
        layers = [
            (name, Tensor(k.data.astype(dtype), requires_grad=True), Tensor(b.data.astype(dtype), requires_grad=True))
            for name, k, b in self.layers
        ]
        return GeneratorWeights(self.config, layers)

    @property
    def dtype(self):
        return self.layers[0][1].dtype


def build_generator(config: GeneratorConfig, dtype=np.float32) -> GeneratorWeights:
    rng = np.random.default_rng(config.seed)
    k = config.kernel_size
    layers = []
    for name, c_in, c_out in config.layer_shapes():
        kern = ad.he_uniform(rng, (c_out, c_in, k, k), dtype=dtype)
        bias = np.zeros(c_out, dtype=dtype)
        layers.append((name, Tensor(kern, requires_grad=True), Tensor(bias, requires_grad=True)))
    return GeneratorWeights(config, layers)


def _as_input(weights: GeneratorWeights, image) -> Tensor:
    if isinstance(image, Tensor):
        x = image
    else:
        arr = np.asarray(image, dtype=weights.dtype)
        if arr.ndim == 2:
            arr = arr[None, None]
        elif arr.ndim == 3:
            arr = arr[:, None]
        x = Tensor(arr)
    if x.data.ndim == 3:
        x = Tensor(x.data[None]) if not x.requires_grad else x
    cfg = weights.config
    expected = (1, cfg.input_height, cfg.input_width)
    if tuple(x.shape[-3:]) != expected:
        raise ValueError(
            f"generator expects 1x{cfg.input_height}x{cfg.input_width} input, got {tuple(x.shape)}"
        )
    return x


def forward(weights: GeneratorWeights, image) -> Tensor:
    """Run the generator on one image or a batch.

    ``image`` may be an HxW array, an NxHxW array, or a Tensor shaped
    1xHxW / Nx1xHxW. The result is a Tensor shaped like the batched input
    (Nx1xHxW), with values in (0, 1).
    """
    cfg = weights.config
    x = _as_input(weights, image)
    depth = cfg.depth
    layers = weights.layers
    for i in range(depth):
        _, k, b = layers[i]
        x = ad.maxpool2x2(ad.activation(ad.conv2d(x, k, b), cfg.activation))
    for i in range(depth):
        _, k, b = layers[depth + i]
        x = ad.activation(ad.conv2d(ad.upsample2x_nearest(x), k, b), cfg.activation)
    _, k, b = layers[-1]
    return ad.sigmoid(ad.conv2d(x, k, b))


def infer(weights: GeneratorWeights, image: np.ndarray) -> np.ndarray:
    """Forward without recording; returns an HxW (or NxHxW) array."""
    squeeze = np.asarray(image).ndim == 2
    with ad.no_grad():
        out = forward(weights, np.asarray(image)).data[:, 0]
    return out[0] if squeeze else out
