"""Double Siamese and Common Edges losses and the training driver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import OptimizerState, Tape, Tensor
from .canny import CannyConfig, canny
from .data import FramePair, SamplerConfig, SiameseSampler
from .generator import GeneratorConfig, GeneratorWeights, build_generator, forward

log = logging.getLogger(__name__)

ARCHITECTURES = ("double_siamese", "common_edges")


class NonFiniteLoss(FloatingPointError):
    def __init__(self, step: int, detail: str):
        super().__init__(f"non-finite loss at step {step}: {detail}")
        self.step = step


@dataclass
class SiameseBatchItem:
    k11: Tensor
    k12: Tensor
    k21: Tensor
    k22: Tensor
    delta: np.ndarray | float


@dataclass
class EdgesBatchItem:
    k1: Tensor
    k2: Tensor
    k_edge: Tensor


@dataclass
class TrainConfig:
    architecture: str = "double_siamese"
    learning_rate: float = 1e-3
    batch_size: int = 8
    steps: int = 500
    p_similar: float = 0.5
    window_k: int = 3
    width: int = 320
    height: int = 160
    encoder_channels: list = field(default_factory=lambda: [16, 32, 64, 128])
    kernel_size: int = 3
    optimizer: str = "adam"
    seed: int = 0
    checkpoint_every: int = 100
    score_polarity: str = "dissimilarity"

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")
        if self.learning_rate < 0 or self.batch_size < 1 or self.steps < 0 or self.checkpoint_every < 1:
            raise ValueError("learning_rate >= 0, batch_size >= 1, steps >= 0, checkpoint_every >= 1 required")
        self.generator_config("image")  # validates the resolution

    def generator_config(self, role: str) -> GeneratorConfig:
        # distinct seeds so the two generators start from different weights
        offset = {"image": 0, "depth": 1}[role]
        return GeneratorConfig(
            input_width=self.width,
            input_height=self.height,
            encoder_channels=tuple(self.encoder_channels),
            kernel_size=self.kernel_size,
            seed=self.seed * 2 + offset,
        )

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(self.p_similar, self.window_k, self.seed, self.score_polarity)

    def to_dict(self) -> dict:
        return asdict(self)


# --- losses -------------------------------------------------------------------


def _as_batched(x) -> Tensor:
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    if t.data.ndim == 2:
        if t.requires_grad:
            raise ValueError("pass batched Nx1xHxW tensors when gradients are needed")
        t = Tensor(t.data[None, None])
    elif t.data.ndim == 3:
        if t.requires_grad:
            raise ValueError("pass batched Nx1xHxW tensors when gradients are needed")
        t = Tensor(t.data[:, None])
    return t


def _check_shapes(*ts: Tensor) -> None:
    shapes = {t.shape for t in ts}
    if len(shapes) != 1:
        raise ValueError(f"CR shapes differ: {sorted(shapes)}")


def double_siamese_loss(item: SiameseBatchItem) -> Tensor:
    """Batch mean of
    ``|k11-k21| + |k12-k22| + abs(|k11-k12| - delta) + abs(|k21-k22| - delta)``
    with ``|.|`` the mean absolute difference per item.
    """
    k11, k12, k21, k22 = (_as_batched(k) for k in (item.k11, item.k12, item.k21, item.k22))
    _check_shapes(k11, k12, k21, k22)
    n = k11.shape[0]
    delta = np.broadcast_to(np.asarray(item.delta, dtype=k11.dtype), (n,)).copy()
    if np.any(delta < 0) or np.any(delta > 1):
        raise ValueError("delta must lie in [0, 1]")
    cross = ad.mean_abs_diff(k11, k21, per_item=True) + ad.mean_abs_diff(k12, k22, per_item=True)
    img_pair = ad.absolute(ad.mean_abs_diff(k11, k12, per_item=True) - delta)
    dep_pair = ad.absolute(ad.mean_abs_diff(k21, k22, per_item=True) - delta)
    return ad.mean(cross + img_pair + dep_pair)


def common_edges_loss(item: EdgesBatchItem) -> Tensor:
    """Batch mean of ``|k1-k2| + |k1-edge| + |k2-edge|`` (mean absolute differences)."""
    k1, k2, ke = (_as_batched(k) for k in (item.k1, item.k2, item.k_edge))
    _check_shapes(k1, k2, ke)
    total = (
        ad.mean_abs_diff(k1, k2, per_item=True)
        + ad.mean_abs_diff(k1, ke, per_item=True)
        + ad.mean_abs_diff(k2, ke, per_item=True)
    )
    return ad.mean(total)


# --- batches --------------------------------------------------------------------


@dataclass
class SiameseBatch:
    img1: np.ndarray
    img2: np.ndarray
    dep1: np.ndarray
    dep2: np.ndarray
    delta: np.ndarray
    indices: list


@dataclass
class EdgesBatch:
    img: np.ndarray
    dep: np.ndarray
    edge: np.ndarray
    indices: list


def step_rng(seed: int, step: int) -> np.random.Generator:
    """Per-step generator; resuming at ``step`` needs no stored RNG state."""
    return np.random.default_rng([seed, step])


def siamese_batch(dataset: list[FramePair], cfg: TrainConfig, step: int, dtype=np.float32) -> SiameseBatch:
    sampler = SiameseSampler(dataset, cfg.sampler_config(), step_rng(cfg.seed, step))
    a, b, d, idx = [], [], [], []
    for _ in range(cfg.batch_size):
        f1, f2, delta = sampler.sample()
        a.append(f1)
        b.append(f2)
        d.append(delta)
        idx.append((f1.index, f2.index))
    return SiameseBatch(
        np.stack([f.gray for f in a]).astype(dtype),
        np.stack([f.gray for f in b]).astype(dtype),
        np.stack([f.depth_gray for f in a]).astype(dtype),
        np.stack([f.depth_gray for f in b]).astype(dtype),
        np.asarray(d, dtype=dtype),
        idx,
    )


def edges_batch(dataset: list[FramePair], edges: list[np.ndarray], cfg: TrainConfig, step: int, dtype=np.float32) -> EdgesBatch:
    rng = step_rng(cfg.seed, step)
    idx = [int(i) for i in rng.integers(len(dataset), size=cfg.batch_size)]
    return EdgesBatch(
        np.stack([dataset[i].gray for i in idx]).astype(dtype),
        np.stack([dataset[i].depth_gray for i in idx]).astype(dtype),
        np.stack([edges[i] for i in idx]).astype(dtype),
        idx,
    )


# --- optimization -----------------------------------------------------------------


@dataclass
class TrainState:
    step: int
    gen_image: GeneratorWeights
    gen_depth: GeneratorWeights
    opt_image: OptimizerState
    opt_depth: OptimizerState
    history: list = field(default_factory=list)


def init_state(cfg: TrainConfig) -> TrainState:
    return TrainState(
        step=0,
        gen_image=build_generator(cfg.generator_config("image")),
        gen_depth=build_generator(cfg.generator_config("depth")),
        opt_image=OptimizerState(cfg.optimizer, cfg.learning_rate),
        opt_depth=OptimizerState(cfg.optimizer, cfg.learning_rate),
    )


def batch_loss(gen_image: GeneratorWeights, gen_depth: GeneratorWeights, batch) -> Tensor:
    """Forward passes plus the architecture's loss (recorded on the active tape)."""
    if isinstance(batch, SiameseBatch):
        item = SiameseBatchItem(
            forward(gen_image, batch.img1),
            forward(gen_image, batch.img2),
            forward(gen_depth, batch.dep1),
            forward(gen_depth, batch.dep2),
            batch.delta,
        )
        return double_siamese_loss(item)
    item = EdgesBatchItem(forward(gen_image, batch.img), forward(gen_depth, batch.dep), Tensor(batch.edge[:, None]))
    return common_edges_loss(item)


def train_step(
    gen_image: GeneratorWeights,
    gen_depth: GeneratorWeights,
    batch,
    opt_image: OptimizerState,
    opt_depth: OptimizerState,
    step: int = 0,
) -> float:
    """One forward/backward/update; updates both generators in place, returns the batch loss."""
    if len(batch.indices) == 0:
        raise ValueError("empty batch")
    with Tape() as tape:
        loss = batch_loss(gen_image, gen_depth, batch)
    value = loss.item()
    if not np.isfinite(value):
        raise NonFiniteLoss(step, f"loss={value}, frames={batch.indices}")
    params_i = gen_image.parameters()
    params_d = gen_depth.parameters()
    for p in params_i + params_d:
        p.zero_grad()
    ad.backward(loss, tape)
    try:
        ad.optimizer_step(opt_image, params_i)
        ad.optimizer_step(opt_depth, params_d)
    except FloatingPointError as exc:
        raise NonFiniteLoss(step, f"{exc}; frames={batch.indices}") from exc
    return value


def make_batch(cfg: TrainConfig, dataset, edges, step: int):
    if cfg.architecture == "double_siamese":
        return siamese_batch(dataset, cfg, step)
    return edges_batch(dataset, edges, cfg, step)


def edge_maps(dataset: list[FramePair], canny_cfg: CannyConfig | None = None) -> list[np.ndarray]:
    return [canny(f.gray, canny_cfg) for f in dataset]


def train_loop(
    cfg: TrainConfig,
    dataset: list[FramePair],
    state: TrainState | None = None,
    canny_cfg: CannyConfig | None = None,
    on_checkpoint: Callable[[TrainState], None] | None = None,
    on_step: Callable[[TrainState, object], None] | None = None,
) -> TrainState:
    """Run training until ``cfg.steps`` total steps have been taken.

    Passing a previously saved ``state`` resumes from its step count.
    ``on_checkpoint`` is called every ``cfg.checkpoint_every`` steps and after
    the final step.
    """
    if cfg.architecture == "double_siamese" and len(dataset) <= 2 * cfg.window_k:
        raise ValueError(f"dataset has {len(dataset)} frames; need more than {2 * cfg.window_k}")
    if not dataset:
        raise ValueError("empty dataset")
    state = state or init_state(cfg)
    edges = edge_maps(dataset, canny_cfg) if cfg.architecture == "common_edges" else None
    while state.step < cfg.steps:
        batch = make_batch(cfg, dataset, edges, state.step)
        loss = train_step(state.gen_image, state.gen_depth, batch, state.opt_image, state.opt_depth, state.step)
        state.history.append(loss)
        state.step += 1
        if on_step is not None:
            on_step(state, batch)
        if state.step % 50 == 0:
            log.info("step %d loss %.5f", state.step, loss)
        if on_checkpoint is not None and (state.step % cfg.checkpoint_every == 0 or state.step == cfg.steps):
            on_checkpoint(state)
    return state


def write_loss_csv(path, history: list[float]) -> None:
    lines = ["step,loss"] + [f"{i},{v!r}" for i, v in enumerate(history)]
    Path(path).write_text("\n".join(lines) + "\n")
