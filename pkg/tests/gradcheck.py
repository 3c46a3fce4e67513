"""Finite-difference gradient checks for primitives and the two training losses.

Each check returns ``(max_rel_error, excluded, total)`` where ``excluded``
counts coordinates whose difference stencil straddles a kink even at the
fallback step (see ``oracles.kink_aware_diff``).
"""

from __future__ import annotations

import numpy as np

from crbridge import autodiff as ad
from crbridge.autodiff import Tape, Tensor
from crbridge.generator import GeneratorConfig, build_generator, forward
from crbridge.training import (
    EdgesBatch,
    EdgesBatchItem,
    SiameseBatch,
    SiameseBatchItem,
    batch_loss,
    common_edges_loss,
    double_siamese_loss,
)

from oracles import kink_aware_diff, max_rel_error

H = 1e-4
GRAD_WIDTH, GRAD_HEIGHT = 16, 8
GRAD_CHANNELS = (2, 2)


def _projected(out: Tensor, weights: np.ndarray) -> Tensor:
    # random linear functional so every output element carries gradient
    return ad.mean(ad.mul(out, Tensor(weights)))


def _check(build, leaves):
    """``build()`` returns the scalar loss; ``leaves`` are the Tensors to check."""
    with Tape() as tape:
        loss = build()
    for t in leaves:
        t.grad = None
    ad.backward(loss, tape)
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in leaves]

    def fn():
        with Tape() as t:
            value = build()
        return value.item(), t

    numeric, masks = kink_aware_diff(fn, [t.data for t in leaves], H)
    total = sum(m.size for m in masks)
    excluded = total - sum(int(m.sum()) for m in masks)
    return max_rel_error(analytic, numeric, masks), excluded, total


def primitive_cases(rng):
    """(name, build, leaves) for every differentiable primitive."""
    cases = []

    def leaf(*shape, scale=1.0):
        return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)

    x = leaf(2, 3, 6, 4)
    w = leaf(4, 3, 3, 3, scale=0.5)
    b = leaf(4)
    r = rng.standard_normal((2, 4, 6, 4))
    cases.append(("conv2d", lambda: _projected(ad.conv2d(x, w, b), r), [x, w, b]))

    x5 = leaf(1, 2, 4, 4)
    w5 = leaf(3, 2, 5, 5, scale=0.3)
    b5 = leaf(3)
    r5 = rng.standard_normal((1, 3, 4, 4))
    cases.append(("conv2d_k5", lambda: _projected(ad.conv2d(x5, w5, b5), r5), [x5, w5, b5]))

    a = leaf(2, 1, 4, 6)
    ra = rng.standard_normal(a.shape)
    cases.append(("leaky_relu", lambda: _projected(ad.leaky_relu(a), ra), [a]))
    cases.append(("sigmoid", lambda: _projected(ad.sigmoid(a), ra), [a]))
    cases.append(("absolute", lambda: _projected(ad.absolute(a), ra), [a]))

    p = leaf(2, 2, 4, 6)
    rp = rng.standard_normal((2, 2, 2, 3))
    cases.append(("maxpool2x2", lambda: _projected(ad.maxpool2x2(p), rp), [p]))

    u = leaf(1, 2, 3, 2)
    ru = rng.standard_normal((1, 2, 6, 4))
    cases.append(("upsample2x_nearest", lambda: _projected(ad.upsample2x_nearest(u), ru), [u]))

    m1, m2 = leaf(3, 1, 4, 4), leaf(3, 1, 4, 4)
    rm = rng.standard_normal(3)
    cases.append(("mean_abs_diff", lambda: ad.mean_abs_diff(m1, m2), [m1, m2]))
    cases.append(("mean_abs_diff_per_item", lambda: _projected(ad.mean_abs_diff(m1, m2, per_item=True), rm), [m1, m2]))

    s1, s2 = leaf(2, 3, 4), leaf(3, 1)
    rs = rng.standard_normal((2, 3, 4))
    cases.append(("add_broadcast", lambda: _projected(ad.add(s1, s2), rs), [s1, s2]))
    cases.append(("sub_broadcast", lambda: _projected(ad.sub(s1, s2), rs), [s1, s2]))
    cases.append(("mul_broadcast", lambda: _projected(ad.mul(s1, s2), rs), [s1, s2]))
    cases.append(("mean", lambda: ad.mean(ad.mul(s1, s1)), [s1]))
    return cases


def check_primitives(seed: int) -> dict[str, tuple[float, int, int]]:
    rng = np.random.default_rng(seed)
    return {name: _check(build, leaves) for name, build, leaves in primitive_cases(rng)}


def _generators(seed, channels):
    cfg_i = GeneratorConfig(GRAD_WIDTH, GRAD_HEIGHT, channels, seed=2 * seed)
    cfg_d = GeneratorConfig(GRAD_WIDTH, GRAD_HEIGHT, channels, seed=2 * seed + 1)
    return build_generator(cfg_i, np.float64), build_generator(cfg_d, np.float64)


def _split(t: np.ndarray):
    # fresh leaves so the loss's own kinks are recorded alongside the generator's
    return [Tensor(t[i : i + 1], requires_grad=True) for i in range(t.shape[0])]


def _per_generator_fd(gen_i, gen_d, inputs_i, inputs_d, loss_from_outputs):
    """FD over each generator's parameters while the other generator's output is held fixed."""
    with ad.no_grad():
        fixed_i = forward(gen_i, inputs_i).data
        fixed_d = forward(gen_d, inputs_d).data
    numeric, masks = [], []
    for gen, inputs, role in ((gen_i, inputs_i, "image"), (gen_d, inputs_d, "depth")):

        def fn():
            with Tape() as t:
                out = forward(gen, inputs)
                live = _split(out.data)
                # generator ops are recorded because its parameters require grad
                outs_i = live if role == "image" else _split(fixed_i)
                outs_d = live if role == "depth" else _split(fixed_d)
                value = loss_from_outputs(outs_i, outs_d)
            return value.item(), t

        params = gen.parameters()
        n, m = kink_aware_diff(fn, [p.data for p in params], H)
        numeric += n
        masks += m
    return numeric, masks


def check_double_siamese(seed: int, channels=GRAD_CHANNELS):
    gen_i, gen_d = _generators(seed, channels)
    rng = np.random.default_rng(10_000 + seed)
    img = rng.random((2, GRAD_HEIGHT, GRAD_WIDTH))
    dep = rng.random((2, GRAD_HEIGHT, GRAD_WIDTH))
    delta = rng.random(1)
    batch = SiameseBatch(img[0:1], img[1:2], dep[0:1], dep[1:2], delta, [(0, 1)])
    params = gen_i.parameters() + gen_d.parameters()
    with Tape() as tape:
        loss = batch_loss(gen_i, gen_d, batch)
    for p in params:
        p.grad = None
    ad.backward(loss, tape)
    analytic = [p.grad for p in params]

    def loss_from(outs_i, outs_d):
        return double_siamese_loss(SiameseBatchItem(outs_i[0], outs_i[1], outs_d[0], outs_d[1], delta))

    numeric, masks = _per_generator_fd(gen_i, gen_d, img[:, None], dep[:, None], loss_from)
    total = sum(m.size for m in masks)
    return max_rel_error(analytic, numeric, masks), total - sum(int(m.sum()) for m in masks), total


def check_common_edges(seed: int, channels=GRAD_CHANNELS):
    gen_i, gen_d = _generators(seed, channels)
    rng = np.random.default_rng(20_000 + seed)
    img = rng.random((1, GRAD_HEIGHT, GRAD_WIDTH))
    dep = rng.random((1, GRAD_HEIGHT, GRAD_WIDTH))
    edge = (rng.random((1, GRAD_HEIGHT, GRAD_WIDTH)) < 0.2).astype(np.float64)
    batch = EdgesBatch(img, dep, edge, [0])
    params = gen_i.parameters() + gen_d.parameters()
    with Tape() as tape:
        loss = batch_loss(gen_i, gen_d, batch)
    for p in params:
        p.grad = None
    ad.backward(loss, tape)
    analytic = [p.grad for p in params]
    ke = Tensor(edge[:, None])

    def loss_from(outs_i, outs_d):
        return common_edges_loss(EdgesBatchItem(outs_i[0], outs_d[0], ke))

    numeric, masks = _per_generator_fd(gen_i, gen_d, img[:, None], dep[:, None], loss_from)
    total = sum(m.size for m in masks)
    return max_rel_error(analytic, numeric, masks), total - sum(int(m.sum()) for m in masks), total
