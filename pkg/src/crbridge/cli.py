"""Command-line entry points.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure,
4 corrupt artifact.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .canny import CannyConfig, canny
from .config import ConfigError, load_config
from .data import (
    DEFAULT_MAX_RANGE,
    CameraIntrinsics,
    DatasetManifest,
    FramePair,
    load_dataset,
    normalize_depth,
    read_depth_pgm,
    read_gray_pgm,
    read_pgm,
    resize_bilinear,
    save_dataset,
    write_pgm,
)
from .evaluation import evaluate_pairs, read_reports, write_reports
from .generator import infer
from .synth import generate_sequence
from .training import NonFiniteLoss, TrainState, train_loop, write_loss_csv

log = logging.getLogger("crbridge")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CORRUPT = 0, 2, 3, 4


class CommandError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _thread_limit():
    value = os.environ.get("CRBRIDGE_THREADS")
    if not value:
        return nullcontext()
    try:
        n = int(value)
    except ValueError:
        raise CommandError(f"CRBRIDGE_THREADS must be an integer, got {value!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(n, 1))


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


# --- generate-data ------------------------------------------------------------


def cmd_generate_data(args) -> int:
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise CommandError(f"cannot write to {out}: {exc}")
    if args.frames < 0:
        raise CommandError("--frames must be >= 0")
    intr = CameraIntrinsics.default(args.width, args.height)
    frames = generate_sequence(args.seed, args.frames, intr)
    manifest = DatasetManifest(args.seed, args.frames, intr, DEFAULT_MAX_RANGE, {"generator": "box-world"})
    save_dataset(out, frames, manifest)
    log.info("wrote %d frames to %s", args.frames, out)
    return EXIT_OK


# --- train --------------------------------------------------------------------


def _fit_frames(frames: list[FramePair], width: int, height: int) -> list[FramePair]:
    if not frames or frames[0].gray.shape == (height, width):
        return frames
    log.info("resizing frames %s -> %dx%d", frames[0].gray.shape[::-1], width, height)
    return [
        FramePair(f.index, resize_bilinear(f.gray, width, height), resize_bilinear(f.depth_gray, width, height))
        for f in frames
    ]


def _load_frames(data_dir) -> list[FramePair]:
    try:
        frames, _ = load_dataset(data_dir)
    except (FileNotFoundError, ValueError) as exc:
        raise CommandError(f"cannot load dataset: {exc}")
    return frames


def _latest_state(ck_dir: Path) -> int | None:
    steps = [int(m.group(1)) for p in ck_dir.glob("state_*.crs") if (m := re.fullmatch(r"state_(\d+)\.crs", p.name))]
    return max(steps) if steps else None


def cmd_train(args) -> int:
    try:
        run = load_config(args.config)
    except (ConfigError, OSError) as exc:
        raise CommandError(str(exc))
    cfg = run.train
    frames = _fit_frames(_load_frames(args.data_dir), cfg.width, cfg.height)
    out = Path(args.out_dir)
    ck_dir = out / "checkpoints"
    ck_dir.mkdir(parents=True, exist_ok=True)

    state = None
    if args.resume:
        step = _latest_state(ck_dir)
        if step is not None:
            try:
                gi, _ = ckpt.load_weights(ck_dir / f"image_{step:06d}.crw")
                gd, _ = ckpt.load_weights(ck_dir / f"depth_{step:06d}.crw")
                s, history, opts = ckpt.load_optimizer_state(ck_dir / f"state_{step:06d}.crs")
            except ckpt.CorruptCheckpoint as exc:
                raise CommandError(f"corrupt checkpoint: {exc}", EXIT_CORRUPT)
            state = TrainState(s, gi, gd, opts["image"], opts["depth"], history)
            log.info("resuming from step %d", s)

    def save(st: TrainState) -> None:
        tag = f"{st.step:06d}"
        _atomic_write(ck_dir / f"image_{tag}.crw", ckpt.encode_weights(st.gen_image, "image"))
        _atomic_write(ck_dir / f"depth_{tag}.crw", ckpt.encode_weights(st.gen_depth, "depth"))
        tmp = ck_dir / f"state_{tag}.crs.tmp"
        ckpt.save_optimizer_state(tmp, st.step, st.history, {"image": st.opt_image, "depth": st.opt_depth})
        os.replace(tmp, ck_dir / f"state_{tag}.crs")
        write_loss_csv(out / "loss.csv", st.history)

    try:
        state = train_loop(cfg, frames, state, run.canny, on_checkpoint=save)
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        raise CommandError(str(exc))
    _atomic_write(out / "image.crw", ckpt.encode_weights(state.gen_image, "image"))
    _atomic_write(out / "depth.crw", ckpt.encode_weights(state.gen_depth, "depth"))
    write_loss_csv(out / "loss.csv", state.history)
    return EXIT_OK


# --- infer --------------------------------------------------------------------


def _load_checkpoint(path):
    if path is None or not Path(path).is_file():
        raise CommandError(f"checkpoint not found: {path}")
    try:
        return ckpt.load_weights(path)
    except ckpt.CorruptCheckpoint as exc:
        raise CommandError(f"corrupt checkpoint: {exc}", EXIT_CORRUPT)


def cmd_infer(args) -> int:
    weights, role = _load_checkpoint(args.checkpoint)
    if role != args.kind:
        raise CommandError(f"checkpoint is a {role} generator but --kind is {args.kind}")
    try:
        if args.kind == "image":
            img = read_gray_pgm(args.input)
        else:
            img = normalize_depth(read_depth_pgm(args.input), args.max_range)
    except (OSError, ValueError) as exc:
        raise CommandError(f"cannot read input: {exc}")
    cfg = weights.config
    if img.shape != (cfg.input_height, cfg.input_width):
        raise CommandError(
            f"input is {img.shape[1]}x{img.shape[0]}, checkpoint expects {cfg.input_width}x{cfg.input_height}"
        )
    cr = infer(weights, img)
    write_pgm(args.output, np.round(cr.astype(np.float64) * 255.0).astype(np.uint8), 255)
    return EXIT_OK


# --- eval ---------------------------------------------------------------------


_EVAL_KWARGS = {
    "max_keypoints": "max_keypoints",
    "max_match_distance": "max_distance",
    "ransac_iterations": "iterations",
    "inlier_px": "inlier_px",
}


def cmd_eval(args) -> int:
    settings = {}
    if args.config:
        try:
            settings = load_config(args.config).eval
        except (ConfigError, OSError) as exc:
            raise CommandError(str(exc))
    pairs = args.pairs if args.pairs is not None else settings.get("pairs", 100)
    mode = args.mode or settings.get("mode", "raw")
    match_kwargs = {_EVAL_KWARGS[k]: v for k, v in settings.items() if k in _EVAL_KWARGS}
    frames = _load_frames(args.data_dir)
    wi = wd = None
    if mode in ("image_cr", "cross_cr"):
        wi, role = _load_checkpoint(args.checkpoint_image)
        if role != "image":
            raise CommandError("--checkpoint-image holds a depth generator")
    if mode in ("depth_cr", "cross_cr"):
        wd, role = _load_checkpoint(args.checkpoint_depth)
        if role != "depth":
            raise CommandError("--checkpoint-depth holds an image generator")
    ref = wi or wd
    if ref is not None:
        frames = _fit_frames(frames, ref.config.input_width, ref.config.input_height)
    if args.step < 0:
        raise CommandError("--step must be >= 0")
    if pairs < 1 or len(frames) < pairs + args.step:
        raise CommandError(f"need {pairs + args.step} frames for {pairs} pairs, dataset has {len(frames)}")
    baseline = None
    if args.baseline:
        try:
            baseline = read_reports(args.baseline)[0]
        except (OSError, KeyError, IndexError, ValueError) as exc:
            raise CommandError(f"cannot read baseline report: {exc}")
    report = evaluate_pairs(
        frames,
        mode,
        wi,
        wd,
        n_pairs=pairs,
        step=args.step,
        baseline=baseline,
        condition=args.condition or mode,
        seed=args.seed,
        **match_kwargs,
    )
    write_reports(args.output, [report])
    return EXIT_OK


# --- edges --------------------------------------------------------------------


def cmd_edges(args) -> int:
    try:
        cfg = CannyConfig(args.sigma, args.low, args.high)
    except ValueError as exc:
        raise CommandError(str(exc))
    try:
        arr, maxval = read_pgm(args.input)
    except (OSError, ValueError) as exc:
        raise CommandError(f"cannot read input: {exc}")
    edges = canny(arr.astype(np.float64) / maxval, cfg)
    write_pgm(args.output, (edges * 255).astype(np.uint8), 255)
    return EXIT_OK


# --- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crbridge", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-data", help="render a synthetic camera/LiDAR sequence")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--frames", type=int, required=True)
    g.add_argument("--out-dir", required=True)
    g.add_argument("--width", type=int, default=320)
    g.add_argument("--height", type=int, default=160)
    g.set_defaults(func=cmd_generate_data)

    t = sub.add_parser("train", help="train the image and depth CR generators")
    t.add_argument("--config", required=True)
    t.add_argument("--data-dir", required=True)
    t.add_argument("--out-dir", required=True)
    t.add_argument("--resume", action="store_true", help="continue from the latest checkpoint in --out-dir")
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("infer", help="compute the CR of one image")
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--input", required=True)
    i.add_argument("--output", required=True)
    i.add_argument("--kind", choices=("image", "depth"), default="image")
    i.add_argument("--max-range", type=float, default=DEFAULT_MAX_RANGE)
    i.set_defaults(func=cmd_infer)

    e = sub.add_parser("eval", help="feature-matching evaluation over consecutive frame pairs")
    e.add_argument("--data-dir", required=True)
    e.add_argument("--pairs", type=int, help="number of frame pairs (default 100)")
    e.add_argument("--mode", choices=("raw", "image_cr", "depth_cr", "cross_cr"), help="default raw")
    e.add_argument("--config", help="run config whose eval section sets matcher parameters")
    e.add_argument("--checkpoint-image")
    e.add_argument("--checkpoint-depth")
    e.add_argument("--baseline", help="report CSV whose distance normalizes this run")
    e.add_argument("--output", required=True)
    e.add_argument("--step", type=int, default=1, help="frame offset between paired frames (0 = self)")
    e.add_argument("--condition", help="label for the report row")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("edges", help="Canny edge image of a PGM")
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    d.add_argument("--low", type=float, default=0.05)
    d.add_argument("--high", type=float, default=0.15)
    d.add_argument("--sigma", type=float, default=1.4)
    d.set_defaults(func=cmd_edges)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
