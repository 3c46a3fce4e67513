import json
import os

import numpy as np
import pytest

from crbridge import cli
from crbridge.canny import CannyConfig, canny
from crbridge.checkpoint import load_weights, save_weights
from crbridge.data import load_dataset, read_gray_pgm, read_pgm, write_gray_pgm
from crbridge.evaluation import read_reports
from crbridge.generator import GeneratorConfig, build_generator, forward

TINY_TRAIN = {
    "train": {"steps": 1, "width": 32, "height": 16, "encoder_channels": [2, 4], "batch_size": 2},
    "sampler": {"window_k": 2},
}


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    assert run("generate-data", "--frames", 12, "--width", 32, "--height", 16, "--seed", 4, "--out-dir", root) == 0
    return root


@pytest.fixture
def config(tmp_path):
    def write(doc):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc))
        return path

    return write


@pytest.fixture(scope="module")
def image_ckpt(tmp_path_factory):
    path = tmp_path_factory.mktemp("ck") / "image.crw"
    save_weights(path, build_generator(GeneratorConfig(32, 16, (2, 4), seed=1)), "image")
    return path


# --- generate-data ------------------------------------------------------------------


def test_zero_frames_writes_manifest_only(tmp_path):
    assert run("generate-data", "--frames", 0, "--out-dir", tmp_path / "d") == 0
    assert sorted(p.name for p in (tmp_path / "d").iterdir()) == ["manifest.json"]
    manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
    assert manifest["seed"] == 0


def test_generated_data_reloads(data_dir):
    frames, manifest = load_dataset(data_dir)
    assert len(frames) == 12 and manifest.seed == 4
    assert frames[0].gray.shape == (16, 32)


def test_unwritable_out_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run("generate-data", "--frames", 1, "--out-dir", blocker / "sub") == 2


def test_negative_frames(tmp_path):
    assert run("generate-data", "--frames", -1, "--out-dir", tmp_path) == 2


def test_usage_errors():
    assert run() == 2
    assert run("nonsense") == 2
    assert run("edges", "--input", "x") == 2


# --- train ----------------------------------------------------------------------------


def test_one_step_run_writes_checkpoint(tmp_path, data_dir, config):
    out = tmp_path / "run"
    assert run("train", "--config", config(TINY_TRAIN), "--data-dir", data_dir, "--out-dir", out) == 0
    names = sorted(p.name for p in (out / "checkpoints").iterdir())
    assert names == ["depth_000001.crw", "image_000001.crw", "state_000001.crs"]
    assert (out / "loss.csv").read_text().startswith("step,loss\n0,")
    assert load_weights(out / "image.crw")[1] == "image"


def test_invalid_config_exit_2(tmp_path, data_dir, config, capsys):
    assert run("train", "--config", config({"train": {"stepz": 1}}), "--data-dir", data_dir, "--out-dir", tmp_path) == 2
    assert "stepz" in capsys.readouterr().err


def test_missing_dataset_exit_2(tmp_path, config):
    assert run("train", "--config", config(TINY_TRAIN), "--data-dir", tmp_path / "none", "--out-dir", tmp_path) == 2


def test_non_finite_loss_exit_3(tmp_path, data_dir, config, capsys):
    doc = json.loads(json.dumps(TINY_TRAIN))
    doc["train"].update(steps=5, learning_rate=1e38, optimizer="sgd")
    with np.errstate(all="ignore"):
        assert run("train", "--config", config(doc), "--data-dir", data_dir, "--out-dir", tmp_path / "o") == 3
    assert "non-finite loss at step" in capsys.readouterr().err


def test_corrupt_resume_checkpoint_exit_4(tmp_path, data_dir, config):
    out = tmp_path / "run"
    path = config(TINY_TRAIN)
    assert run("train", "--config", path, "--data-dir", data_dir, "--out-dir", out) == 0
    ck = out / "checkpoints" / "image_000001.crw"
    raw = bytearray(ck.read_bytes())
    raw[20] ^= 0xFF
    ck.write_bytes(bytes(raw))
    assert run("train", "--config", path, "--data-dir", data_dir, "--out-dir", out, "--resume") == 4


# --- infer ------------------------------------------------------------------------------


def test_infer_matches_in_process_forward(tmp_path, data_dir, image_ckpt):
    src = data_dir / "frames" / "000003.gray.pgm"
    out = tmp_path / "cr.pgm"
    assert run("infer", "--checkpoint", image_ckpt, "--input", src, "--output", out) == 0
    got, maxval = read_pgm(out)
    weights, _ = load_weights(image_ckpt)
    want = np.round(forward(weights, read_gray_pgm(src)).data[0, 0].astype(np.float64) * 255)
    assert maxval == 255 and got.shape == (16, 32)
    np.testing.assert_array_equal(got, want)
    first = out.read_bytes()
    assert run("infer", "--checkpoint", image_ckpt, "--input", src, "--output", out) == 0
    assert out.read_bytes() == first


def test_infer_depth_kind_mismatch(tmp_path, data_dir, image_ckpt):
    src = data_dir / "frames" / "000003.depth.pgm"
    assert run("infer", "--checkpoint", image_ckpt, "--input", src, "--output", tmp_path / "o", "--kind", "depth") == 2


def test_infer_wrong_size(tmp_path, image_ckpt):
    src = tmp_path / "small.pgm"
    write_gray_pgm(src, np.zeros((8, 8)))
    assert run("infer", "--checkpoint", image_ckpt, "--input", src, "--output", tmp_path / "o") == 2


def test_infer_corrupt_checkpoint_exit_4(tmp_path, data_dir, image_ckpt):
    bad = tmp_path / "bad.crw"
    raw = bytearray(image_ckpt.read_bytes())
    raw[-1] ^= 1
    bad.write_bytes(bytes(raw))
    src = data_dir / "frames" / "000000.gray.pgm"
    assert run("infer", "--checkpoint", bad, "--input", src, "--output", tmp_path / "o") == 4


def test_infer_missing_checkpoint(tmp_path, data_dir):
    src = data_dir / "frames" / "000000.gray.pgm"
    assert run("infer", "--checkpoint", tmp_path / "nope.crw", "--input", src, "--output", tmp_path / "o") == 2


# --- eval -------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def eval_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("eval")
    assert run("generate-data", "--frames", 3, "--width", 128, "--height", 64, "--seed", 2, "--out-dir", root) == 0
    return root


def test_eval_single_pair_single_row(tmp_path, eval_data):
    out = tmp_path / "r.csv"
    assert run("eval", "--data-dir", eval_data, "--pairs", 1, "--output", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "condition,avg_distance_raw,avg_distance_normalized,avg_matches,avg_reprojection_px,pairs,dropped"
    assert len(lines) == 2


def test_eval_self_matching_and_baseline(tmp_path, eval_data):
    base = tmp_path / "base.csv"
    assert run("eval", "--data-dir", eval_data, "--pairs", 2, "--step", 0, "--output", base) == 0
    (r,) = read_reports(base)
    assert r.avg_reprojection_error < 0.1 and r.avg_distance_raw == 0.0
    out = tmp_path / "r.csv"
    assert run("eval", "--data-dir", eval_data, "--pairs", 2, "--output", out, "--baseline", out.with_name("x.csv")) == 2
    assert run("eval", "--data-dir", eval_data, "--pairs", 2, "--output", out) == 0
    assert run("eval", "--data-dir", eval_data, "--pairs", 2, "--output", tmp_path / "n.csv", "--baseline", out) == 0
    assert read_reports(tmp_path / "n.csv")[0].avg_distance_normalized == 1.0


def test_eval_errors(tmp_path, eval_data):
    out = tmp_path / "r.csv"
    assert run("eval", "--data-dir", eval_data, "--pairs", 3, "--output", out) == 2
    assert run("eval", "--data-dir", eval_data, "--pairs", 1, "--mode", "image_cr", "--output", out) == 2
    assert run("eval", "--data-dir", eval_data, "--pairs", 1, "--step", -1, "--output", out) == 2


def test_eval_reads_matcher_settings_from_config(tmp_path, eval_data, config):
    path = config({"eval": {"pairs": 1, "max_match_distance": 0}})
    out = tmp_path / "r.csv"
    assert run("eval", "--data-dir", eval_data, "--config", path, "--output", out) == 0
    (r,) = read_reports(out)
    assert r.pairs_evaluated + r.dropped == 1
    if r.pairs_evaluated:
        assert r.avg_distance_raw == 0.0


# --- edges ----------------------------------------------------------------------------------


def test_edges_matches_in_process_canny(tmp_path, data_dir):
    src = data_dir / "frames" / "000005.gray.pgm"
    out = tmp_path / "e.pgm"
    assert run("edges", "--input", src, "--output", out, "--low", 0.04, "--high", 0.12, "--sigma", 1.0) == 0
    got, _ = read_pgm(out)
    want = canny(read_gray_pgm(src), CannyConfig(1.0, 0.04, 0.12)) * 255
    np.testing.assert_array_equal(got, want)
    assert set(np.unique(got)) <= {0, 255}


def test_edges_constant_input(tmp_path):
    src = tmp_path / "c.pgm"
    write_gray_pgm(src, np.full((20, 20), 0.5))
    assert run("edges", "--input", src, "--output", tmp_path / "e.pgm") == 0
    assert not read_pgm(tmp_path / "e.pgm")[0].any()


def test_edges_bad_thresholds(tmp_path):
    src = tmp_path / "c.pgm"
    write_gray_pgm(src, np.zeros((4, 4)))
    assert run("edges", "--input", src, "--output", tmp_path / "e.pgm", "--low", 0.2, "--high", 0.1) == 2
    assert run("edges", "--input", tmp_path / "missing.pgm", "--output", tmp_path / "e.pgm") == 2


def test_thread_env_validation(tmp_path, monkeypatch):
    src = tmp_path / "c.pgm"
    write_gray_pgm(src, np.zeros((4, 4)))
    monkeypatch.setenv("CRBRIDGE_THREADS", "two")
    assert run("edges", "--input", src, "--output", tmp_path / "e.pgm") == 2
    monkeypatch.setenv("CRBRIDGE_THREADS", "1")
    assert run("edges", "--input", src, "--output", tmp_path / "e.pgm") == 0
