"""Binary weight checkpoints (``CRW1``) and resumable training state (``CRS1``).

Layout of both files, all integers little-endian::

    magic[4] | version:u32 | role:u8 | header_len:u32 | header JSON (utf-8)
    | n_records:u32 | records... | crc32:u32

Each record is ``name_len:u16 | name | rank:u8 | dims:u32*rank | float32 values``.
The trailing CRC-32 covers every preceding byte.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .autodiff import OptimizerState, Tensor
from .generator import GeneratorConfig, GeneratorWeights

WEIGHTS_MAGIC = b"CRW1"
STATE_MAGIC = b"CRS1"
FORMAT_VERSION = 1
ROLES = ("image", "depth")


class CorruptCheckpoint(ValueError):
    pass


def _encode_records(records: list[tuple[str, np.ndarray]]) -> bytes:
    out = [struct.pack("<I", len(records))]
    for name, arr in records:
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def _encode(magic: bytes, role: int, header: dict, records) -> bytes:
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = magic + struct.pack("<IBI", FORMAT_VERSION, role, len(head)) + head + _encode_records(records)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf, self.pos, self.path = buf, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptCheckpoint(f"{self.path}: truncated")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _decode(raw: bytes, magic: bytes, path) -> tuple[int, dict, list[tuple[str, np.ndarray]]]:
    if len(raw) < 4 + 4 + 1 + 4 + 4 + 4:
        raise CorruptCheckpoint(f"{path}: file too short")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise CorruptCheckpoint(f"{path}: CRC mismatch")
    r = _Reader(body, path)
    if r.take(4) != magic:
        raise CorruptCheckpoint(f"{path}: bad magic, expected {magic!r}")
    version, role, hlen = r.unpack("<IBI")
    if version != FORMAT_VERSION:
        raise CorruptCheckpoint(f"{path}: unsupported format version {version}")
    try:
        header = json.loads(r.take(hlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"{path}: unreadable header") from exc
    (count,) = r.unpack("<I")
    records = []
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        (rank,) = r.unpack("<B")
        dims = r.unpack(f"<{rank}I")
        n = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(dims).astype(np.float32)
        records.append((name, arr))
    if r.pos != len(body):
        raise CorruptCheckpoint(f"{path}: trailing bytes")
    return role, header, records


def encode_weights(weights: GeneratorWeights, role: str) -> bytes:
    if role not in ROLES:
        raise ValueError(f"role must be one of {ROLES}")
    records = []
    for name, k, b in weights.layers:
        records.append((f"{name}.weight", k.data))
        records.append((f"{name}.bias", b.data))
    return _encode(WEIGHTS_MAGIC, ROLES.index(role), {"config": weights.config.to_dict()}, records)


def save_weights(path, weights: GeneratorWeights, role: str) -> None:
    Path(path).write_bytes(encode_weights(weights, role))


def decode_weights(raw: bytes, path="<bytes>") -> tuple[GeneratorWeights, str]:
    role, header, records = _decode(raw, WEIGHTS_MAGIC, path)
    if role >= len(ROLES):
        raise CorruptCheckpoint(f"{path}: unknown role tag {role}")
    cfg = GeneratorConfig(**{**header["config"], "encoder_channels": tuple(header["config"]["encoder_channels"])})
    expected = cfg.layer_shapes()
    if len(records) != 2 * len(expected):
        raise CorruptCheckpoint(f"{path}: {len(records)} records, expected {2 * len(expected)}")
    k = cfg.kernel_size
    layers = []
    for i, (name, c_in, c_out) in enumerate(expected):
        (wn, w), (bn, b) = records[2 * i], records[2 * i + 1]
        if wn != f"{name}.weight" or bn != f"{name}.bias":
            raise CorruptCheckpoint(f"{path}: unexpected layer names {wn}, {bn}")
        if w.shape != (c_out, c_in, k, k) or b.shape != (c_out,):
            raise CorruptCheckpoint(f"{path}: layer {name} has shape {w.shape}/{b.shape}")
        layers.append((name, Tensor(w, requires_grad=True), Tensor(b, requires_grad=True)))
    return GeneratorWeights(cfg, layers), ROLES[role]


def load_weights(path) -> tuple[GeneratorWeights, str]:
    return decode_weights(Path(path).read_bytes(), path)


def save_optimizer_state(path, step: int, history: list[float], opts: dict[str, OptimizerState]) -> None:
    header = {"step": step, "history": [float(v) for v in history], "optimizers": {}}
    records = []
    for role, opt in opts.items():
        header["optimizers"][role] = {
            "kind": opt.kind,
            "learning_rate": opt.learning_rate,
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "eps": opt.eps,
            "step": opt.step,
            "n": len(opt.m),
        }
        for i, (m, v) in enumerate(zip(opt.m, opt.v)):
            records.append((f"{role}.m{i}", m))
            records.append((f"{role}.v{i}", v))
    Path(path).write_bytes(_encode(STATE_MAGIC, 0, header, records))


def load_optimizer_state(path) -> tuple[int, list[float], dict[str, OptimizerState]]:
    _, header, records = _decode(Path(path).read_bytes(), STATE_MAGIC, path)
    arrays = dict(records)
    opts = {}
    for role, meta in header["optimizers"].items():
        n = meta.pop("n")
        opt = OptimizerState(**meta)
        opt.m = [arrays[f"{role}.m{i}"] for i in range(n)]
        opt.v = [arrays[f"{role}.v{i}"] for i in range(n)]
        opts[role] = opt
    return header["step"], list(header["history"]), opts
