"""Binary and CSV encodings for images, point clouds and model checkpoints.

HDG1 image: "HDG1" | u32 side | u32 reserved (0) | u32 reserved (0), a 16-byte
            header, then side*side <f8, row-major.
HDGM model: "HDGM" | u32 version | u32 kind (0 linear, 1 mlp) | u32 layer count
            | u32 dims... | <f8 weights, row-major, in layer order.
All integers little-endian.
"""
import csv
import struct
from pathlib import Path

import numpy as np

from core.errors import ConfigError
from models.adversarial import LinearModel, MlpModel, Model
from models.lid import PointCloud
from models.spectra import ImageGrid

IMAGE_MAGIC = b"HDG1"
IMAGE_HEADER = 16
MODEL_MAGIC = b"HDGM"
MODEL_VERSION = 1
_KINDS = {"linear": 0, "mlp": 1}


def encode_image(image: ImageGrid) -> bytes:
    head = IMAGE_MAGIC + struct.pack("<III", image.side, 0, 0)
    return head + np.ascontiguousarray(image.values, dtype="<f8").tobytes()


def decode_image(blob: bytes) -> ImageGrid:
    if len(blob) < IMAGE_HEADER or blob[:4] != IMAGE_MAGIC:
        raise ConfigError("not an HDG1 image")
    side, _, _ = struct.unpack("<III", blob[4:IMAGE_HEADER])
    body = blob[IMAGE_HEADER:]
    if len(body) != side * side * 8:
        raise ConfigError(f"HDG1 body holds {len(body)} bytes, expected {side * side * 8}")
    values = np.frombuffer(body, dtype="<f8").reshape(side, side).astype(float)
    return ImageGrid(side=side, values=values)


def save_image(path: Path, image: ImageGrid):
    Path(path).write_bytes(encode_image(image))


def load_image(path: Path) -> ImageGrid:
    return decode_image(Path(path).read_bytes())


def save_image_csv(path: Path, image: ImageGrid):
    _write_rows(path, image.values)


def load_image_csv(path: Path) -> ImageGrid:
    return ImageGrid.from_array(_read_rows(path))


def save_cloud_csv(path: Path, cloud: PointCloud):
    _write_rows(path, cloud.points)


def load_cloud_csv(path: Path) -> PointCloud:
    return PointCloud.from_array(_read_rows(path))


def _write_rows(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for row in rows:
            writer.writerow([format(float(v), ".17g") for v in row])


def _read_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as f:
        return np.asarray([[float(v) for v in row] for row in csv.reader(f) if row], dtype=float)


def _layers(model: Model):
    if isinstance(model, LinearModel):
        return [model.w, np.array([model.b])]
    return [model.W1, model.b1, model.W2, model.b2]


def encode_model(model: Model) -> bytes:
    layers = _layers(model)
    dims = []
    for arr in layers:
        dims.extend(arr.shape if arr.ndim == 2 else (arr.shape[0], 1))
    out = [MODEL_MAGIC, struct.pack("<III", MODEL_VERSION, _KINDS[model.kind], len(layers)),
           struct.pack(f"<{len(dims)}I", *dims)]
    out += [np.ascontiguousarray(arr, dtype="<f8").tobytes() for arr in layers]
    return b"".join(out)


def decode_model(blob: bytes) -> Model:
    if blob[:4] != MODEL_MAGIC:
        raise ConfigError("not an HDGM checkpoint")
    version, kind, count = struct.unpack("<III", blob[4:16])
    if version != MODEL_VERSION:
        raise ConfigError(f"unsupported HDGM version {version}")
    dims = struct.unpack(f"<{2 * count}I", blob[16:16 + 8 * count])
    offset = 16 + 8 * count
    layers = []
    for rows, cols in zip(dims[0::2], dims[1::2]):
        size = rows * cols * 8
        arr = np.frombuffer(blob[offset:offset + size], dtype="<f8").astype(float)
        if arr.size != rows * cols:
            raise ConfigError("truncated HDGM checkpoint")
        layers.append(arr.reshape(rows, cols))
        offset += size
    if kind == _KINDS["linear"]:
        return LinearModel(w=layers[0][:, 0], b=float(layers[1][0, 0]))
    W1, b1, W2, b2 = layers
    return MlpModel(W1=W1, b1=b1[:, 0], W2=W2, b2=b2[:, 0])


def save_model(path: Path, model: Model):
    Path(path).write_bytes(encode_model(model))


def load_model(path: Path) -> Model:
    return decode_model(Path(path).read_bytes())
