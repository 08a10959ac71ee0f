"""Binary serialization of fitted models and dictionaries.

A model is unusable without the codebook and normalization it was trained
with, so all three travel in one file:

    8 bytes   magic ``SLPNET01``
    8 bytes   header length, little-endian unsigned
    N bytes   JSON header (sorted keys, compact separators): class mode,
              frame sizes, layer descriptors, codebook size, feature dims,
              codebook fit metadata, and the name/shape of every array
    rest      the arrays as raw little-endian float64, in header order:
              dictionary centers, normalization mean, normalization std,
              then network parameters in canonical order

Standalone dictionaries use the same layout under magic ``SLPDICT1``.
Writing is deterministic: identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .features_low import FrameConfig
from .features_mid import Dictionary, NormStats
from .ingest import DataValidationError
from .network import NetSpec, Network
from .pipeline import FittedModel, FittedPipeline

MODEL_MAGIC = b"SLPNET01"
DICT_MAGIC = b"SLPDICT1"


def _pack(header: dict, arrays: list[np.ndarray], magic: bytes) -> bytes:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DataValidationError("refusing to serialize non-finite arrays")
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    return magic + struct.pack("<Q", len(blob)) + blob + body


def _unpack(data: bytes, magic: bytes, path: str) -> tuple[dict, np.ndarray]:
    if len(data) < 16 or data[:8] != magic:
        raise DataValidationError(f"{path}: not a {magic.decode()} file")
    (hlen,) = struct.unpack("<Q", data[8:16])
    if len(data) < 16 + hlen:
        raise DataValidationError(f"{path}: truncated header")
    try:
        header = json.loads(data[16 : 16 + hlen])
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path}: corrupt header") from exc
    body = np.frombuffer(data[16 + hlen :], dtype="<f8")
    return header, body


def _take(body: np.ndarray, offset: int, shape) -> tuple[np.ndarray, int]:
    n = int(np.prod(shape))
    if offset + n > body.size:
        raise DataValidationError("model file body shorter than header promises")
    return body[offset : offset + n].reshape(shape).astype(np.float64), offset + n


def save_model(model: FittedModel, path: str) -> None:
    d = model.pipeline.dictionary
    stats = model.pipeline.stats
    arrays = [d.centers, stats.mean, stats.std]
    array_meta = [
        ["dictionary.centers", list(d.centers.shape)],
        ["norm.mean", list(stats.mean.shape)],
        ["norm.std", list(stats.std.shape)],
    ]
    for name, arr in model.net.named_params():
        arrays.append(arr)
        array_meta.append([f"net.{name}", list(arr.shape)])
    header = {
        "version": 1,
        "num_classes": model.num_classes,
        "frame": {
            "frame_epochs": model.frame.frame_epochs,
            "freq_components": model.frame.freq_components,
            "cepstrum_components": model.frame.cepstrum_components,
        },
        "num_words": d.num_words,
        "low_dim": d.centers.shape[1],
        "final_dim": model.pipeline.final_dim,
        "layers": [[kind, hidden] for kind, hidden in model.net.spec.layers],
        "dict_iterations": d.iterations,
        "dict_objective": d.objective,
        "dict_objective_history": list(d.objective_history),
        "arrays": array_meta,
    }
    with open(path, "wb") as fh:
        fh.write(_pack(header, arrays, MODEL_MAGIC))


def load_model(path: str) -> FittedModel:
    with open(path, "rb") as fh:
        data = fh.read()
    header, body = _unpack(data, MODEL_MAGIC, path)
    try:
        frame = FrameConfig(**header["frame"])
        spec = NetSpec(
            input_dim=header["final_dim"],
            num_classes=header["num_classes"],
            layers=tuple((k, h) for k, h in header["layers"]),
        )
        array_meta = header["arrays"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataValidationError(f"{path}: invalid header: {exc}") from exc

    offset = 0
    loaded: dict[str, np.ndarray] = {}
    for name, shape in array_meta:
        loaded[name], offset = _take(body, offset, shape)
    if offset != body.size:
        raise DataValidationError(f"{path}: trailing bytes after promised arrays")
    if not all(np.all(np.isfinite(a)) for a in loaded.values()):
        raise DataValidationError(f"{path}: non-finite values in model arrays")

    dictionary = Dictionary(
        centers=loaded["dictionary.centers"],
        iterations=header["dict_iterations"],
        objective=header["dict_objective"],
        objective_history=tuple(header["dict_objective_history"]),
    )
    stats = NormStats(mean=loaded["norm.mean"], std=loaded["norm.std"])
    net = Network.zeros(spec)
    for name, arr in net.named_params():
        key = f"net.{name}"
        if key not in loaded:
            raise DataValidationError(f"{path}: missing array {key}")
        if loaded[key].shape != arr.shape:
            raise DataValidationError(f"{path}: shape mismatch for {key}")
        arr[:] = loaded[key]
    return FittedModel(
        frame=frame,
        num_classes=header["num_classes"],
        pipeline=FittedPipeline(dictionary=dictionary, stats=stats),
        net=net,
    )


def save_dictionary(d: Dictionary, path: str) -> None:
    header = {
        "version": 1,
        "num_words": d.num_words,
        "low_dim": d.centers.shape[1],
        "iterations": d.iterations,
        "objective": d.objective,
        "objective_history": list(d.objective_history),
        "arrays": [["centers", list(d.centers.shape)]],
    }
    with open(path, "wb") as fh:
        fh.write(_pack(header, [d.centers], DICT_MAGIC))


def load_dictionary(path: str) -> Dictionary:
    with open(path, "rb") as fh:
        data = fh.read()
    header, body = _unpack(data, DICT_MAGIC, path)
    centers, offset = _take(body, 0, header["arrays"][0][1])
    if offset != body.size:
        raise DataValidationError(f"{path}: trailing bytes after promised arrays")
    return Dictionary(
        centers=centers,
        iterations=header["iterations"],
        objective=header["objective"],
        objective_history=tuple(header["objective_history"]),
    )
