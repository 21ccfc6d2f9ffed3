"""
Decoder model files

Layout (little-endian)::

    8 bytes   magic b"DYNOLM\\x00\\x01"
    uint32    format version
    uint64    header length in bytes
    header    UTF-8 JSON: vocab, tensor table (name, shape, offset), metadata
    tensors   float64 data, concatenated in table order
"""

import json
import logging
import struct
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..error import DynoframeError
from .decoder import PARAM_NAMES, DecoderModel
from .vocab import Vocabulary

logger = logging.getLogger(__name__)

MAGIC = b"DYNOLM\x00\x01"
FORMAT_VERSION = 1
PREAMBLE = struct.Struct("<IQ")
DTYPE = np.dtype("<f8")


def save_model(path: str, model: DecoderModel, metadata: Optional[Dict[str, Any]] = None) -> None:
    """
    Write a model file.

    Raises:
        DynoframeError: ``UNMERGED_ADAPTERS`` if adapters are still attached
    """
    if model.adapters:
        raise DynoframeError("merge adapters before saving", code="UNMERGED_ADAPTERS")

    tensors = []
    offset = 0
    for name in PARAM_NAMES:
        array = np.ascontiguousarray(model.params[name], dtype=DTYPE)
        tensors.append({"name": name, "shape": list(array.shape), "offset": offset})
        offset += array.nbytes

    header = {
        "version": FORMAT_VERSION,
        "vocab": model.vocab.to_json(),
        "hidden_size": model.hidden_size,
        "image_dim": model.image_dim,
        "tensors": tensors,
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(PREAMBLE.pack(FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for name in PARAM_NAMES:
            fh.write(np.ascontiguousarray(model.params[name], dtype=DTYPE).tobytes())
    logger.info("saved decoder (%d parameters) to %s", model.parameter_count(), path)


def load_model(path: str) -> Tuple[DecoderModel, Dict[str, Any]]:
    """
    Read a model file.

    Returns:
        (model, metadata)

    Raises:
        DynoframeError: ``FILE_NOT_FOUND`` or ``BAD_MODEL_FILE``
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise DynoframeError(f"file not found: {path}", code="FILE_NOT_FOUND")

    if not blob.startswith(MAGIC) or len(blob) < len(MAGIC) + PREAMBLE.size:
        raise DynoframeError(f"{path} is not a dynoframe model file", code="BAD_MODEL_FILE")
    version, header_len = PREAMBLE.unpack_from(blob, len(MAGIC))
    if version != FORMAT_VERSION:
        raise DynoframeError(
            f"{path}: unsupported model format version {version}", code="BAD_MODEL_FILE"
        )
    start = len(MAGIC) + PREAMBLE.size
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DynoframeError(f"{path}: corrupt header: {e}", code="BAD_MODEL_FILE")

    data = blob[start + header_len :]
    params = {}
    for entry in header.get("tensors", []):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        begin = entry["offset"]
        end = begin + count * DTYPE.itemsize
        if end > len(data):
            raise DynoframeError(
                f"{path}: tensor {entry['name']} is truncated", code="BAD_MODEL_FILE"
            )
        params[entry["name"]] = np.frombuffer(data[begin:end], dtype=DTYPE).reshape(shape).copy()

    model = DecoderModel(Vocabulary.from_json(header.get("vocab")), params)
    logger.info("loaded decoder from %s", path)
    return model, header.get("metadata", {})
