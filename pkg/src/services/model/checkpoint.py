"""Versioned single-file checkpoint container.

Layout: the magic line ``AARM-CKPT v1\\n``, an unsigned 64-bit little-endian header length,
a UTF-8 JSON header, then the raw row-major little-endian values of every array in header
order. The header stores the full model configuration, one entry per array (name, shape,
element width, offset, trainable flag), free-form metadata and the payload's SHA-256.
"""

import hashlib
import json
import logging
import os
import struct
import tempfile
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from src.config import ModelSettings
from src.exceptions import CheckpointError
from src.schemas.corpus.models import AspectSets
from src.schemas.model.models import MATRIX_NAMES, ModelParams
from src.services.variants.registry import get_variant

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"AARM-CKPT v1\n"
_LENGTH = struct.Struct("<Q")


class Checkpoint(BaseModel):
    """Parameters read back from disk with their extra arrays and metadata."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: ModelParams
    extra: dict[str, np.ndarray] = Field(default_factory=dict)
    meta: dict[str, Any] = Field(default_factory=dict)


def _little_endian(array: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<"))


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    extra: dict[str, np.ndarray] | None = None,
    meta: dict[str, Any] | None = None,
) -> Path:
    """Write a checkpoint atomically (temp file in the same directory, then rename).

    :param path: Destination file
    :param params: Model parameters and config
    :param extra: Additional named arrays, e.g. optimizer moments
    :param meta: JSON-serializable metadata
    :returns: Destination path
    """
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)

    entries: list[dict[str, Any]] = []
    blobs: list[bytes] = []
    offset = 0
    arrays = [(name, params.matrices[name], params.trainable.get(name, False)) for name in MATRIX_NAMES]
    arrays += [(name, array, False) for name, array in sorted((extra or {}).items())]
    for name, array, trainable in arrays:
        data = _little_endian(array)
        blob = data.tobytes(order="C")
        entries.append(
            {
                "name": name,
                "shape": list(data.shape),
                "dtype": data.dtype.str,
                "itemsize": data.dtype.itemsize,
                "offset": offset,
                "nbytes": len(blob),
                "trainable": trainable,
                "extra": name not in MATRIX_NAMES,
            }
        )
        blobs.append(blob)
        offset += len(blob)

    payload = b"".join(blobs)
    header = {
        "config": params.config.model_dump(),
        "arrays": entries,
        "meta": meta or {},
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    fd, tmp_name = tempfile.mkstemp(prefix=output.name + ".", suffix=".tmp", dir=output.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(CHECKPOINT_MAGIC)
            handle.write(_LENGTH.pack(len(header_bytes)))
            handle.write(header_bytes)
            handle.write(payload)
        os.replace(tmp_name, output)
    except Exception as e:
        Path(tmp_name).unlink(missing_ok=True)
        logger.error(f"Failed to write checkpoint {output}: {e}")
        raise CheckpointError(f"Failed to write checkpoint {output}: {e}") from e

    logger.debug(f"Checkpoint written: {output} ({len(payload)} bytes of parameters)")
    return output


def read_checkpoint(path: str | Path) -> Checkpoint:
    """Read and verify a checkpoint (magic, checksum, per-array sizes)."""
    input_path = Path(path)
    if not input_path.exists():
        raise CheckpointError(f"Checkpoint not found: {input_path}")

    raw = input_path.read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{input_path}: not an AARM-CKPT v1 file")

    start = len(CHECKPOINT_MAGIC)
    try:
        (header_length,) = _LENGTH.unpack_from(raw, start)
        header_start = start + _LENGTH.size
        header = json.loads(raw[header_start : header_start + header_length].decode("utf-8"))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{input_path}: unreadable header ({e})") from e

    payload = raw[header_start + header_length :]
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise CheckpointError(f"{input_path}: checksum mismatch, file is corrupt or truncated")

    matrices: dict[str, np.ndarray] = {}
    trainable: dict[str, bool] = {}
    extra: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        if entry["nbytes"] != count * dtype.itemsize or entry["offset"] + entry["nbytes"] > len(payload):
            raise CheckpointError(f"{input_path}: array '{entry['name']}' has inconsistent size")
        array = np.frombuffer(payload, dtype=dtype, count=count, offset=entry["offset"]).reshape(entry["shape"])
        array = array.astype(dtype.newbyteorder("="), copy=True)
        if entry.get("extra"):
            extra[entry["name"]] = array
        else:
            matrices[entry["name"]] = array
            trainable[entry["name"]] = bool(entry["trainable"])

    missing = [name for name in MATRIX_NAMES if name not in matrices]
    if missing:
        raise CheckpointError(f"{input_path}: missing matrices {', '.join(missing)}")

    config = ModelSettings(**header["config"])
    params = ModelParams(config=config, matrices=matrices, trainable=trainable)
    return Checkpoint(params=params, extra=extra, meta=header.get("meta", {}))


def load_checkpoint(path: str | Path, aspect_sets: AspectSets | None = None, n_aspect_rows: int | None = None) -> ModelParams:
    """Load parameters, validating shapes against a dataset when one is given."""
    params = read_checkpoint(path).params
    if aspect_sets is not None:
        validate_shapes(params, aspect_sets, n_aspect_rows)
    logger.info(f"Loaded {params.config.variant} checkpoint from {path}")
    return params


def validate_shapes(params: ModelParams, aspect_sets: AspectSets, n_aspect_rows: int | None = None) -> None:
    """Check that the parameters fit the dataset bundle they are used with."""
    config = params.config
    n_users = aspect_sets.user_indices.shape[0]
    n_items = aspect_sets.item_indices.shape[0]
    expected = {
        "W_trans": (config.d_a, config.d_a),
        "w_att1": (config.d_a,),
        "w_att2": (config.d_a,),
        "W_U": (n_users, config.d_g),
        "W_V": (n_items, config.d_g),
        "W_out": (get_variant(config.variant).output_dim(config.d_a, config.d_g),),
    }
    if n_aspect_rows is not None:
        expected["W_A"] = (n_aspect_rows, config.d_a)
    for name, shape in expected.items():
        if params.matrices[name].shape != shape:
            raise CheckpointError(
                f"Checkpoint matrix {name} has shape {params.matrices[name].shape}, dataset requires {shape}"
            )
    max_aspect = max(int(aspect_sets.user_indices.max(initial=0)), int(aspect_sets.item_indices.max(initial=0)))
    if max_aspect >= params.n_aspect_rows:
        raise CheckpointError(f"Dataset references aspect {max_aspect}, checkpoint has {params.n_aspect_rows} rows")
