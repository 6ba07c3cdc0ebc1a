"""Single-file binary container: one JSON header line, then raw array blocks.

Layout:

    {"magic": "pszkit", "kind": ..., "version": ..., "meta": {...},
     "blocks": [{"name": ..., "dtype": "<f8", "shape": [...]}, ...]}\\n
    <block 0 bytes><block 1 bytes>...

Blocks are little-endian, C-order, and stored in header order, so the file is
readable on any platform without pickle. Used for checkpoints, transfer
function sets, and exported filter banks.
"""

import json
import os

import numpy as np

from .errors import CheckpointVersionError, CorruptCheckpointError

MAGIC = "pszkit"

# dtypes the container may hold; everything is normalized to one of these
_DTYPES = {"<f8": np.dtype("<f8"), "<c16": np.dtype("<c16"), "<i8": np.dtype("<i8")}


def _dtype_tag(arr: np.ndarray) -> str:
    if arr.dtype.kind == "f":
        return "<f8"
    if arr.dtype.kind == "c":
        return "<c16"
    if arr.dtype.kind in "iu":
        return "<i8"
    raise ValueError(f"unsupported array dtype {arr.dtype}")


def write_container(path, kind: str, version: int, meta: dict, arrays: dict) -> None:
    """Write ``arrays`` (name -> ndarray) under a JSON header.

    ``meta`` must be JSON-serializable. Arrays are converted to float64,
    complex128, or int64 as appropriate.
    """
    blocks = []
    payload = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        tag = _dtype_tag(arr)
        arr = arr.astype(_DTYPES[tag], copy=False)
        blocks.append({"name": name, "dtype": tag, "shape": list(arr.shape)})
        payload.append(arr.tobytes(order="C"))
    header = {"magic": MAGIC, "kind": kind, "version": int(version),
              "meta": meta, "blocks": blocks}
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for chunk in payload:
            f.write(chunk)
    os.replace(tmp, path)  # atomic so a crash never leaves a half-written file


def read_container(path, kind: str | None = None, version: int | None = None):
    """Read a container, returning ``(header, arrays)``.

    Raises CorruptCheckpointError for anything unparseable or truncated and
    CheckpointVersionError when ``version`` is given and does not match.
    ``kind`` mismatches are reported as corruption: the file is not what the
    caller thinks it is.
    """
    try:
        with open(path, "rb") as f:
            line = f.readline()
            body = f.read()
    except OSError as e:
        raise CorruptCheckpointError(f"cannot read {path}: {e}") from e
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptCheckpointError(f"{path}: bad container header") from e
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise CorruptCheckpointError(f"{path}: not a pszkit container")
    if kind is not None and header.get("kind") != kind:
        raise CorruptCheckpointError(
            f"{path}: container kind {header.get('kind')!r}, expected {kind!r}")
    if version is not None and header.get("version") != version:
        raise CheckpointVersionError(
            f"{path}: format version {header.get('version')!r}, expected {version}")

    arrays = {}
    offset = 0
    for blk in header.get("blocks", []):
        try:
            dtype = _DTYPES[blk["dtype"]]
            shape = tuple(int(s) for s in blk["shape"])
            name = blk["name"]
        except (KeyError, TypeError, ValueError) as e:
            raise CorruptCheckpointError(f"{path}: malformed block entry") from e
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
        end = offset + nbytes
        if end > len(body):
            raise CorruptCheckpointError(f"{path}: truncated block {name!r}")
        arrays[name] = np.frombuffer(body[offset:end], dtype=dtype).reshape(shape).copy()
        offset = end
    if offset != len(body):
        raise CorruptCheckpointError(f"{path}: {len(body) - offset} trailing bytes")
    return header, arrays
