"""Directory container: ``meta.json`` plus raw little-endian ``data.bin``.

``meta.json`` carries ``schema_version``, ``shape``, ``dtype`` (one of
``c64``, ``f32``, ``u16``, ``u8``), ``axes``, ``coils``, ``endianness``
(always ``little``), ``kind`` and free-form ``attrs``. ``c64`` stores
interleaved float32 real/imaginary pairs. Data is row-major without
padding; the metadata is parsed and validated before the payload is read.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
META = "meta.json"
DATA = "data.bin"
DTYPES = {"c64": np.dtype("<c8"), "f32": np.dtype("<f4"), "u16": np.dtype("<u2"), "u8": np.dtype("u1")}
KINDS = {"image", "kspace", "mask", "maps", "segmentation"}


class ContainerError(ValueError):
    pass


def _dtype_code(arr: np.ndarray, dtype: str | None) -> str:
    if dtype is not None:
        if dtype not in DTYPES:
            raise ContainerError(f"unsupported dtype {dtype!r}; choose from {sorted(DTYPES)}")
        return dtype
    if np.iscomplexobj(arr):
        return "c64"
    if arr.dtype == np.uint8 or arr.dtype == bool:
        return "u8"
    if arr.dtype.kind in "iu":
        return "u16"
    return "f32"


def write_container(path, data, kind: str, dtype: str | None = None, axes=None,
                    coils: int | None = None, attrs: dict | None = None) -> Path:
    if kind not in KINDS:
        raise ContainerError(f"unknown kind {kind!r}")
    path = Path(path)
    arr = np.asarray(data)
    code = _dtype_code(arr, dtype)
    if code in ("u16", "u8") and arr.size and (arr.min() < 0 or arr.max() > np.iinfo(DTYPES[code]).max):
        raise ContainerError(f"values out of range for {code}")
    meta = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "shape": [int(n) for n in arr.shape],
        "dtype": code,
        "axes": list(axes) if axes is not None else [f"dim{i}" for i in range(arr.ndim)],
        "coils": coils,
        "endianness": "little",
        "attrs": attrs or {},
    }
    path.mkdir(parents=True, exist_ok=True)
    (path / META).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    (path / DATA).write_bytes(np.ascontiguousarray(arr.astype(DTYPES[code])).tobytes())
    return path


def read_meta(path) -> dict:
    path = Path(path)
    meta_file = path / META
    if not meta_file.is_file():
        raise ContainerError(f"{path}: missing {META}")
    text = meta_file.read_text()
    try:
        meta = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ContainerError(f"{meta_file}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    for key in ("shape", "dtype", "kind"):
        if key not in meta:
            raise ContainerError(f"{meta_file}: missing field {key!r}")
    if meta["dtype"] not in DTYPES:
        raise ContainerError(f"{meta_file}: unsupported dtype {meta['dtype']!r}")
    if meta.get("endianness", "little") != "little":
        raise ContainerError(f"{meta_file}: only little-endian payloads are supported")
    if not all(isinstance(n, int) and n >= 0 for n in meta["shape"]):
        raise ContainerError(f"{meta_file}: invalid shape {meta['shape']!r}")
    return meta


def read_container(path) -> tuple[np.ndarray, dict]:
    """Load ``(array, meta)``; ``c64`` payloads come back as complex64."""
    path = Path(path)
    meta = read_meta(path)
    dtype = DTYPES[meta["dtype"]]
    expected = int(np.prod(meta["shape"], dtype=np.int64)) * dtype.itemsize
    data_file = path / DATA
    if not data_file.is_file():
        raise ContainerError(f"{path}: missing {DATA}")
    size = data_file.stat().st_size
    if size != expected:
        raise ContainerError(
            f"{data_file}: {size} bytes, expected {expected} for shape {meta['shape']} {meta['dtype']}"
        )
    arr = np.frombuffer(data_file.read_bytes(), dtype=dtype).reshape(meta["shape"])
    return arr.astype(dtype.newbyteorder("=")), meta
