"""Binary containers for rank-4 float arrays and named parameter sets.

``.gdf`` holds one rank-4 array (videos, fields, flows; images are T=1):
magic ``GDF1``, then little-endian u32 T, C, H, W, then T*C*H*W
little-endian float32 values in (t, c, y, x) order.

``.gdp`` holds a named collection of rank-4 arrays (checkpoints):
magic ``GDP1``, u32 entry count, then per entry a u16 name length, the
UTF-8 name bytes, four u32 shape fields, and the float32 payload.
Everything is little-endian.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import FormatError

GDF_MAGIC = b"GDF1"
GDP_MAGIC = b"GDP1"

# Caps the element count a header may declare; prevents huge allocations on
# corrupt headers.
_MAX_ELEMENTS = 1 << 31


def _atomic_write(path: str, payload: bytes) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_gdf(path: str, array: np.ndarray) -> None:
    """Save a rank-4 array as a ``.gdf`` file."""
    arr = np.asarray(array, dtype=np.float32)
    if arr.ndim != 4:
        raise FormatError(f"gdf arrays are rank-4, got shape {arr.shape}")
    header = GDF_MAGIC + struct.pack("<4I", *arr.shape)
    _atomic_write(path, header + np.ascontiguousarray(arr).astype("<f4").tobytes())


def load_gdf(path: str) -> np.ndarray:
    """Load a ``.gdf`` file as a float32 array of shape (T, C, H, W)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != GDF_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 20:
        raise FormatError(f"{path}: truncated header")
    shape = struct.unpack("<4I", blob[4:20])
    count = int(np.prod([int(s) for s in shape], dtype=np.int64))
    if count <= 0 or count > _MAX_ELEMENTS:
        raise FormatError(f"{path}: header declares invalid size {shape}")
    expected = 20 + 4 * count
    if len(blob) < expected:
        raise FormatError(
            f"{path}: payload truncated ({len(blob)} bytes, expected {expected})"
        )
    data = np.frombuffer(blob[20:expected], dtype="<f4")
    return data.reshape(shape).astype(np.float32)


def save_gdp(path: str, entries: dict[str, np.ndarray]) -> None:
    """Save named rank-4 arrays as a ``.gdp`` checkpoint.

    Entries are written in lexicographic name order so files are
    reproducible regardless of dict insertion order.
    """
    chunks = [GDP_MAGIC, struct.pack("<I", len(entries))]
    for name in sorted(entries):
        arr = np.asarray(entries[name], dtype=np.float32)
        if arr.ndim != 4:
            raise FormatError(f"gdp entry {name!r} is rank {arr.ndim}, need 4")
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise FormatError(f"gdp entry name too long: {name[:32]!r}...")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<4I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).astype("<f4").tobytes())
    _atomic_write(path, b"".join(chunks))


def load_gdp(path: str) -> dict[str, np.ndarray]:
    """Load a ``.gdp`` checkpoint as a name -> float32 array dict."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != GDP_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 8:
        raise FormatError(f"{path}: truncated header")
    (count,) = struct.unpack("<I", blob[4:8])
    offset = 8
    entries: dict[str, np.ndarray] = {}
    for _ in range(count):
        if offset + 2 > len(blob):
            raise FormatError(f"{path}: truncated entry header")
        (name_len,) = struct.unpack("<H", blob[offset : offset + 2])
        offset += 2
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        if offset + 16 > len(blob):
            raise FormatError(f"{path}: truncated shape for {name!r}")
        shape = struct.unpack("<4I", blob[offset : offset + 16])
        offset += 16
        n = int(np.prod([int(s) for s in shape], dtype=np.int64))
        if n <= 0 or n > _MAX_ELEMENTS:
            raise FormatError(f"{path}: entry {name!r} declares invalid size {shape}")
        end = offset + 4 * n
        if end > len(blob):
            raise FormatError(f"{path}: payload truncated for {name!r}")
        if name in entries:
            raise FormatError(f"{path}: duplicate entry {name!r}")
        entries[name] = (
            np.frombuffer(blob[offset:end], dtype="<f4").reshape(shape).astype(np.float32)
        )
        offset = end
    return entries
