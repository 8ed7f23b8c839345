"""Image and light-field file formats.

* Binary PPM (P6), 8- or 16-bit per channel.
* ``LFRW`` raw container: magic, ``u16 H``, ``u16 W``, then ``H*W*3``
  little-endian float32 samples (row-major, channel-interleaved). A file may
  hold several frames back to back, each with its own header.
* Light-field directories with one ``view_{u:02}_{v:02}.ppm`` per view.
* Pseudo-video (PVS) export: serpentine-ordered ``LFRW`` frames plus a JSON
  sidecar with the coordinate order.
"""
from __future__ import annotations

import json
import os
import re
import shutil
import struct
import tempfile
from pathlib import Path

import numpy as np

from .lightfield import AngularCoord, LightField, serpentine_order

RAW_MAGIC = b"LFRW"
VIEW_PATTERN = re.compile(r"^view_(\d{2,})_(\d{2,})\.ppm$")


class LightFieldIOError(Exception):
    """Raised for missing, unreadable, or inconsistent light-field inputs."""


def view_filename(u: int, v: int) -> str:
    return f"view_{u:02}_{v:02}.ppm"


def _ppm_tokens(data: bytes):
    # Header: magic, width, height, maxval separated by whitespace/comments,
    # followed by exactly one whitespace byte before the raster.
    pos, tokens = 0, []
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PPM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_ppm(path) -> tuple[np.ndarray, int]:
    """Read a P6 file. Returns ``(pixels, bitdepth)`` with integer pixels (H, W, 3)."""
    data = Path(path).read_bytes()
    tokens, offset = _ppm_tokens(data)
    if tokens[0] != b"P6":
        raise ValueError(f"not a binary PPM (magic {tokens[0]!r})")
    width, height, maxval = (int(t) for t in tokens[1:])
    if not 0 < maxval < 65536:
        raise ValueError(f"invalid PPM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * 3
    raster = data[offset:offset + count * dtype.itemsize]
    if len(raster) != count * dtype.itemsize:
        raise ValueError("truncated PPM raster")
    pixels = np.frombuffer(raster, dtype=dtype).reshape(height, width, 3)
    bitdepth = int(maxval).bit_length()
    return pixels.astype(np.uint16 if maxval > 255 else np.uint8), bitdepth


def encode_ppm(img: np.ndarray, bitdepth: int = 8) -> bytes:
    """P6 bytes for an ``(H, W, 3)`` float image in [0, 1]."""
    if bitdepth not in (8, 16):
        raise ValueError("bitdepth must be 8 or 16")
    maxval = (1 << bitdepth) - 1
    q = np.clip(np.rint(np.asarray(img, dtype=np.float64) * maxval), 0, maxval)
    dtype = ">u2" if bitdepth == 16 else "u1"
    h, w = q.shape[:2]
    return b"P6\n%d %d\n%d\n" % (w, h, maxval) + q.astype(dtype).tobytes()


def write_ppm(path, img: np.ndarray, bitdepth: int = 8) -> None:
    Path(path).write_bytes(encode_ppm(img, bitdepth))


def load_image(path) -> np.ndarray:
    pixels, bitdepth = read_ppm(path)
    return pixels.astype(np.float32) / np.float32((1 << bitdepth) - 1)


def encode_raw_frame(img: np.ndarray) -> bytes:
    h, w = img.shape[:2]
    if h > 0xFFFF or w > 0xFFFF:
        raise ValueError("raw container dimensions must fit in u16")
    body = np.ascontiguousarray(img, dtype="<f4").tobytes()
    return RAW_MAGIC + struct.pack("<HH", h, w) + body


def read_raw_frames(path) -> list[np.ndarray]:
    data = Path(path).read_bytes()
    frames, pos = [], 0
    while pos < len(data):
        if data[pos:pos + 4] != RAW_MAGIC:
            raise ValueError(f"bad raw frame magic at byte {pos}")
        if pos + 8 > len(data):
            raise ValueError("truncated raw frame header")
        h, w = struct.unpack_from("<HH", data, pos + 4)
        n = h * w * 3 * 4
        body = data[pos + 8:pos + 8 + n]
        if len(body) != n:
            raise ValueError("truncated raw frame body")
        frames.append(np.frombuffer(body, dtype="<f4").reshape(h, w, 3).astype(np.float32))
        pos += 8 + n
    return frames


def write_raw(path, img: np.ndarray) -> None:
    Path(path).write_bytes(encode_raw_frame(img))


def _grid_from_dir(path: Path) -> dict[tuple[int, int], Path]:
    found = {}
    for entry in path.iterdir():
        m = VIEW_PATTERN.match(entry.name)
        if m:
            found[int(m.group(1)), int(m.group(2))] = entry
    return found


def load_lightfield(path) -> LightField:
    """Load a light field from a view directory or a multi-frame ``LFRW`` file.

    A raw file must be accompanied by a ``<file>.json`` sidecar (as written
    by :func:`export_pvs`) giving the grid size and frame order.
    """
    path = Path(path)
    if not path.exists():
        raise LightFieldIOError(f"input {path} does not exist")
    if path.is_file():
        return import_pvs(path)
    found = _grid_from_dir(path)
    if not found:
        raise LightFieldIOError(f"no view_UU_VV.ppm files in {path}")
    rows = max(u for u, _ in found) + 1
    cols = max(v for _, v in found) + 1
    views, shape = [], None
    for u in range(rows):
        for v in range(cols):
            if (u, v) not in found:
                raise LightFieldIOError(f"missing view ({u},{v}) in {path}")
            try:
                img = load_image(found[u, v])
            except (OSError, ValueError) as exc:
                raise LightFieldIOError(f"unreadable view ({u},{v}): {exc}") from exc
            if shape is None:
                shape = img.shape
            elif img.shape != shape:
                raise LightFieldIOError(
                    f"view ({u},{v}) has size {img.shape[:2]}, expected {shape[:2]}")
            views.append(img)
    return LightField(np.stack(views).reshape(rows, cols, *shape))


def _atomic_dir(final: Path):
    final.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{final.name}.", dir=final.parent))


def _commit_dir(tmp: Path, final: Path) -> None:
    if final.exists():
        shutil.rmtree(final)
    os.replace(tmp, final)


def save_lightfield(lf: LightField, path, bitdepth: int = 8, extra_files=None) -> None:
    """Write ``view_UU_VV.ppm`` files; the directory appears atomically.

    ``extra_files`` maps file names to bytes written alongside the views.
    """
    path = Path(path)
    tmp = _atomic_dir(path)
    try:
        for u in range(lf.U):
            for v in range(lf.V):
                write_ppm(tmp / view_filename(u, v), lf.views[u, v], bitdepth)
        for name, data in (extra_files or {}).items():
            (tmp / name).write_bytes(data)
        os.chmod(tmp, 0o755)
        _commit_dir(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def export_pvs(lf: LightField, path) -> list[AngularCoord]:
    """Write all views in serpentine order as one ``LFRW`` stream plus ``<path>.json``."""
    path = Path(path)
    order = serpentine_order(lf.U, lf.V)
    payload = b"".join(encode_raw_frame(lf.views[c.u, c.v]) for c in order)
    sidecar = {
        "format": "LFRW",
        "U": lf.U, "V": lf.V, "H": lf.H, "W": lf.W,
        "order": [[c.u, c.v] for c in order],
    }
    atomic_write_bytes(path, payload)
    atomic_write_bytes(sidecar_path(path), (json.dumps(sidecar, indent=1) + "\n").encode())
    return order


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def import_pvs(path) -> LightField:
    path = Path(path)
    side = sidecar_path(path)
    if not side.exists():
        raise LightFieldIOError(f"raw stream {path} has no {side.name} sidecar")
    meta = json.loads(side.read_text())
    try:
        frames = read_raw_frames(path)
    except ValueError as exc:
        raise LightFieldIOError(str(exc)) from exc
    order = [tuple(c) for c in meta["order"]]
    if len(frames) != len(order) or len(order) != meta["U"] * meta["V"]:
        raise LightFieldIOError(f"{path}: {len(frames)} frames for {len(order)} listed views")
    views = np.zeros((meta["U"], meta["V"], meta["H"], meta["W"], 3), dtype=np.float32)
    for (u, v), frame in zip(order, frames):
        if frame.shape != views.shape[2:]:
            raise LightFieldIOError(f"view ({u},{v}) has size {frame.shape[:2]}")
        views[u, v] = frame
    return LightField(views)
