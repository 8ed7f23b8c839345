"""Bitstream container: model header plus entropy-coded, quantized tensors.

Byte layout (multi-byte integers little-endian)::

    "LFIN" | version u8 (=1)
    | U u16 | V u16 | H u16 | W u16 | out_H u16 | out_W u16
    | pe.b f32 | pe.L u8 | mlp_hidden u16 | h0 u8 | w0 u8 | c0 u16
    | n_blocks u8 | n_blocks x {factor u8, channels u16}
    | quant_bits u8 | n_tensors u16
    | n_tensors x {
        id u16 | ndim u8 | dims u32 x ndim | pruned u8 | min f32 | max f32
        | [mask_len u32 | mask bytes]            (only when pruned = 1)
        | sym_len u32 | symbol bytes }
    | crc32 u32 over every preceding byte

``H, W`` are the cropped SAI size. Tensors appear in the canonical order of
:func:`lfinr.model.parameter_shapes` and ``id`` is the index in that order.
Mask bytes code one bit per element (1 = kept) with the adaptive coder over
alphabet 2; symbol bytes code the kept elements' quantization symbols over
alphabet ``2**quant_bits``.
"""
from __future__ import annotations

import struct
import zlib

import numpy as np

from ..autodiff import Tensor
from ..model import Block, ConfigError, Model, ModelConfig, PositionalEncodingConfig, parameter_shapes
from .entropy import TruncatedStream, arith_decode, arith_encode
from .quant import QuantRecord, dequantize, quantize_tensor

MAGIC = b"LFIN"
VERSION = 1


class BitstreamError(ValueError):
    """Base class for undecodable streams."""


class BadMagic(BitstreamError):
    pass


class VersionMismatch(BitstreamError):
    pass


class TruncatedPayload(BitstreamError):
    pass


class HeaderInconsistent(BitstreamError):
    pass


class ChecksumMismatch(BitstreamError):
    pass


def quantize_model(model: Model, masks: dict[str, np.ndarray], bits: int) -> dict[str, QuantRecord]:
    recs = {}
    for name, t in model.params.items():
        recs[name] = quantize_tensor(t.data, bits, masks.get(name))
    return recs


def dequantized_state(records: dict[str, QuantRecord], dtype=np.float32) -> dict[str, np.ndarray]:
    return {k: dequantize(r).astype(dtype) for k, r in records.items()}


def dequantized_model(model: Model, masks: dict[str, np.ndarray], bits: int) -> Model:
    """The parameters a decoder would reconstruct, without going through bytes."""
    return model.with_state(dequantized_state(quantize_model(model, masks, bits)))


def _pack_header(cfg: ModelConfig, bits: int, n_tensors: int) -> bytes:
    if cfg.output_activation != "sigmoid" or not cfg.residual_post_activation:
        raise ValueError("bitstream v1 only carries the default activation switches")
    try:
        parts = [
            MAGIC, struct.pack("<B", VERSION),
            struct.pack("<6H", cfg.U, cfg.V, cfg.crop_H, cfg.crop_W, cfg.out_H, cfg.out_W),
            struct.pack("<fBHBBHB", cfg.pe.b, cfg.pe.L, cfg.mlp_hidden, cfg.h0, cfg.w0, cfg.c0,
                        len(cfg.blocks)),
        ]
        parts += [struct.pack("<BH", b.factor, b.channels) for b in cfg.blocks]
        parts.append(struct.pack("<BH", bits, n_tensors))
    except struct.error as exc:
        raise ValueError(f"config does not fit the header field widths: {exc}") from exc
    return b"".join(parts)


def serialize(model: Model, masks: dict[str, np.ndarray], bits: int = 8) -> bytes:
    cfg = model.config
    shapes = parameter_shapes(cfg)
    for name, m in masks.items():
        if name not in shapes or tuple(m.shape) != shapes[name]:
            raise ValueError(f"mask {name} does not match the model")
    records = quantize_model(model, masks, bits)
    out = [_pack_header(cfg, bits, len(shapes))]
    for tid, name in enumerate(shapes):
        rec = records[name]
        out.append(struct.pack("<HB", tid, len(rec.shape)))
        out.append(struct.pack(f"<{len(rec.shape)}I", *rec.shape))
        pruned = rec.mask is not None
        out.append(struct.pack("<Bff", int(pruned), rec.vmin, rec.vmax))
        if pruned:
            mask_bytes = arith_encode(rec.mask.ravel(), 2)
            out.append(struct.pack("<I", len(mask_bytes)) + mask_bytes)
        sym_bytes = arith_encode(rec.symbols, 1 << bits)
        out.append(struct.pack("<I", len(sym_bytes)) + sym_bytes)
    body = b"".join(out)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise TruncatedPayload(f"stream ends inside a field at byte {self.pos}")
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals

    def blob(self) -> bytes:
        (n,) = self.take("<I")
        if self.pos + n > len(self.data):
            raise TruncatedPayload(f"payload of {n} bytes at {self.pos} runs past the end")
        b = self.data[self.pos:self.pos + n]
        self.pos += n
        return b


def read_header(data: bytes) -> tuple[ModelConfig, int, int, _Reader]:
    if data[:4] != MAGIC:
        raise BadMagic(f"bad magic {data[:4]!r}")
    r = _Reader(data)
    r.pos = 4
    (version,) = r.take("<B")
    if version != VERSION:
        raise VersionMismatch(f"stream version {version}, decoder supports {VERSION}")
    U, V, H, W, out_h, out_w = r.take("<6H")
    b, L, hidden, h0, w0, c0, n_blocks = r.take("<fBHBBHB")
    blocks = tuple(Block(*r.take("<BH")) for _ in range(n_blocks))
    bits, n_tensors = r.take("<BH")
    try:
        cfg = ModelConfig(pe=PositionalEncodingConfig(b=b, L=L), mlp_hidden=hidden, h0=h0, w0=w0,
                          c0=c0, blocks=blocks, out_H=out_h, out_W=out_w, crop_H=H, crop_W=W,
                          U=U, V=V)
        cfg.validate()
    except (ConfigError, TypeError) as exc:
        raise HeaderInconsistent(f"invalid model header: {exc}") from exc
    if not 1 <= bits <= 16:
        raise HeaderInconsistent(f"quantization bits {bits} out of range")
    return cfg, bits, n_tensors, r


def deserialize(data: bytes) -> tuple[Model, dict[str, np.ndarray], int]:
    """Rebuild ``(model, masks, bits)``; raises a :class:`BitstreamError` subclass on bad input."""
    data = bytes(data)
    if len(data) < 4:
        raise TruncatedPayload("stream shorter than its magic")
    cfg, bits, n_tensors, r = read_header(data)
    shapes = parameter_shapes(cfg)
    if n_tensors != len(shapes):
        raise HeaderInconsistent(f"{n_tensors} tensors listed, config implies {len(shapes)}")

    raw = []
    for expect_id, (name, shape) in enumerate(shapes.items()):
        tid, ndim = r.take("<HB")
        dims = r.take(f"<{ndim}I")
        if tid != expect_id or tuple(dims) != shape:
            raise HeaderInconsistent(f"tensor {tid} {dims} does not match {name} {shape}")
        pruned, vmin, vmax = r.take("<Bff")
        if pruned > 1 or not (np.isfinite(vmin) and np.isfinite(vmax)) or vmin > vmax:
            raise HeaderInconsistent(f"tensor {name}: bad range or pruned flag")
        mask_bytes = r.blob() if pruned else None
        sym_bytes = r.blob()
        raw.append((name, shape, vmin, vmax, mask_bytes, sym_bytes))
    body_end = r.pos
    (crc,) = r.take("<I")
    if r.pos != len(data):
        raise HeaderInconsistent(f"{len(data) - r.pos} trailing bytes after checksum")
    if zlib.crc32(data[:body_end]) != crc:
        raise ChecksumMismatch("payload checksum mismatch")

    state, masks = {}, {}
    try:
        for name, shape, vmin, vmax, mask_bytes, sym_bytes in raw:
            n = int(np.prod(shape))
            mask = None
            if mask_bytes is not None:
                mask = arith_decode(mask_bytes, n, 2).astype(np.uint8).reshape(shape)
                masks[name] = mask
            kept = n if mask is None else int(mask.sum())
            symbols = arith_decode(sym_bytes, kept, 1 << bits)
            rec = QuantRecord(shape, float(vmin), float(vmax), bits, symbols, mask)
            state[name] = dequantize(rec).astype(np.float32)
    except TruncatedStream as exc:
        raise TruncatedPayload(f"tensor payload: {exc}") from exc
    params = {k: Tensor(v, requires_grad=True) for k, v in state.items()}
    return Model(cfg, params), masks, bits
