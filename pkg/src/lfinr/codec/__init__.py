from .bitstream import (
    BadMagic, BitstreamError, ChecksumMismatch, HeaderInconsistent, TruncatedPayload,
    VersionMismatch, dequantized_model, deserialize, quantize_model, serialize,
)
from .entropy import BACKEND, TruncatedStream, arith_decode, arith_encode
from .prune import apply_masks, global_masks, lamp_layer, lamp_scores, prune_global, sparsity
from .quant import QuantRecord, dequantize, quantize_tensor

__all__ = [
    "BACKEND", "BadMagic", "BitstreamError", "ChecksumMismatch", "HeaderInconsistent",
    "QuantRecord", "TruncatedPayload", "TruncatedStream", "VersionMismatch", "apply_masks",
    "arith_decode", "arith_encode", "dequantize", "dequantized_model", "deserialize",
    "global_masks", "lamp_layer", "lamp_scores", "prune_global", "quantize_model",
    "quantize_tensor", "serialize", "sparsity",
]
