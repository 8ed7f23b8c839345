from .gradcheck import analytic_gradient, central_difference, finite_difference_check, relative_error
from .ops import (
    abs_mean, add, clamp01, conv2d, crop2d, div, linear, mean, mul, pixel_shuffle,
    pixel_unshuffle_array, reshape, separable_filter, sigmoid, silu, sub,
)
from .ops import sum as sum_  # noqa: F401
from .tensor import NumericError, Tape, TapeError, Tensor, backward, precision

__all__ = [
    "Tensor", "Tape", "TapeError", "NumericError", "backward", "precision",
    "finite_difference_check", "analytic_gradient", "central_difference", "relative_error",
    "abs_mean", "add", "clamp01", "conv2d", "crop2d", "div",
    "linear", "mean", "mul", "pixel_shuffle", "pixel_unshuffle_array", "reshape",
    "separable_filter", "sigmoid", "silu", "sub", "sum_",
]
