import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lfinr.codec import QuantRecord, dequantize, quantize_tensor


def test_eq4_examples():
    values = np.array([-1.0, 0.0, 1.0])
    rec = quantize_tensor(values, 8)
    assert rec.scale == 2 / 256 == 0.0078125
    np.testing.assert_array_equal(rec.symbols, [0, 128, 255])
    # Unclamped, the maximum would map to 2**8.
    assert (1.0 - -1.0) / rec.scale == 256
    out = dequantize(rec)
    assert out[1] == 0.0
    assert out[0] == -1.0
    assert out[2] == 0.9921875
    assert 1.0 - out[2] == rec.scale


def test_constant_tensor():
    rec = quantize_tensor(np.full(5, 0.25), 8)
    assert rec.scale == 1.0
    assert not rec.symbols.any()
    np.testing.assert_array_equal(dequantize(rec), np.full(5, 0.25))


def test_masked_positions_and_range():
    values = np.array([[5.0, -3.0], [0.5, 100.0]])
    mask = np.array([[1, 0], [1, 0]])
    rec = quantize_tensor(values, 4, mask)
    assert (rec.vmin, rec.vmax) == (0.5, 5.0)
    assert rec.symbols.size == 2
    out = dequantize(rec)
    assert out[0, 1] == 0.0 and out[1, 1] == 0.0
    assert out[1, 0] == 0.5


def test_errors():
    with pytest.raises(ValueError):
        quantize_tensor(np.array([np.nan]), 8)
    with pytest.raises(ValueError):
        quantize_tensor(np.zeros(2), 0)
    with pytest.raises(ValueError):
        quantize_tensor(np.zeros(2), 17)
    bad = QuantRecord((2,), 0.0, 1.0, 4, np.array([0, 16]))
    with pytest.raises(ValueError):
        dequantize(bad)
    with pytest.raises(ValueError):
        dequantize(QuantRecord((3,), 0.0, 1.0, 4, np.array([0, 1])))


def test_minmax_are_float32():
    values = np.array([0.1, 0.7], dtype=np.float64)
    rec = quantize_tensor(values, 8)
    assert rec.vmin == float(np.float32(0.1))
    assert rec.vmax == float(np.float32(0.7))


@given(arrays(np.float32, st.integers(1, 64), elements=st.floats(-4, 4, width=32)),
       st.sampled_from([1, 2, 4, 8, 12, 16]))
def test_error_bound_property(values, bits):
    rec = quantize_tensor(values, bits)
    err = np.abs(dequantize(rec) - values.astype(np.float64))
    s = rec.scale
    top = rec.symbols == (1 << bits) - 1
    tol = 1e-9 * max(1.0, abs(rec.vmax), abs(rec.vmin))
    assert np.all(err[~top] <= s / 2 + tol)
    assert np.all(err[top] <= s + tol)
    assert rec.symbols.min() >= 0 and rec.symbols.max() < (1 << bits)
