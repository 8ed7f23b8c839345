"""Dense tensors recorded on a tape for reverse-mode differentiation.

Operations record themselves on the active :class:`Tape` (entered with a
``with`` block) whenever one of their inputs requires a gradient. Outside a
tape, the same operations run as plain numpy inference.
"""
from __future__ import annotations

import contextlib
import contextvars

import numpy as np

_ACTIVE_TAPE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar("tape", default=None)
_DEFAULT_DTYPE: contextvars.ContextVar[type] = contextvars.ContextVar("dtype", default=np.float32)


class NumericError(FloatingPointError):
    """An operation produced NaN/Inf or left its documented domain."""


class TapeError(RuntimeError):
    """Misuse of the tape lifecycle (e.g. a second backward without re-forward)."""


def default_dtype():
    return _DEFAULT_DTYPE.get()


@contextlib.contextmanager
def precision(dtype):
    """Run tensor creation in ``float32`` (default) or ``float64`` mode."""
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError("precision must be float32 or float64")
    token = _DEFAULT_DTYPE.set(dtype)
    try:
        yield
    finally:
        _DEFAULT_DTYPE.reset(token)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_tape", "_node_id")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, np.ndarray) and dtype is None and data.dtype in (np.float32, np.float64):
            arr = data
        else:
            arr = np.asarray(data, dtype=dtype or default_dtype())
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._tape = None
        self._node_id = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # Operator sugar; implementations live in ``ops``.
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(ops.as_tensor(other, like=self), self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(ops.as_tensor(other, like=self), self)

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)


class Tape:
    """Ordered record of executed operations.

    Each entry is ``(output, inputs, backward_fn)``; ``backward_fn`` maps the
    output gradient to a tuple of input gradients (``None`` for inputs that
    need none). Entries are appended in execution order, so the list is
    topologically sorted by construction.
    """

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple, object]] = []
        self.consumed = False
        self._token = None

    def __enter__(self):
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE_TAPE.reset(self._token)
        self._token = None
        return False

    def __len__(self):
        return len(self.nodes)

    def record(self, out: Tensor, inputs: tuple, backward_fn) -> None:
        if self.consumed:
            raise TapeError("tape already consumed by backward; start a new tape")
        out.requires_grad = True
        out._tape = self
        out._node_id = len(self.nodes)
        self.nodes.append((out, inputs, backward_fn))

    def clear(self):
        self.nodes = []
        self.consumed = True


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


def check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NumericError(f"{op} produced non-finite values")
    return arr


def make_result(data: np.ndarray, op: str, inputs: tuple, backward_fn) -> Tensor:
    """Wrap an op output, recording it on the active tape if needed."""
    check_finite(data, op)
    out = Tensor(data)
    tape = _ACTIVE_TAPE.get()
    if tape is not None and any(isinstance(t, Tensor) and t.requires_grad for t in inputs):
        tape.record(out, inputs, backward_fn)
    return out


def backward(loss: Tensor, params=None) -> None:
    """Populate ``.grad`` on every leaf tensor upstream of ``loss``.

    Gradients accumulate into existing ``.grad`` buffers (call
    ``zero_grad`` between steps). Tensors listed in ``params`` that are
    disconnected from ``loss`` receive an all-zero gradient. The tape is
    cleared afterwards; calling ``backward`` again on the same loss raises
    :class:`TapeError`.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
    tape = loss._tape
    if tape is None:
        if loss.requires_grad:
            # The loss is itself a leaf parameter.
            loss.grad = (loss.grad if loss.grad is not None else 0) + np.ones_like(loss.data)
            return
        raise TapeError("loss was not recorded on a tape")
    if tape.consumed:
        raise TapeError("backward already ran for this tape; re-run the forward pass")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for out, inputs, fn in reversed(tape.nodes):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        in_grads = fn(g)
        for t, gi in zip(inputs, in_grads):
            if gi is None or not isinstance(t, Tensor) or not t.requires_grad:
                continue
            if t._tape is tape:
                key = id(t)
                grads[key] = grads[key] + gi if key in grads else gi
            else:
                t.grad = gi.astype(t.data.dtype, copy=False) if t.grad is None else t.grad + gi
    tape.clear()
