"""Pure-Python adaptive range coder (fallback for the Cython kernel).

Both implementations must produce identical bytes; see ``entropy.py`` for
the model and stream format.
"""
from __future__ import annotations

import numpy as np

INCREMENT = 32
TOP = 1 << 24
MASK32 = 0xFFFFFFFF


class TruncatedStream(ValueError):
    pass


def rescale_limit(alphabet: int) -> int:
    return max(1 << 16, 2 * alphabet)


class _Model:
    """Order-0 frequency table with a Fenwick tree for cumulative counts."""

    def __init__(self, n: int):
        self.n = n
        self.freq = [1] * n
        self.total = n
        self.limit = rescale_limit(n)
        self._build()

    def _build(self):
        n = self.n
        tree = [0] * (n + 1)
        for i in range(n):
            j = i + 1
            tree[j] += self.freq[i]
            k = j + (j & -j)
            if k <= n:
                tree[k] += tree[j]
        self.tree = tree
        step = 1
        while step * 2 <= n:
            step *= 2
        self.top_step = step

    def cum(self, s: int) -> int:
        """Sum of frequencies of symbols ``< s``."""
        tree, total = self.tree, 0
        while s > 0:
            total += tree[s]
            s -= s & -s
        return total

    def find(self, count: int):
        """Symbol ``s`` with ``cum(s) <= count < cum(s + 1)``; returns ``(s, cum(s))``."""
        tree, n = self.tree, self.n
        pos, acc, step = 0, 0, self.top_step
        while step:
            nxt = pos + step
            if nxt <= n and acc + tree[nxt] <= count:
                pos = nxt
                acc += tree[nxt]
            step >>= 1
        return pos, acc

    def update(self, s: int):
        self.freq[s] += INCREMENT
        self.total += INCREMENT
        tree, n = self.tree, self.n
        j = s + 1
        while j <= n:
            tree[j] += INCREMENT
            j += j & -j
        if self.total > self.limit:
            self.freq = [(f + 1) >> 1 for f in self.freq]
            self.total = sum(self.freq)
            self._build()


def encode(symbols, alphabet: int) -> bytes:
    model = _Model(alphabet)
    out = bytearray()
    low, rng = 0, MASK32
    cache, cache_size = 0, 1

    def shift_low():
        nonlocal low, cache, cache_size
        if low < 0xFF000000 or low > MASK32:
            carry = low >> 32
            temp = cache
            while True:
                out.append((temp + carry) & 0xFF)
                temp = 0xFF
                cache_size -= 1
                if cache_size == 0:
                    break
            cache = (low >> 24) & 0xFF
        cache_size += 1
        low = (low & 0x00FFFFFF) << 8

    for s in np.asarray(symbols, dtype=np.int64).ravel().tolist():
        if not 0 <= s < alphabet:
            raise ValueError(f"symbol {s} outside alphabet of size {alphabet}")
        r = rng // model.total
        low += r * model.cum(s)
        rng = r * model.freq[s]
        while rng < TOP:
            rng <<= 8
            shift_low()
        model.update(s)
    for _ in range(5):
        shift_low()
    return bytes(out)


def decode(data: bytes, count: int, alphabet: int) -> np.ndarray:
    model = _Model(alphabet)
    if len(data) < 5:
        raise TruncatedStream("range-coded stream shorter than its 5-byte preamble")
    code = int.from_bytes(data[1:5], "big")
    pos = 5
    rng = MASK32
    n = len(data)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        r = rng // model.total
        target = code // r
        if target >= model.total:
            target = model.total - 1
        s, lo = model.find(target)
        code -= r * lo
        rng = r * model.freq[s]
        while rng < TOP:
            if pos >= n:
                raise TruncatedStream("range-coded stream ended early")
            code = ((code << 8) | data[pos]) & MASK32
            pos += 1
            rng <<= 8
        model.update(s)
        out[i] = s
    return out
