# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled adaptive range coder; byte-identical to ``_rangecoder_py``."""
from libc.stdlib cimport malloc, realloc, free
from libc.stdint cimport uint8_t, uint64_t, int64_t

import numpy as np
cimport numpy as cnp

from ._rangecoder_py import TruncatedStream, rescale_limit

cdef int64_t INCREMENT = 32
cdef uint64_t TOP = 1 << 24
cdef uint64_t MASK32 = 0xFFFFFFFF


cdef struct Model:
    int64_t n
    int64_t total
    int64_t limit
    int64_t top_step
    int64_t *freq
    int64_t *tree


cdef int model_init(Model *m, int64_t n) except -1:
    m.n = n
    m.total = n
    m.limit = rescale_limit(n)
    m.freq = <int64_t *> malloc(n * sizeof(int64_t))
    m.tree = <int64_t *> malloc((n + 1) * sizeof(int64_t))
    if m.freq == NULL or m.tree == NULL:
        raise MemoryError()
    cdef int64_t i
    for i in range(n):
        m.freq[i] = 1
    m.top_step = 1
    while m.top_step * 2 <= n:
        m.top_step *= 2
    model_build(m)
    return 0


cdef void model_free(Model *m):
    free(m.freq)
    free(m.tree)


cdef void model_build(Model *m) nogil:
    cdef int64_t i, j, k, n = m.n
    for i in range(n + 1):
        m.tree[i] = 0
    for i in range(n):
        j = i + 1
        m.tree[j] += m.freq[i]
        k = j + (j & -j)
        if k <= n:
            m.tree[k] += m.tree[j]


cdef inline int64_t model_cum(Model *m, int64_t s) nogil:
    cdef int64_t total = 0
    while s > 0:
        total += m.tree[s]
        s -= s & -s
    return total


cdef inline int64_t model_find(Model *m, int64_t count, int64_t *lo) nogil:
    cdef int64_t pos = 0, acc = 0, step = m.top_step, nxt
    while step:
        nxt = pos + step
        if nxt <= m.n and acc + m.tree[nxt] <= count:
            pos = nxt
            acc += m.tree[nxt]
        step >>= 1
    lo[0] = acc
    return pos


cdef inline void model_update(Model *m, int64_t s) nogil:
    cdef int64_t j = s + 1, i, total
    m.freq[s] += INCREMENT
    m.total += INCREMENT
    while j <= m.n:
        m.tree[j] += INCREMENT
        j += j & -j
    if m.total > m.limit:
        total = 0
        for i in range(m.n):
            m.freq[i] = (m.freq[i] + 1) >> 1
            total += m.freq[i]
        m.total = total
        model_build(m)


cdef struct Out:
    uint8_t *buf
    Py_ssize_t size
    Py_ssize_t cap


cdef int out_put(Out *o, uint8_t b) except -1:
    cdef uint8_t *nb
    if o.size == o.cap:
        o.cap = o.cap * 2 + 64
        nb = <uint8_t *> realloc(o.buf, o.cap)
        if nb == NULL:
            raise MemoryError()
        o.buf = nb
    o.buf[o.size] = b
    o.size += 1
    return 0


cdef struct Enc:
    uint64_t low
    uint64_t rng
    uint64_t cache
    uint64_t cache_size


cdef int shift_low(Enc *e, Out *o) except -1:
    cdef uint64_t carry, temp
    if e.low < 0xFF000000 or e.low > MASK32:
        carry = e.low >> 32
        temp = e.cache
        while True:
            out_put(o, <uint8_t> ((temp + carry) & 0xFF))
            temp = 0xFF
            e.cache_size -= 1
            if e.cache_size == 0:
                break
        e.cache = (e.low >> 24) & 0xFF
    e.cache_size += 1
    e.low = (e.low & 0x00FFFFFF) << 8
    return 0


def encode(symbols, int64_t alphabet):
    cdef cnp.int64_t[::1] syms = np.ascontiguousarray(symbols, dtype=np.int64).ravel()
    cdef Py_ssize_t i, n = syms.shape[0]
    cdef int64_t s
    cdef uint64_t r
    cdef Model m
    cdef Out o
    cdef Enc e
    for i in range(n):
        if syms[i] < 0 or syms[i] >= alphabet:
            raise ValueError(f"symbol {syms[i]} outside alphabet of size {alphabet}")
    model_init(&m, alphabet)
    o.buf = NULL
    o.size = 0
    o.cap = 0
    e.low = 0
    e.rng = MASK32
    e.cache = 0
    e.cache_size = 1
    try:
        for i in range(n):
            s = syms[i]
            r = e.rng // <uint64_t> m.total
            e.low += r * <uint64_t> model_cum(&m, s)
            e.rng = r * <uint64_t> m.freq[s]
            while e.rng < TOP:
                e.rng <<= 8
                shift_low(&e, &o)
            model_update(&m, s)
        for i in range(5):
            shift_low(&e, &o)
        return bytes(o.buf[:o.size]) if o.size else b""
    finally:
        free(o.buf)
        model_free(&m)


def decode(const uint8_t[::1] data, Py_ssize_t count, int64_t alphabet):
    cdef Py_ssize_t n = data.shape[0], pos = 5, i
    cdef uint64_t code = 0, rng = MASK32, r, target
    cdef int64_t s, lo
    cdef Model m
    if n < 5:
        raise TruncatedStream("range-coded stream shorter than its 5-byte preamble")
    for i in range(1, 5):
        code = (code << 8) | data[i]
    out = np.empty(count, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    model_init(&m, alphabet)
    try:
        for i in range(count):
            r = rng // <uint64_t> m.total
            target = code // r
            if target >= <uint64_t> m.total:
                target = m.total - 1
            s = model_find(&m, <int64_t> target, &lo)
            code -= r * <uint64_t> lo
            rng = r * <uint64_t> m.freq[s]
            while rng < TOP:
                if pos >= n:
                    raise TruncatedStream("range-coded stream ended early")
                code = ((code << 8) | data[pos]) & MASK32
                pos += 1
                rng <<= 8
            model_update(&m, s)
            res[i] = s
    finally:
        model_free(&m)
    return out
