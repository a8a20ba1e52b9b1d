# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled sketch kernel. Must match pdfastream._kernel.pure bit for bit."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

MASK64 = 0xFFFFFFFFFFFFFFFF
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
SIG_TAG = 0x9E3779B97F4A7C15

cdef cnp.uint64_t C_FNV_OFFSET = 0xCBF29CE484222325UL
cdef cnp.uint64_t C_FNV_PRIME = 0x100000001B3UL
cdef cnp.uint64_t C_SIG_TAG = 0x9E3779B97F4A7C15UL
cdef cnp.uint64_t C_MAX64 = 0xFFFFFFFFFFFFFFFFUL


cdef inline cnp.uint64_t fnv_step(cnp.uint64_t fp, cnp.uint64_t lane) nogil:
    return (fp ^ (lane + 1UL)) * C_FNV_PRIME


cdef inline Py_ssize_t c_row(cnp.uint64_t fp, cnp.uint64_t a, cnp.uint64_t b,
                             cnp.uint64_t w) nogil:
    return <Py_ssize_t>(((a * fp + b) >> 32) % w)


def fingerprint(values):
    cdef cnp.uint64_t fp = C_FNV_OFFSET
    for v in values:
        fp = fnv_step(fp, <cnp.uint64_t>int(v))
    return int(fp)


def row_index(fp, a, b, w):
    return int(c_row(<cnp.uint64_t>fp, <cnp.uint64_t>a, <cnp.uint64_t>b,
                     <cnp.uint64_t>w))


def trace_layer_fps(trace, int depth):
    cdef cnp.uint64_t[::1] t = np.ascontiguousarray(trace, dtype=np.uint64)
    cdef Py_ssize_t n = t.shape[0]
    out_arr = np.empty((n, depth), dtype=np.uint64)
    cdef cnp.uint64_t[:, ::1] out = out_arr
    cdef Py_ssize_t pos, k, i
    cdef cnp.uint64_t fp
    with nogil:
        for pos in range(n):
            fp = C_FNV_OFFSET
            for k in range(depth):
                i = pos + k
                if i < n:
                    fp = fnv_step(fp, t[i])
                out[pos, k] = fp
    return out_arr


def minhash_signature(symbols, seeds_a, seeds_b):
    cdef cnp.uint64_t[::1] sa = np.ascontiguousarray(seeds_a, dtype=np.uint64)
    cdef cnp.uint64_t[::1] sb = np.ascontiguousarray(seeds_b, dtype=np.uint64)
    cdef cnp.uint64_t[::1] syms = np.ascontiguousarray(
        np.fromiter((int(s) for s in symbols), dtype=np.uint64))
    cdef Py_ssize_t lm = sa.shape[0]
    out_arr = np.full(lm, MASK64, dtype=np.uint64)
    cdef cnp.uint64_t[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef cnp.uint64_t h, x
    with nogil:
        for j in range(syms.shape[0]):
            x = syms[j] + 1UL
            for i in range(lm):
                h = sa[i] * x + sb[i]
                if h < out[i]:
                    out[i] = h
    return out_arr


def signature_fingerprint(signature):
    cdef cnp.uint64_t[::1] sig = np.ascontiguousarray(signature, dtype=np.uint64)
    cdef cnp.uint64_t fp = fnv_step(C_FNV_OFFSET, C_SIG_TAG)
    cdef Py_ssize_t i
    for i in range(sig.shape[0]):
        fp = fnv_step(fp, sig[i])
    return int(fp)


def trace_minhash_fps(trace, int window, int lm, seeds_a, seeds_b):
    cdef cnp.uint64_t[::1] t = np.ascontiguousarray(trace, dtype=np.uint64)
    cdef cnp.uint64_t[::1] sa = np.ascontiguousarray(seeds_a, dtype=np.uint64)
    cdef cnp.uint64_t[::1] sb = np.ascontiguousarray(seeds_b, dtype=np.uint64)
    cdef Py_ssize_t n = t.shape[0]
    cdef Py_ssize_t nh = sa.shape[0]
    out_arr = np.empty(n, dtype=np.uint64)
    cdef cnp.uint64_t[::1] out = out_arr
    mins_arr = np.empty(nh, dtype=np.uint64)
    cdef cnp.uint64_t[::1] mins = mins_arr
    cdef Py_ssize_t pos, end, i, j
    cdef cnp.uint64_t fp, h, x
    with nogil:
        for pos in range(n):
            end = pos + window
            if end > n:
                end = n
            if end - pos > lm:
                for i in range(nh):
                    mins[i] = C_MAX64
                for j in range(pos, end):
                    x = t[j] + 1UL
                    for i in range(nh):
                        h = sa[i] * x + sb[i]
                        if h < mins[i]:
                            mins[i] = h
                fp = fnv_step(C_FNV_OFFSET, C_SIG_TAG)
                for i in range(nh):
                    fp = fnv_step(fp, mins[i])
            else:
                fp = C_FNV_OFFSET
                for j in range(pos, end):
                    fp = fnv_step(fp, t[j])
            out[pos] = fp
    return out_arr


cdef class RawSketch:
    """d x w counter matrix with per-row multiply-shift hashing."""

    cdef public int w
    cdef public int d
    cdef public object seeds_a
    cdef public object seeds_b
    cdef public object cells
    cdef public long long total
    cdef cnp.uint64_t[::1] _sa
    cdef cnp.uint64_t[::1] _sb
    cdef cnp.int64_t[:, ::1] _cells

    def __init__(self, int w, int d, seeds_a, seeds_b):
        self.w = w
        self.d = d
        self.seeds_a = np.ascontiguousarray(seeds_a, dtype=np.uint64)
        self.seeds_b = np.ascontiguousarray(seeds_b, dtype=np.uint64)
        self.cells = np.zeros((d, w), dtype=np.int64)
        self.total = 0
        self._sa = self.seeds_a
        self._sb = self.seeds_b
        self._cells = self.cells

    def store_fp(self, fp):
        cdef cnp.uint64_t f = <cnp.uint64_t>fp
        cdef Py_ssize_t j
        with nogil:
            for j in range(self.d):
                self._cells[j, c_row(f, self._sa[j], self._sb[j],
                                     <cnp.uint64_t>self.w)] += 1
        self.total += 1

    def retrieve_fp(self, fp):
        cdef cnp.uint64_t f = <cnp.uint64_t>fp
        cdef cnp.int64_t best = 0
        cdef cnp.int64_t v
        cdef Py_ssize_t j
        with nogil:
            for j in range(self.d):
                v = self._cells[j, c_row(f, self._sa[j], self._sb[j],
                                         <cnp.uint64_t>self.w)]
                if j == 0 or v < best:
                    best = v
        return int(best)

    def store_many(self, fps):
        cdef cnp.uint64_t[::1] f = np.ascontiguousarray(fps, dtype=np.uint64)
        cdef Py_ssize_t i, j
        with nogil:
            for i in range(f.shape[0]):
                for j in range(self.d):
                    self._cells[j, c_row(f[i], self._sa[j], self._sb[j],
                                         <cnp.uint64_t>self.w)] += 1
        self.total += f.shape[0]

    def retrieve_many(self, fps):
        cdef cnp.uint64_t[::1] f = np.ascontiguousarray(fps, dtype=np.uint64)
        out_arr = np.empty(f.shape[0], dtype=np.int64)
        cdef cnp.int64_t[::1] out = out_arr
        cdef cnp.int64_t best, v
        cdef Py_ssize_t i, j
        with nogil:
            for i in range(f.shape[0]):
                best = 0
                for j in range(self.d):
                    v = self._cells[j, c_row(f[i], self._sa[j], self._sb[j],
                                             <cnp.uint64_t>self.w)]
                    if j == 0 or v < best:
                        best = v
                out[i] = best
        return out_arr

    def iadd(self, RawSketch other):
        cdef Py_ssize_t j, i
        with nogil:
            for j in range(self.d):
                for i in range(self.w):
                    self._cells[j, i] += other._cells[j, i]
        self.total += other.total

    def isub(self, RawSketch other):
        cdef Py_ssize_t j, i
        with nogil:
            for j in range(self.d):
                for i in range(self.w):
                    self._cells[j, i] -= other._cells[j, i]
        self.total -= other.total

    def clone(self):
        fresh = RawSketch(self.w, self.d, self.seeds_a, self.seeds_b)
        fresh.cells[:] = self.cells
        fresh.total = self.total
        return fresh
