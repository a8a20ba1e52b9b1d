"""Pure-Python sketch kernel.

Reference backend for the compiled extension in ``_cms.pyx``. Both backends
must produce bit-identical results: fingerprints are FNV-1a folds over
64-bit lanes, row indices come from a multiply-shift hash with explicit
wraparound at 2**64, and counters are signed 64-bit.

Scalar operations here cost a Python-level loop over the sketch depth;
the batch entry points (``store_many`` / ``retrieve_many``) are vectorised
with numpy and stay usable even without the extension.
"""
from __future__ import annotations

import numpy as np

BACKEND = "pure"

MASK64 = 0xFFFFFFFFFFFFFFFF
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
# Lane prepended to MinHash signature fingerprints so a signature can never
# alias a raw suffix key of the same integer content.
SIG_TAG = 0x9E3779B97F4A7C15


def fingerprint(values) -> int:
    """FNV-1a fold over a sequence of non-negative ints, one 64-bit lane each."""
    fp = FNV_OFFSET
    for v in values:
        fp = ((fp ^ (int(v) + 1)) * FNV_PRIME) & MASK64
    return fp


def row_index(fp: int, a: int, b: int, w: int) -> int:
    """Multiply-shift row hash: high 32 bits of a*fp+b (mod 2**64), then mod w."""
    return (((a * fp + b) & MASK64) >> 32) % w


def trace_layer_fps(trace: np.ndarray, depth: int) -> np.ndarray:
    """Window fingerprints for every position of a trace.

    Row ``pos`` holds fingerprints of ``trace[pos:pos+k]`` for k = 1..depth.
    Past the end of the trace the fingerprint of the remaining (shorter)
    window repeats, so truncated suffixes land in every higher layer.
    """
    n = len(trace)
    out = np.empty((n, depth), dtype=np.uint64)
    for pos in range(n):
        fp = FNV_OFFSET
        for k in range(depth):
            i = pos + k
            if i < n:
                fp = ((fp ^ (int(trace[i]) + 1)) * FNV_PRIME) & MASK64
            out[pos, k] = fp
    return out


def minhash_signature(symbols, seeds_a: np.ndarray, seeds_b: np.ndarray) -> np.ndarray:
    """Per-hash minima over the symbol set; duplicates collapse for free."""
    lm = len(seeds_a)
    mins = np.full(lm, MASK64, dtype=np.uint64)
    for s in symbols:
        x = int(s) + 1
        for i in range(lm):
            h = (int(seeds_a[i]) * x + int(seeds_b[i])) & MASK64
            if h < mins[i]:
                mins[i] = h
    return mins


def signature_fingerprint(signature: np.ndarray) -> int:
    fp = FNV_OFFSET
    fp = ((fp ^ (SIG_TAG + 1)) * FNV_PRIME) & MASK64
    for v in signature:
        fp = ((fp ^ (int(v) + 1)) * FNV_PRIME) & MASK64
    return fp


def trace_minhash_fps(
    trace: np.ndarray,
    window: int,
    lm: int,
    seeds_a: np.ndarray,
    seeds_b: np.ndarray,
) -> np.ndarray:
    """Reduced-layer key per position.

    The window at ``pos`` is ``trace[pos:pos+window]`` clipped at the trace
    end. Windows longer than ``lm`` are hashed down to a MinHash signature
    fingerprint over their symbol set; short windows keep their raw
    fingerprint.
    """
    n = len(trace)
    out = np.empty(n, dtype=np.uint64)
    for pos in range(n):
        end = min(pos + window, n)
        if end - pos > lm:
            sig = minhash_signature(trace[pos:end], seeds_a, seeds_b)
            out[pos] = signature_fingerprint(sig)
        else:
            out[pos] = fingerprint(trace[pos:end])
    return out


class RawSketch:
    """d x w counter matrix with per-row multiply-shift hashing.

    Counters are int64 so corruption (a subtraction driving a cell negative)
    is representable and checkable by the caller.
    """

    __slots__ = ("w", "d", "seeds_a", "seeds_b", "cells", "total")

    def __init__(self, w: int, d: int, seeds_a: np.ndarray, seeds_b: np.ndarray):
        self.w = int(w)
        self.d = int(d)
        self.seeds_a = np.asarray(seeds_a, dtype=np.uint64)
        self.seeds_b = np.asarray(seeds_b, dtype=np.uint64)
        self.cells = np.zeros((self.d, self.w), dtype=np.int64)
        self.total = 0

    def store_fp(self, fp: int) -> None:
        cells = self.cells
        for j in range(self.d):
            cells[j, row_index(fp, int(self.seeds_a[j]), int(self.seeds_b[j]), self.w)] += 1
        self.total += 1

    def retrieve_fp(self, fp: int) -> int:
        cells = self.cells
        best = None
        for j in range(self.d):
            v = cells[j, row_index(fp, int(self.seeds_a[j]), int(self.seeds_b[j]), self.w)]
            if best is None or v < best:
                best = v
        return int(best)

    def _rows(self, fps: np.ndarray) -> np.ndarray:
        fps = np.asarray(fps, dtype=np.uint64)
        a = self.seeds_a[:, None]
        b = self.seeds_b[:, None]
        mixed = (a * fps[None, :] + b) >> np.uint64(32)
        return (mixed % np.uint64(self.w)).astype(np.int64)

    def store_many(self, fps: np.ndarray) -> None:
        rows = self._rows(fps)
        for j in range(self.d):
            np.add.at(self.cells[j], rows[j], 1)
        self.total += len(fps)

    def retrieve_many(self, fps: np.ndarray) -> np.ndarray:
        if len(fps) == 0:
            return np.zeros(0, dtype=np.int64)
        rows = self._rows(fps)
        stacked = self.cells[np.arange(self.d)[:, None], rows]
        return stacked.min(axis=0)

    def iadd(self, other: "RawSketch") -> None:
        self.cells += other.cells
        self.total += other.total

    def isub(self, other: "RawSketch") -> None:
        self.cells -= other.cells
        self.total -= other.total

    def clone(self) -> "RawSketch":
        fresh = RawSketch(self.w, self.d, self.seeds_a, self.seeds_b)
        fresh.cells[:] = self.cells
        fresh.total = self.total
        return fresh
