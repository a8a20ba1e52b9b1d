"""Count-min sketches extended with a final counter plus merge arithmetic.

The sketch family here diverges from a textbook count-min sketch in three
ways that the learner depends on:

* a ``final_count`` attribute tracks how many traversing strings ended at
  the owning state,
* sketches of identical shape and seeds support element-wise ``+`` and
  ``-`` so state merges can be applied and undone exactly,
* long suffix keys can be reduced to MinHash signatures over their symbol
  set, capping the number of distinct keys per layer.

Keys are arbitrary int sequences; they are folded to 64-bit fingerprints
before hashing into rows (see ``pdfastream._kernel``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernel as K


class SketchMismatchError(ValueError):
    """Raised when combining sketches of different shape or seeds."""


class SketchCorruptionError(RuntimeError):
    """Raised when a subtraction drives a counter negative."""


def sketch_dimensions(beta: float, gamma: float) -> tuple[int, int]:
    """Width/depth giving overestimates of at most beta * total with
    probability at least 1 - gamma: w = ceil(e / beta), d = ceil(ln(1/gamma))."""
    if not 0.0 < beta <= math.e:
        raise ValueError(f"beta must be in (0, e], got {beta}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    w = math.ceil(math.e / beta)
    d = math.ceil(math.log(1.0 / gamma))
    return w, max(d, 1)


DEFAULT_W = 128
DEFAULT_D = 4


@dataclass(frozen=True)
class SketchSeeds:
    """Run-level hash seeds. Every sketch in a run shares these so that
    merge addition and subtraction stay aligned across states."""

    row_a: np.ndarray
    row_b: np.ndarray
    minhash_a: np.ndarray
    minhash_b: np.ndarray

    @staticmethod
    def generate(d: int, lm: int, seed: int) -> "SketchSeeds":
        rng = np.random.default_rng(seed)
        # odd multipliers keep the multiply-shift family well mixed
        def odd(n):
            return (rng.integers(0, 2**63, size=n, dtype=np.uint64) << np.uint64(1)) | np.uint64(1)

        return SketchSeeds(
            row_a=odd(d),
            row_b=rng.integers(0, 2**64, size=d, dtype=np.uint64),
            minhash_a=odd(max(lm, 1)),
            minhash_b=rng.integers(0, 2**64, size=max(lm, 1), dtype=np.uint64),
        )


class CountMinSketch:
    """Counter matrix with a final-count attribute and exact +/- merges."""

    __slots__ = ("raw", "final_count")

    def __init__(self, w: int, d: int, seeds: SketchSeeds | None = None, seed: int = 0):
        if w < 1 or d < 1:
            raise ValueError(f"width and depth must be positive, got {w}, {d}")
        if seeds is None:
            seeds = SketchSeeds.generate(d, 1, seed)
        if len(seeds.row_a) < d:
            raise ValueError("seed vectors shorter than sketch depth")
        self.raw = K.RawSketch(w, d, seeds.row_a[:d], seeds.row_b[:d])
        self.final_count = 0

    @property
    def width(self) -> int:
        return self.raw.w

    @property
    def depth(self) -> int:
        return self.raw.d

    @property
    def cells(self) -> np.ndarray:
        return np.asarray(self.raw.cells)

    @property
    def total_inserted(self) -> int:
        return int(self.raw.total)

    def _compatible(self, other: "CountMinSketch") -> None:
        if self.width != other.width or self.depth != other.depth:
            raise SketchMismatchError(
                f"shape mismatch: {self.depth}x{self.width} vs {other.depth}x{other.width}"
            )
        if not (
            np.array_equal(self.raw.seeds_a, other.raw.seeds_a)
            and np.array_equal(self.raw.seeds_b, other.raw.seeds_b)
        ):
            raise SketchMismatchError("sketches hashed with different seeds")

    def store(self, key: Sequence[int]) -> None:
        self.raw.store_fp(K.fingerprint(key))

    def store_fp(self, fp: int) -> None:
        self.raw.store_fp(fp)

    def store_many_fps(self, fps: np.ndarray) -> None:
        self.raw.store_many(fps)

    def retrieve(self, key: Sequence[int]) -> int:
        return self.raw.retrieve_fp(K.fingerprint(key))

    def retrieve_fp(self, fp: int) -> int:
        return self.raw.retrieve_fp(fp)

    def retrieve_many_fps(self, fps: np.ndarray) -> np.ndarray:
        return self.raw.retrieve_many(fps)

    def increment_final(self, by: int = 1) -> None:
        self.final_count += by

    def iadd(self, other: "CountMinSketch") -> None:
        self._compatible(other)
        self.raw.iadd(other.raw)
        self.final_count += other.final_count

    def isub(self, other: "CountMinSketch") -> None:
        self._compatible(other)
        self.raw.isub(other.raw)
        self.final_count -= other.final_count
        if self.final_count < 0 or self.raw.total < 0 or self.cells.min() < 0:
            raise SketchCorruptionError("subtraction produced a negative count")

    def __add__(self, other: "CountMinSketch") -> "CountMinSketch":
        out = self.copy()
        out.iadd(other)
        return out

    def __sub__(self, other: "CountMinSketch") -> "CountMinSketch":
        out = self.copy()
        out.isub(other)
        return out

    def copy(self) -> "CountMinSketch":
        out = object.__new__(CountMinSketch)
        out.raw = self.raw.clone()
        out.final_count = self.final_count
        return out

    def row_sums(self) -> np.ndarray:
        return self.cells.sum(axis=1)

    def to_json(self) -> str:
        """Debug dump; format is documented but not stability-guaranteed."""
        return json.dumps(
            {
                "w": self.width,
                "d": self.depth,
                "seeds_a": [int(x) for x in np.asarray(self.raw.seeds_a)],
                "seeds_b": [int(x) for x in np.asarray(self.raw.seeds_b)],
                "cells": self.cells.tolist(),
                "final_count": self.final_count,
                "total_inserted": self.total_inserted,
            }
        )

    @staticmethod
    def from_json(text: str) -> "CountMinSketch":
        doc = json.loads(text)
        seeds = SketchSeeds(
            row_a=np.array(doc["seeds_a"], dtype=np.uint64),
            row_b=np.array(doc["seeds_b"], dtype=np.uint64),
            minhash_a=np.zeros(1, dtype=np.uint64),
            minhash_b=np.zeros(1, dtype=np.uint64),
        )
        out = CountMinSketch(doc["w"], doc["d"], seeds)
        out.raw.cells[:] = np.array(doc["cells"], dtype=np.int64)
        out.raw.total = doc["total_inserted"]
        out.final_count = doc["final_count"]
        return out


@dataclass(frozen=True)
class MinHashSignature:
    """Per-hash minima over a string's symbol set. Depends only on the set,
    so permutations and duplicates of symbols produce the same signature."""

    values: tuple[int, ...]

    def fingerprint(self) -> int:
        return K.signature_fingerprint(np.array(self.values, dtype=np.uint64))


def minhash_reduce(suffix: Sequence[int], lm: int, seeds: SketchSeeds) -> MinHashSignature:
    """Signature of ``lm`` minima for a suffix longer than ``lm``.

    Shorter suffixes are stored raw by the stack and should not be reduced.
    """
    if len(suffix) <= lm:
        raise ValueError(f"suffix of length {len(suffix)} not longer than lm={lm}")
    mins = K.minhash_signature(
        np.asarray(suffix, dtype=np.uint64), seeds.minhash_a[:lm], seeds.minhash_b[:lm]
    )
    return MinHashSignature(tuple(int(v) for v in mins))


class LayerRegistries:
    """Global per-layer sets of observed keys (fingerprints).

    The consistency routine iterates every string observed so far, not just
    keys local to the two states under comparison, so the registries are
    shared by all sketch stacks of a run.
    """

    def __init__(self, n_layers: int):
        self._seen: list[set[int]] = [set() for _ in range(n_layers)]
        self._order: list[list[int]] = [[] for _ in range(n_layers)]
        self._cache: list[np.ndarray | None] = [None] * n_layers

    @property
    def n_layers(self) -> int:
        return len(self._seen)

    def register(self, layer: int, fp: int) -> None:
        seen = self._seen[layer]
        if fp not in seen:
            seen.add(fp)
            self._order[layer].append(fp)
            self._cache[layer] = None

    def fps(self, layer: int) -> np.ndarray:
        cached = self._cache[layer]
        if cached is None:
            cached = np.array(self._order[layer], dtype=np.uint64)
            self._cache[layer] = cached
        return cached

    def size(self, layer: int) -> int:
        return len(self._order[layer])


class SketchStack:
    """Per-state stack of layered sketches over outgoing suffixes.

    Layer k (0-based index k-1) stores windows of length k starting right
    after the state; windows shorter than k (trace tail reached) land in
    layer k as their final-terminated remainder. With MinHash reduction
    active, layers above ``lm`` collapse into one reduced layer keyed by
    signature fingerprints.
    """

    __slots__ = ("layers", "config")

    def __init__(self, config: "StackConfig", seeds: SketchSeeds):
        self.config = config
        self.layers = [
            CountMinSketch(config.w, config.d, seeds) for _ in range(config.n_layers)
        ]

    def observe_row(self, layer_fps: np.ndarray, reduced_fp: int | None, ending: bool,
                    registries: LayerRegistries | None) -> None:
        """Record one visit: one key per layer, plus final counters when the
        traversing trace ends at the owning state."""
        cfg = self.config
        for k in range(cfg.n_raw):
            fp = int(layer_fps[k])
            self.layers[k].store_fp(fp)
            if registries is not None:
                registries.register(k, fp)
        if cfg.reduced:
            fp = int(reduced_fp)
            self.layers[-1].store_fp(fp)
            if registries is not None:
                registries.register(cfg.n_layers - 1, fp)
        if ending:
            for layer in self.layers:
                layer.increment_final()

    def iadd(self, other: "SketchStack") -> None:
        for mine, theirs in zip(self.layers, other.layers):
            mine.iadd(theirs)

    def isub(self, other: "SketchStack") -> None:
        for mine, theirs in zip(self.layers, other.layers):
            mine.isub(theirs)


@dataclass(frozen=True)
class StackConfig:
    """Layer layout shared by every stack of a run."""

    w: int
    d: int
    max_len: int            # longest raw window the stack distinguishes
    lm: int | None = None   # MinHash target length; None disables reduction

    def __post_init__(self):
        if self.max_len < 1:
            raise ValueError("max window length must be >= 1")
        if self.lm is not None and not 0 < self.lm < self.max_len:
            raise ValueError("lm must satisfy 0 < lm < max window length")

    @property
    def reduced(self) -> bool:
        return self.lm is not None

    @property
    def n_raw(self) -> int:
        return self.lm if self.reduced else self.max_len

    @property
    def n_layers(self) -> int:
        return self.n_raw + (1 if self.reduced else 0)

    def bytes_per_stack(self) -> int:
        # int64 cells plus a nominal per-sketch header
        return self.n_layers * (self.w * self.d * 8 + 128)
