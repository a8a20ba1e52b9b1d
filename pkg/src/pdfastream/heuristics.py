"""Merge consistency checks and scores.

All heuristics answer the same question about a red-blue candidate pair:
are the sampled distributions of outgoing strings statistically compatible,
and if so, how similar are they? The frequency-difference test bounds the
probability of wrongly rejecting a compatible pair by twice its confidence
parameter; the score is a cosine over frequency vectors.

Sketch-backed checks compare layered count-min sketches key by key over the
global observed-key registries, in ascending window length, short-circuiting
at the first failing layer. The cell-wise variant skips key retrieval
entirely and tests aligned counter cells, trading small-sample accuracy for
a runtime independent of the number of observed keys.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sketch import LayerRegistries, SketchStack
from .tree import Node, PrefixTree


@dataclass(frozen=True)
class HeuristicVerdict:
    consistent: bool
    score: float | None = None          # in [-1, 1], present iff consistent
    layers_evaluated: int = 0

    def __post_init__(self):
        if self.consistent and self.score is None:
            raise ValueError("consistent verdicts carry a score")
        if not self.consistent and self.score is not None:
            raise ValueError("inconsistent verdicts carry no score")


KINDS = ("css", "css-minhash", "css-cellwise", "alergia", "alergia-ktails")


@dataclass(frozen=True)
class HeuristicConfig:
    """Which check to run and its knobs.

    ``alpha`` is the rejection confidence, ``f_s`` the longest suffix window
    the sketches distinguish, ``lm`` the MinHash target length, ``k`` the
    lookahead depth for the tree-walking baseline. ``threshold_margin``
    optionally narrows the test threshold by the sketch error bound beta
    (off by default).
    """

    kind: str = "css-minhash"
    alpha: float = 0.05
    f_s: int = 4
    lm: int = 2
    k: int = 3
    threshold_margin: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown heuristic kind {self.kind!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.f_s < 1:
            raise ValueError("f_s must be >= 1")
        if self.kind == "css-minhash" and not 0 < self.lm < self.f_s:
            raise ValueError("lm must satisfy 0 < lm < f_s when MinHash is active")
        if self.k < 0:
            raise ValueError("k must be >= 0")

    @property
    def uses_sketches(self) -> bool:
        return self.kind.startswith("css")

    @property
    def lookahead(self) -> int:
        return self.k if self.kind.startswith("alergia") else self.f_s


def hoeffding_threshold(n1: int, n2: int, alpha: float) -> float:
    return math.sqrt(0.5 * math.log(2.0 / alpha)) * (1.0 / math.sqrt(n1) + 1.0 / math.sqrt(n2))


def hoeffding_check(c1: int, n1: int, c2: int, n2: int, alpha: float,
                    margin: float = 0.0) -> bool:
    """True when the frequency difference is within the bound derived from
    the Hoeffding inequality. ``margin`` narrows the threshold (used with
    sketch counts to discount the overestimate bound)."""
    if n1 < 1 or n2 < 1:
        raise ValueError("sample sizes must be >= 1")
    return abs(c1 / n1 - c2 / n2) < hoeffding_threshold(n1, n2, alpha) - margin


def cosine_similarity(v1: Sequence[float], v2: Sequence[float]) -> float:
    a = np.asarray(v1, dtype=np.float64)
    b = np.asarray(v2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"vector length mismatch: {a.shape} vs {b.shape}")
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        # no evidence on one side; treated as neutral rather than an error
        return 0.0
    return float(a @ b) / (na * nb)


def _layer_check(counts1: np.ndarray, n1: int, counts2: np.ndarray, n2: int,
                 alpha: float, margin: float) -> tuple[bool, float]:
    f1 = counts1 / n1
    f2 = counts2 / n2
    bound = hoeffding_threshold(n1, n2, alpha) - margin
    if len(f1) and float(np.max(np.abs(f1 - f2))) >= bound:
        return False, 0.0
    return True, cosine_similarity(f1, f2)


def css_consistency(stack1: SketchStack, n1: int, stack2: SketchStack, n2: int,
                    registries: LayerRegistries, alpha: float,
                    margin: float = 0.0) -> HeuristicVerdict:
    """Layered sketch comparison over all observed keys.

    Layers are checked in ascending window length; a failure anywhere makes
    the pair inconsistent and skips every higher layer. The score is the
    mean of the per-layer cosine scores.
    """
    if n1 < 1 or n2 < 1:
        raise ValueError("state sizes must be >= 1")
    scores = []
    for k in range(registries.n_layers):
        fps = registries.fps(k)
        counts1 = stack1.layers[k].retrieve_many_fps(fps)
        counts2 = stack2.layers[k].retrieve_many_fps(fps)
        ok, score = _layer_check(counts1, n1, counts2, n2, alpha, margin)
        if not ok:
            return HeuristicVerdict(False, layers_evaluated=k + 1)
        scores.append(score)
    phi = float(np.mean(scores)) if scores else 0.0
    return HeuristicVerdict(True, phi, layers_evaluated=registries.n_layers)


def css_cellwise_consistency(stack1: SketchStack, n1: int, stack2: SketchStack,
                             n2: int, alpha: float,
                             margin: float = 0.0) -> HeuristicVerdict:
    """Aligned cell-pair test: no key retrieval, cost proportional to the
    counter matrix size. All cells must pass; the score is the cosine of the
    flattened cell-frequency vectors."""
    if n1 < 1 or n2 < 1:
        raise ValueError("state sizes must be >= 1")
    if len(stack1.layers) != len(stack2.layers):
        raise ValueError("stacks have different layer counts")
    bound = hoeffding_threshold(n1, n2, alpha) - margin
    flat1 = []
    flat2 = []
    for a, b in zip(stack1.layers, stack2.layers):
        if a.cells.shape != b.cells.shape:
            raise ValueError("cell matrix shapes differ")
        f1 = a.cells / n1
        f2 = b.cells / n2
        if float(np.max(np.abs(f1 - f2))) >= bound:
            return HeuristicVerdict(False, layers_evaluated=len(stack1.layers))
        flat1.append(f1.ravel())
        flat2.append(f2.ravel())
    phi = cosine_similarity(np.concatenate(flat1), np.concatenate(flat2))
    return HeuristicVerdict(True, phi, layers_evaluated=len(stack1.layers))


def _node_freq_vectors(node1: Node, node2: Node, alphabet_size: int):
    v1 = np.zeros(alphabet_size + 1)
    v2 = np.zeros(alphabet_size + 1)
    for sym, c in node1.symbol_counts.items():
        v1[sym] = c / node1.n
    for sym, c in node2.symbol_counts.items():
        v2[sym] = c / node2.n
    v1[alphabet_size] = node1.final_count / node1.n
    v2[alphabet_size] = node2.final_count / node2.n
    return v1, v2


def alergia_consistency(node1: Node, node2: Node, alpha: float, k: int,
                        alphabet_size: int) -> HeuristicVerdict:
    """Frequency test on each outgoing symbol and the stopping frequency,
    recursively required of child pairs sharing a symbol down to depth k.
    The score is the cosine of the top-level (symbols + final) vectors."""

    def compatible(a: Node, b: Node, depth: int) -> bool:
        if a.n < 1 or b.n < 1:
            return True  # no evidence either way
        bound = hoeffding_threshold(a.n, b.n, alpha)
        for sym in set(a.symbol_counts) | set(b.symbol_counts):
            f1 = a.symbol_counts.get(sym, 0) / a.n
            f2 = b.symbol_counts.get(sym, 0) / b.n
            if abs(f1 - f2) >= bound:
                return False
        if abs(a.final_count / a.n - b.final_count / b.n) >= bound:
            return False
        if depth > 0:
            for sym in set(a.children) & set(b.children):
                if not compatible(a.children[sym], b.children[sym], depth - 1):
                    return False
        return True

    if not compatible(node1, node2, k):
        return HeuristicVerdict(False)
    if node1.n < 1 or node2.n < 1:
        return HeuristicVerdict(True, 0.0)
    v1, v2 = _node_freq_vectors(node1, node2, alphabet_size)
    return HeuristicVerdict(True, cosine_similarity(v1, v2), layers_evaluated=1)


class Heuristic:
    """Runtime strategy bound to a tree; memoizes verdicts per node version."""

    def __init__(self, config: HeuristicConfig, tree: PrefixTree):
        self.config = config
        self.tree = tree
        self._cache: dict[tuple[int, int], tuple[int, int, HeuristicVerdict]] = {}
        self._margin = config.threshold_margin

    def reset_cache(self) -> None:
        self._cache.clear()

    def verdict(self, red: Node, blue: Node) -> HeuristicVerdict:
        a, b = (red, blue) if red.id <= blue.id else (blue, red)
        key = (a.id, b.id)
        hit = self._cache.get(key)
        if hit is not None and hit[0] == a.version and hit[1] == b.version:
            return hit[2]
        v = self._compute(red, blue)
        self._cache[key] = (a.version, b.version, v)
        return v

    def _compute(self, red: Node, blue: Node) -> HeuristicVerdict:
        cfg = self.config
        if cfg.uses_sketches:
            if cfg.kind == "css-cellwise":
                return css_cellwise_consistency(
                    red.stack, red.n, blue.stack, blue.n, cfg.alpha, self._margin
                )
            return css_consistency(
                red.stack, red.n, blue.stack, blue.n,
                self.tree.registries, cfg.alpha, self._margin,
            )
        k = cfg.k if cfg.kind == "alergia-ktails" else 0
        return alergia_consistency(red, blue, cfg.alpha, k, self.tree.alphabet_size)
