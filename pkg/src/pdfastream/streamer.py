"""Batched streaming orchestration and the minimization routines.

Three modes share one ingestion loop:

* ``batch`` materializes the complete prefix tree (no fringe gating) and
  minimizes once at the end, permanently.
* ``stream-old`` gates the tree, minimizes after every batch and keeps the
  refinements, so later batches extend the already-merged machine.
* ``stream-new`` gates the tree and, after every batch, replays the previous
  pass's refinements, greedily minimizes, snapshots the hypothesis, then
  rolls every refinement back so the next batch streams into a plain tree.

Rolling back restores structure, counts and sketches bit-exactly, but the
colors a state earned during the pass are re-applied afterwards: the fringe
has to stay red/blue between passes or the tree could never grow deeper
than the first batch left it.

Replay separates two failure modes. A refinement whose flag preconditions
fail (wrong colors, dead state) parks in a retry queue and is retried once
after every fresh refinement; a refinement that fails its consistency check
is discarded for this pass. A replayed promotion whose target is already
red counts as satisfied, since its effect persisted through re-marking.
"""
from __future__ import annotations

import io
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

from .heuristics import Heuristic, HeuristicConfig
from .model import PdfaView, normalize_counts
from .sketch import DEFAULT_D, DEFAULT_W, SketchSeeds, StackConfig
from .tree import Color, PrefixTree, Refinement

MODES = ("batch", "stream-old", "stream-new")

# nominal per-node bookkeeping cost used by the memory estimator
NODE_OVERHEAD_BYTES = 256


@dataclass(frozen=True)
class StreamConfig:
    batch_size: int = 5000
    t_s: int = 25
    state_bound: int = 1000
    mode: str = "stream-new"
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)
    seed: int = 0
    sketch_w: int = DEFAULT_W
    sketch_d: int = DEFAULT_D

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.t_s < 1:
            raise ValueError("threshold must be >= 1")
        if self.state_bound < 1:
            raise ValueError("state bound must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class BatchMetrics:
    batch_index: int
    nodes: int
    red: int
    blue: int
    white: int
    refinements_replayed: int
    refinements_failed_structural: int
    refinements_discarded_consistency: int
    peak_mem_estimate_bytes: int
    wall_ms: float

    FIELDS = (
        "batch_index", "nodes", "red", "blue", "white",
        "refinements_replayed", "refinements_failed_structural",
        "refinements_discarded_consistency", "peak_mem_estimate_bytes", "wall_ms",
    )


def metrics_to_csv(rows: Sequence[BatchMetrics]) -> str:
    out = io.StringIO()
    out.write(",".join(BatchMetrics.FIELDS) + "\n")
    for r in rows:
        out.write(",".join(str(getattr(r, f)) for f in BatchMetrics.FIELDS) + "\n")
    return out.getvalue()


@dataclass
class PassStats:
    replay_candidates: int = 0
    replayed: int = 0
    failed_structural: int = 0
    discarded_consistency: int = 0
    swept_in: int = 0
    greedy_merges: int = 0
    greedy_promotes: int = 0


@dataclass
class RunResult:
    hypothesis: PdfaView
    metrics: list[BatchMetrics]
    tree: PrefixTree
    minimization_passes: int
    traces_read: int

    @property
    def peak_mem_estimate_bytes(self) -> int:
        return max((m.peak_mem_estimate_bytes for m in self.metrics), default=0)


def estimate_memory_bytes(tree: PrefixTree) -> int:
    """Accounting stand-in for a heap profiler: every materialized node costs
    a fixed overhead plus its sketch stack."""
    per_stack = tree.stack_config.bytes_per_stack() if tree.stack_config else 0
    return tree.node_count() * (NODE_OVERHEAD_BYTES + per_stack)


def _color_counts(tree: PrefixTree) -> tuple[int, int, int]:
    red = blue = white = 0
    for node in tree.alive_nodes():
        if node.color == Color.RED:
            red += 1
        elif node.color == Color.BLUE:
            blue += 1
        else:
            white += 1
    return red, blue, white


def _structurally_mergeable(tree: PrefixTree, red_id: int, blue_id: int) -> bool:
    red = tree.get(red_id)
    blue = tree.get(blue_id)
    return (
        red is not None and red.alive and red.color == Color.RED
        and blue is not None and blue.alive and blue.color == Color.BLUE
    )


def _best_merge(tree: PrefixTree, heuristic: Heuristic):
    """Highest-score consistent red-blue pair; ties prefer smaller ids."""
    best = None
    best_key = None
    for bid in sorted(tree.blues):
        blue = tree.nodes[bid]
        if not blue.alive:
            continue
        for rid in sorted(tree.reds):
            red = tree.nodes[rid]
            if not red.alive:
                continue
            v = heuristic.verdict(red, blue)
            if not v.consistent:
                continue
            key = (v.score, -rid, -bid)
            if best_key is None or key > best_key:
                best_key = key
                best = (rid, bid)
    return best


def _largest_blue(tree: PrefixTree) -> int | None:
    best = None
    best_key = None
    for bid in tree.blues:
        node = tree.nodes[bid]
        if not node.alive:
            continue
        key = (node.n, -bid)
        if best_key is None or key > best_key:
            best_key = key
            best = bid
    return best


def _sweep_failed(tree: PrefixTree, heuristic: Heuristic, t_s: int,
                  r_failed: list[Refinement], r_new: list[Refinement],
                  stats: PassStats) -> None:
    for ref in list(r_failed):
        if ref.kind == "promote":
            node = tree.get(ref.blue)
            if node is None or not node.alive:
                continue
            if node.color == Color.BLUE:
                r_new.append(tree.promote(ref.blue, t_s))
                r_failed.remove(ref)
                stats.swept_in += 1
            elif node.color == Color.RED:
                # another refinement already achieved this promotion
                r_failed.remove(ref)
        else:
            if not _structurally_mergeable(tree, ref.red, ref.blue):
                continue
            v = heuristic.verdict(tree.nodes[ref.red], tree.nodes[ref.blue])
            if v.consistent:
                r_new.append(tree.merge(ref.red, ref.blue, t_s))
                r_failed.remove(ref)
                stats.swept_in += 1
            # an inconsistent entry stays: later folds may change the verdict


def _greedy_phase(tree: PrefixTree, heuristic: Heuristic, t_s: int,
                  r_new: list[Refinement], r_failed: list[Refinement],
                  stats: PassStats) -> None:
    while True:
        best = _best_merge(tree, heuristic)
        if best is not None:
            r_new.append(tree.merge(best[0], best[1], t_s))
            stats.greedy_merges += 1
        else:
            bid = _largest_blue(tree)
            if bid is None:
                return
            r_new.append(tree.promote(bid, t_s))
            stats.greedy_promotes += 1
        if r_failed:
            _sweep_failed(tree, heuristic, t_s, r_failed, r_new, stats)


def minimize_new(tree: PrefixTree, heuristic: Heuristic, r_old: Sequence[Refinement],
                 t_s: int) -> tuple[list[Refinement], PdfaView, PassStats]:
    """Replay-undo minimization pass.

    Phase 1 replays the previous pass's refinements in order; phase 2 runs
    greedy minimization, retrying structurally parked replays after every
    new refinement. The hypothesis is snapshotted, every applied refinement
    is rolled back in LIFO order, and achieved colors are re-marked.
    """
    heuristic.reset_cache()
    tree.refresh_blues(t_s)
    stats = PassStats(replay_candidates=len(r_old))
    r_new: list[Refinement] = []
    r_failed: list[Refinement] = []

    for ref in r_old:
        if ref.kind == "promote":
            node = tree.get(ref.blue)
            if node is not None and node.alive and node.color == Color.BLUE:
                r_new.append(tree.promote(ref.blue, t_s))
                stats.replayed += 1
            elif node is not None and node.alive and node.color == Color.RED:
                r_new.append(Refinement("promote", blue=ref.blue))
                stats.replayed += 1
            else:
                r_failed.append(ref)
                stats.failed_structural += 1
        else:
            if not _structurally_mergeable(tree, ref.red, ref.blue):
                r_failed.append(ref)
                stats.failed_structural += 1
                continue
            v = heuristic.verdict(tree.nodes[ref.red], tree.nodes[ref.blue])
            if v.consistent:
                r_new.append(tree.merge(ref.red, ref.blue, t_s))
                stats.replayed += 1
            else:
                stats.discarded_consistency += 1

    _greedy_phase(tree, heuristic, t_s, r_new, r_failed, stats)

    hypothesis = normalize_counts(tree.to_count_model())
    achieved = tree.color_snapshot()
    tree.undo_all()
    tree.apply_colors(achieved)
    return r_new, hypothesis, stats


def minimize_old(tree: PrefixTree, heuristic: Heuristic, t_s: int
                 ) -> tuple[PdfaView, PassStats]:
    """Greedy minimization whose refinements stay applied permanently."""
    heuristic.reset_cache()
    tree.refresh_blues(t_s)
    stats = PassStats()
    sink: list[Refinement] = []
    _greedy_phase(tree, heuristic, t_s, sink, [], stats)
    hypothesis = normalize_counts(tree.to_count_model())
    tree.commit_applied()
    return hypothesis, stats


def run(traces: Iterable[Sequence[int]], alphabet_size: int,
        config: StreamConfig) -> RunResult:
    """Stream traces through the tree, minimizing every ``batch_size``
    traces (stream modes) or once at the end (batch mode)."""
    hcfg = config.heuristic
    stack_cfg = None
    seeds = SketchSeeds.generate(config.sketch_d, max(hcfg.lm, 1), config.seed)
    if hcfg.uses_sketches:
        lm = hcfg.lm if hcfg.kind == "css-minhash" else None
        stack_cfg = StackConfig(config.sketch_w, config.sketch_d, hcfg.f_s, lm)
    tree = PrefixTree(alphabet_size, stack_cfg, seeds if stack_cfg else None)
    tree.version_levels = max(4, hcfg.lookahead)
    heuristic = Heuristic(hcfg, tree)
    gate = config.mode != "batch"

    metrics: list[BatchMetrics] = []
    r_old: list[Refinement] = []
    hypothesis: PdfaView | None = None
    passes = 0
    traces_read = 0
    in_batch = 0
    peak = estimate_memory_bytes(tree)
    batch_started = time.perf_counter()
    stopped = False

    def finish_pass():
        nonlocal r_old, hypothesis, passes, peak, batch_started
        nonlocal in_batch
        if config.mode == "stream-new":
            r_old, hyp, stats = minimize_new(tree, heuristic, r_old, config.t_s)
        else:
            hyp, stats = minimize_old(tree, heuristic, config.t_s)
        hypothesis = hyp
        passes += 1
        peak = max(peak, estimate_memory_bytes(tree))
        red, blue, white = _color_counts(tree)
        wall_ms = (time.perf_counter() - batch_started) * 1000.0
        metrics.append(BatchMetrics(
            batch_index=passes - 1,
            nodes=tree.node_count(),
            red=red, blue=blue, white=white,
            refinements_replayed=stats.replayed,
            refinements_failed_structural=stats.failed_structural,
            refinements_discarded_consistency=stats.discarded_consistency,
            peak_mem_estimate_bytes=peak,
            wall_ms=round(wall_ms, 3),
        ))
        batch_started = time.perf_counter()
        in_batch = 0

    for trace in traces:
        tree.ingest_trace(trace, config.t_s, gate)
        traces_read += 1
        in_batch += 1
        peak = max(peak, estimate_memory_bytes(tree))
        if config.mode != "batch" and in_batch == config.batch_size:
            finish_pass()
            if hypothesis.num_states() >= config.state_bound:
                stopped = True
                break

    if not stopped and (in_batch > 0 or (config.mode == "batch" and traces_read > 0)):
        finish_pass()

    if hypothesis is None:
        # empty stream: absorbing root-only model
        hypothesis = normalize_counts(tree.to_count_model())

    return RunResult(
        hypothesis=hypothesis,
        metrics=metrics,
        tree=tree,
        minimization_passes=passes,
        traces_read=traces_read,
    )
