"""Streamed augmented prefix tree with red-blue coloring and exact undo.

Nodes are created lazily while traces stream in: only red or blue states
may spawn children, and a white node turns blue once its parent is red and
its traversal count reaches the threshold. Merges fold a blue state (and
its subtree, recursively per symbol) into a red state; every primitive
mutation is journaled so the merge can be reversed bit-exactly in LIFO
order.

The canonical state hash covers structure, counts and sketch cells but not
colors: colors achieved during a minimization pass deliberately survive the
rollback (see ``pdfastream.streamer``).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from . import _kernel as K
from .model import CountModel
from .sketch import LayerRegistries, SketchSeeds, SketchStack, StackConfig


class Color(IntEnum):
    WHITE = 0
    BLUE = 1
    RED = 2


class StructuralFailure(RuntimeError):
    """A refinement's flag preconditions (colors, liveness) do not hold."""


class UndoOrderError(RuntimeError):
    """Refinements must be undone in reverse order of application."""


class Node:
    __slots__ = (
        "id", "color", "parent", "in_symbol", "children",
        "n", "final_count", "symbol_counts", "stack",
        "merged_into", "version",
    )

    def __init__(self, node_id: int, parent: "Node | None", in_symbol: int | None,
                 stack: SketchStack | None):
        self.id = node_id
        self.color = Color.WHITE
        self.parent = parent
        self.in_symbol = in_symbol
        self.children: dict[int, Node] = {}
        self.n = 0
        self.final_count = 0
        self.symbol_counts: dict[int, int] = {}
        self.stack = stack
        self.merged_into: Node | None = None
        self.version = 0

    @property
    def alive(self) -> bool:
        return self.merged_into is None

    def __repr__(self):
        return f"Node({self.id}, {self.color.name}, n={self.n})"


# Journal primitives: (tag, payload...) tuples, undone in reverse order.
_REDIRECT = 0   # (parent, symbol, old_child, new_child)
_COUNTS = 1     # (node, dn, dfinal, {sym: dcount})
_SKETCH = 2     # (dst, src) dst.stack += src.stack
_ATTACH = 3     # (parent, symbol, child, old_parent)
_MERGEMARK = 4  # (node, dst)
_COLOR = 5      # (node, old_color, new_color)


@dataclass
class Refinement:
    """One atomic learner step: a red-blue merge or a blue promotion.

    ``journal`` is populated while the refinement is applied and cleared by
    undo, so the same object doubles as a replayable descriptor.
    """

    kind: str                      # "merge" | "promote"
    red: int | None = None         # merge target id
    blue: int = -1                 # merge source / promotion target id
    journal: list = field(default_factory=list)

    def describe(self) -> str:
        if self.kind == "merge":
            return f"merge({self.red},{self.blue})"
        return f"promote({self.blue})"


class PrefixTree:
    """Prefix tree plus the merged-machine overlay built during minimization."""

    def __init__(self, alphabet_size: int,
                 stack_config: StackConfig | None = None,
                 seeds: SketchSeeds | None = None):
        self.alphabet_size = alphabet_size
        self.xi = alphabet_size
        self.stack_config = stack_config
        self.seeds = seeds
        if stack_config is not None and seeds is None:
            raise ValueError("sketch stacks need run-level seeds")
        self.registries = (
            LayerRegistries(stack_config.n_layers) if stack_config is not None else None
        )
        self.nodes: dict[int, Node] = {}
        self._next_id = 0
        self.reds: set[int] = set()
        self.blues: set[int] = set()
        self.applied: list[Refinement] = []
        self.new_nodes_outside_fringe = 0  # instrumentation for the gating invariant
        # how many ancestor levels a mutation invalidates; must cover the
        # deepest lookahead any verdict cache relies on
        self.version_levels = 4
        self.root = self._new_node(None, None)
        self._set_color(self.root, Color.RED, journal=None)

    # ---- construction helpers -------------------------------------------

    def _new_node(self, parent: Node | None, in_symbol: int | None) -> Node:
        stack = None
        if self.stack_config is not None:
            stack = SketchStack(self.stack_config, self.seeds)
        node = Node(self._next_id, parent, in_symbol, stack)
        self._next_id += 1
        self.nodes[node.id] = node
        if parent is not None:
            parent.children[in_symbol] = node
            if parent.color == Color.WHITE:
                self.new_nodes_outside_fringe += 1
        return node

    def _set_color(self, node: Node, color: Color, journal: list | None) -> None:
        old = node.color
        if old == color:
            return
        if journal is not None:
            journal.append((_COLOR, node, old, color))
        node.color = color
        if old == Color.RED:
            self.reds.discard(node.id)
        elif old == Color.BLUE:
            self.blues.discard(node.id)
        if color == Color.RED:
            self.reds.add(node.id)
        elif color == Color.BLUE:
            self.blues.add(node.id)

    def get(self, node_id: int) -> Node | None:
        return self.nodes.get(node_id)

    def alive_nodes(self) -> Iterable[Node]:
        return (n for n in self.nodes.values() if n.alive)

    def node_count(self) -> int:
        return len(self.nodes)

    # ---- streaming ingestion --------------------------------------------

    def ingest_trace(self, trace: Sequence[int], t_s: int, gate: bool = True) -> None:
        """Walk one final-terminated trace through the tree.

        Every visited node gets its size bumped and its sketch stack updated
        with the outgoing windows starting at the visit position. With
        ``gate`` set, children appear only under red or blue nodes and a
        white node is promoted to blue (then extended) once its parent is
        red and its size reaches ``t_s``; otherwise the walk stops early.
        """
        n = len(trace)
        if n < 1 or trace[-1] != self.xi:
            raise ValueError("trace must end with the final symbol")
        cfg = self.stack_config
        layer_fps = reduced_fps = None
        if cfg is not None:
            arr = np.asarray(trace, dtype=np.uint64)
            layer_fps = K.trace_layer_fps(arr, cfg.n_raw)
            if cfg.reduced:
                reduced_fps = K.trace_minhash_fps(
                    arr, cfg.max_len, cfg.lm,
                    self.seeds.minhash_a[: cfg.lm], self.seeds.minhash_b[: cfg.lm],
                )

        q = self.root
        for pos in range(n):
            a = trace[pos]
            q.n += 1
            if q.stack is not None:
                q.stack.observe_row(
                    layer_fps[pos],
                    int(reduced_fps[pos]) if reduced_fps is not None else None,
                    ending=(pos == n - 1),
                    registries=self.registries,
                )
            if a == self.xi:
                q.final_count += 1
                if (
                    q.color == Color.WHITE
                    and q.parent is not None
                    and q.parent.color == Color.RED
                    and q.n >= t_s
                ):
                    self._set_color(q, Color.BLUE, journal=None)
                return
            q.symbol_counts[a] = q.symbol_counts.get(a, 0) + 1
            child = q.children.get(a)
            if child is None:
                if not gate or q.color != Color.WHITE:
                    child = self._new_node(q, a)
                elif q.parent is not None and q.parent.color == Color.RED and q.n >= t_s:
                    # threshold reached: node joins the fringe and may extend
                    self._set_color(q, Color.BLUE, journal=None)
                    child = self._new_node(q, a)
                else:
                    return
            q = child
        raise AssertionError("unreachable: trace did not end with the final symbol")

    def refresh_blues(self, t_s: int) -> None:
        """Mark qualifying white children of red nodes blue.

        Streamed ingestion does this on the fly; batch ingestion (children
        always exist, so the promotion branch never runs) and re-marked
        colors need this sweep before minimization.
        """
        for rid in list(self.reds):
            red = self.nodes[rid]
            if not red.alive:
                continue
            for child in red.children.values():
                if child.alive and child.color == Color.WHITE and child.n >= t_s:
                    self._set_color(child, Color.BLUE, journal=None)

    # ---- refinements ------------------------------------------------------

    def _bump_versions(self, node: Node, levels: int | None = None) -> None:
        cur = node
        for _ in range((self.version_levels if levels is None else levels) + 1):
            if cur is None:
                break
            cur.version += 1
            cur = cur.parent

    def promote(self, blue_id: int, t_s: int) -> Refinement:
        node = self.get(blue_id)
        if node is None or not node.alive or node.color != Color.BLUE:
            raise StructuralFailure(f"promote target {blue_id} is not a live blue state")
        ref = Refinement("promote", blue=blue_id)
        self._set_color(node, Color.RED, ref.journal)
        for child in node.children.values():
            if child.alive and child.color == Color.WHITE and child.n >= t_s:
                self._set_color(child, Color.BLUE, ref.journal)
        self.applied.append(ref)
        return ref

    def merge(self, red_id: int, blue_id: int, t_s: int) -> Refinement:
        red = self.get(red_id)
        blue = self.get(blue_id)
        if red is None or not red.alive or red.color != Color.RED:
            raise StructuralFailure(f"merge target {red_id} is not a live red state")
        if blue is None or not blue.alive or blue.color != Color.BLUE:
            raise StructuralFailure(f"merge source {blue_id} is not a live blue state")
        ref = Refinement("merge", red=red_id, blue=blue_id)
        journal = ref.journal
        parent = blue.parent
        journal.append((_REDIRECT, parent, blue.in_symbol, blue, red))
        parent.children[blue.in_symbol] = red
        self._fold(red, blue, journal)
        # the merged state is red; its enlarged fringe may qualify new blues
        for child in red.children.values():
            if child.alive and child.color == Color.WHITE and child.n >= t_s:
                self._set_color(child, Color.BLUE, journal)
        self.applied.append(ref)
        return ref

    def _fold(self, dst: Node, src: Node, journal: list) -> None:
        journal.append((_MERGEMARK, src, dst))
        src.merged_into = dst
        if src.id in self.blues:
            # stays colored blue for re-marking purposes; drop from live fringe
            self.blues.discard(src.id)
        delta = dict(src.symbol_counts)
        journal.append((_COUNTS, dst, src.n, src.final_count, delta))
        dst.n += src.n
        dst.final_count += src.final_count
        for sym, c in delta.items():
            dst.symbol_counts[sym] = dst.symbol_counts.get(sym, 0) + c
        if dst.stack is not None and src.stack is not None:
            journal.append((_SKETCH, dst, src))
            dst.stack.iadd(src.stack)
        self._bump_versions(dst)
        for sym in sorted(src.children):
            schild = src.children[sym]
            dchild = dst.children.get(sym)
            if dchild is not None and dchild.alive:
                self._fold(dchild, schild, journal)
            else:
                journal.append((_ATTACH, dst, sym, schild, schild.parent, dchild))
                dst.children[sym] = schild
                schild.parent = dst
                self._bump_versions(dst)

    def undo(self, ref: Refinement) -> None:
        if not self.applied or self.applied[-1] is not ref:
            raise UndoOrderError("refinement is not the most recently applied one")
        self.applied.pop()
        for entry in reversed(ref.journal):
            tag = entry[0]
            if tag == _REDIRECT:
                _, parent, sym, old_child, _new = entry
                parent.children[sym] = old_child
            elif tag == _COUNTS:
                _, node, dn, dfinal, delta = entry
                node.n -= dn
                node.final_count -= dfinal
                for s, c in delta.items():
                    left = node.symbol_counts[s] - c
                    if left:
                        node.symbol_counts[s] = left
                    else:
                        del node.symbol_counts[s]
                self._bump_versions(node)
            elif tag == _SKETCH:
                _, dst, src = entry
                dst.stack.isub(src.stack)
            elif tag == _ATTACH:
                _, parent, sym, child, old_parent, old_child = entry
                if old_child is None:
                    del parent.children[sym]
                else:
                    parent.children[sym] = old_child
                child.parent = old_parent
                self._bump_versions(parent)
            elif tag == _MERGEMARK:
                _, node, _dst = entry
                node.merged_into = None
                if node.color == Color.BLUE:
                    self.blues.add(node.id)
            elif tag == _COLOR:
                _, node, old, _new = entry
                self._set_color(node, old, journal=None)
        ref.journal.clear()

    def undo_all(self) -> None:
        while self.applied:
            self.undo(self.applied[-1])

    def commit_applied(self) -> None:
        """Make every applied refinement permanent by dropping its journal."""
        for ref in self.applied:
            ref.journal.clear()
        self.applied.clear()

    # ---- views -------------------------------------------------------------

    def color_snapshot(self) -> dict[int, Color]:
        """Colors of every node that reached blue or red, dead or alive."""
        return {n.id: n.color for n in self.nodes.values() if n.color != Color.WHITE}

    def apply_colors(self, snapshot: dict[int, Color]) -> None:
        """Re-mark states after a rollback; colors only ever move upward."""
        for nid, color in snapshot.items():
            node = self.nodes[nid]
            if color > node.color:
                self._set_color(node, color, journal=None)

    def to_count_model(self) -> CountModel:
        """Red-state count model; transitions into non-red targets dropped."""
        counts: dict[int, tuple[int, int, dict[int, int]]] = {}
        targets: dict[tuple[int, int], int] = {}
        for rid in sorted(self.reds):
            node = self.nodes[rid]
            if not node.alive:
                continue
            kept: dict[int, int] = {}
            for sym, child in node.children.items():
                if child.alive and child.color == Color.RED:
                    kept[sym] = node.symbol_counts.get(sym, 0)
                    targets[(rid, sym)] = child.id
            counts[rid] = (node.n, node.final_count, kept)
        if counts.get(self.root.id, (0,))[0] == 0:
            # empty stream: absorbing root with stopping probability one
            counts[self.root.id] = (1, 1, {})
        return CountModel(root=self.root.id, counts=counts, targets=targets)

    def state_hash(self, include_colors: bool = False) -> str:
        """Canonical digest of structure, counts and sketch cells."""
        h = hashlib.blake2b(digest_size=16)
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            parent = node.parent.id if node.parent is not None else -1
            merged = node.merged_into.id if node.merged_into is not None else -1
            head = [nid, parent,
                    node.in_symbol if node.in_symbol is not None else -1,
                    merged, node.n, node.final_count]
            if include_colors:
                head.append(int(node.color))
            h.update(np.array(head, dtype=np.int64).tobytes())
            h.update(np.array(sorted(node.symbol_counts.items()), dtype=np.int64).tobytes())
            h.update(np.array(
                sorted((s, c.id) for s, c in node.children.items()), dtype=np.int64
            ).tobytes())
            if node.stack is not None:
                for layer in node.stack.layers:
                    h.update(layer.cells.tobytes())
                    h.update(np.array([layer.total_inserted, layer.final_count],
                                      dtype=np.int64).tobytes())
        return h.hexdigest()

    def to_json(self) -> str:
        doc = []
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            doc.append({
                "id": nid,
                "color": node.color.name.lower(),
                "alive": node.alive,
                "size": node.n,
                "final_count": node.final_count,
                "symbol_counts": {str(k): v for k, v in sorted(node.symbol_counts.items())},
                "children": {str(k): c.id for k, c in sorted(node.children.items())},
            })
        return json.dumps({"alphabet_size": self.alphabet_size, "nodes": doc}, indent=2)

    def to_dot(self) -> str:
        color_fill = {Color.RED: "tomato", Color.BLUE: "skyblue", Color.WHITE: "white"}
        lines = ["digraph tree {", "  rankdir=LR;"]
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            if not node.alive:
                continue
            lines.append(
                f'  n{nid} [style=filled fillcolor={color_fill[node.color]} '
                f'label="{nid}\\nn={node.n} f={node.final_count}"];'
            )
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            if not node.alive:
                continue
            for sym, child in sorted(node.children.items()):
                lines.append(f'  n{nid} -> n{child.id} [label="{sym}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"
