"""Core automaton types: alphabets, traces, and probabilistic DFA views.

A trace is a tuple of symbol indices ending in the reserved final symbol,
which is encoded as an ordinary index equal to the alphabet size. Parsers
append it; printers strip it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

MODEL_SCHEMA = "pdfastream-model/1"


@dataclass(frozen=True)
class Alphabet:
    """Symbol index space 0..size-1 plus the final marker at index ``size``."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"alphabet size must be >= 1, got {self.size}")

    @property
    def xi(self) -> int:
        return self.size

    def symbols(self) -> range:
        return range(self.size)

    def make_trace(self, body: Iterable[int]) -> tuple[int, ...]:
        """Append the final marker, validating the body stays in range."""
        out = []
        for s in body:
            s = int(s)
            if not 0 <= s < self.size:
                raise ValueError(f"symbol {s} outside alphabet of size {self.size}")
            out.append(s)
        out.append(self.xi)
        return tuple(out)

    def strip_trace(self, trace: Sequence[int]) -> tuple[int, ...]:
        validate_trace(trace, self.xi)
        return tuple(trace[:-1])


def validate_trace(trace: Sequence[int], xi: int) -> None:
    if len(trace) < 1 or trace[-1] != xi:
        raise ValueError("trace must end with the final symbol")
    for s in trace[:-1]:
        if s == xi:
            raise ValueError("final symbol may only appear at the end of a trace")


class TraceScore(NamedTuple):
    probability: float
    missing_transition: bool


@dataclass
class PdfaView:
    """Deterministic probabilistic automaton snapshot.

    ``symbol_prob`` maps (state, symbol) to the transition probability and
    ``final_prob`` maps each state to its stopping probability. Complete
    views satisfy final + sum(symbols) == 1 per state; hypothesis views
    extracted from a partially merged tree may undershoot because mass
    toward non-red targets is dropped (evaluation smoothing absorbs it).
    """

    root: int
    states: list[int]
    transitions: dict[tuple[int, int], int] = field(default_factory=dict)
    symbol_prob: dict[tuple[int, int], float] = field(default_factory=dict)
    final_prob: dict[int, float] = field(default_factory=dict)

    def check_normalized(self, tol: float = 1e-9) -> None:
        for q in self.states:
            mass = self.final_prob.get(q, 0.0)
            for (state, sym), p in self.symbol_prob.items():
                if state == q:
                    mass += p
            if abs(mass - 1.0) > tol:
                raise ValueError(f"state {q} probability mass {mass} != 1")

    def num_states(self) -> int:
        return len(self.states)


def string_probability(model: PdfaView, trace: Sequence[int], xi: int) -> TraceScore:
    """Probability of a full trace: product of transition probs times the
    stopping probability of the reached state. Any missing transition makes
    the probability 0 and flags the result."""
    validate_trace(trace, xi)
    q = model.root
    prob = 1.0
    for a in trace[:-1]:
        key = (q, a)
        if key not in model.transitions:
            return TraceScore(0.0, True)
        prob *= model.symbol_prob.get(key, 0.0)
        q = model.transitions[key]
    prob *= model.final_prob.get(q, 0.0)
    return TraceScore(prob, False)


@dataclass
class CountModel:
    """Per-state counts collected by the learner, normalizable to a PdfaView.

    ``counts`` maps state -> (size, final_count, {symbol: count}) and
    ``targets`` maps (state, symbol) -> successor state.
    """

    root: int
    counts: dict[int, tuple[int, int, dict[int, int]]]
    targets: dict[tuple[int, int], int]


def normalize_counts(model: CountModel) -> PdfaView:
    """Turn counts into probabilities: symbol count / state size, final
    count / state size. A state of size zero cannot be normalized."""
    view = PdfaView(root=model.root, states=sorted(model.counts))
    for q, (n, final, sym_counts) in model.counts.items():
        if n <= 0:
            raise ValueError(f"state {q} has size {n}; cannot normalize")
        view.final_prob[q] = final / n
        for a, c in sym_counts.items():
            key = (q, a)
            if key in model.targets:
                view.transitions[key] = model.targets[key]
                view.symbol_prob[key] = c / n
    return view


def pdfa_to_json(model: PdfaView) -> str:
    """Stable JSON dump (sorted keys, repr floats) so identical models
    serialize byte-for-byte."""
    states = []
    for q in sorted(model.states):
        trans = [
            {"symbol": sym, "target": model.transitions[(state, sym)], "prob": p}
            for (state, sym), p in sorted(model.symbol_prob.items())
            if state == q
        ]
        states.append({"id": q, "final_prob": model.final_prob.get(q, 0.0), "transitions": trans})
    doc = {"schema": MODEL_SCHEMA, "root": model.root, "states": states}
    return json.dumps(doc, sort_keys=True, indent=2)


def pdfa_from_json(text: str) -> PdfaView:
    doc = json.loads(text)
    if doc.get("schema") != MODEL_SCHEMA:
        raise ValueError(f"unsupported model schema: {doc.get('schema')!r}")
    view = PdfaView(root=doc["root"], states=[s["id"] for s in doc["states"]])
    for s in doc["states"]:
        view.final_prob[s["id"]] = s["final_prob"]
        for t in s["transitions"]:
            view.transitions[(s["id"], t["symbol"])] = t["target"]
            view.symbol_prob[(s["id"], t["symbol"])] = t["prob"]
    return view


def pdfa_to_dot(model: PdfaView) -> str:
    lines = ["digraph pdfa {", "  rankdir=LR;"]
    for q in sorted(model.states):
        eta = model.final_prob.get(q, 0.0)
        shape = "doublecircle" if eta > 0 else "circle"
        lines.append(f'  q{q} [shape={shape} label="q{q}\\nstop={eta:.3f}"];')
    lines.append(f"  __start__ [shape=point];")
    lines.append(f"  __start__ -> q{model.root};")
    for (q, a), tgt in sorted(model.transitions.items()):
        p = model.symbol_prob.get((q, a), 0.0)
        lines.append(f'  q{q} -> q{tgt} [label="{a}:{p:.3f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def enumerate_traces(alphabet: Alphabet, max_body_len: int):
    """All traces with body length up to ``max_body_len`` (final marker
    appended). Exponential; intended for small-model oracles."""

    def rec(prefix: list[int], budget: int):
        yield tuple(prefix) + (alphabet.xi,)
        if budget == 0:
            return
        for a in alphabet.symbols():
            prefix.append(a)
            yield from rec(prefix, budget - 1)
            prefix.pop()

    yield from rec([], max_body_len)


def total_mass_up_to(model: PdfaView, alphabet: Alphabet, max_body_len: int) -> float:
    return math.fsum(
        string_probability(model, t, alphabet.xi).probability
        for t in enumerate_traces(alphabet, max_body_len)
    )
