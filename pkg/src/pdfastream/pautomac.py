"""PAutomaC-format ingestion, perplexity scoring and result reporting.

File grammar (both train and test files): a header line
``<num_strings> <alphabet_size>`` followed by one line per string,
``<len> <sym_1> ... <sym_len>``, space separated. Solution files start with
the string count and then carry one decimal probability per line, aligned
with the test file and normalized to sum to one.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .model import Alphabet, PdfaView, string_probability

DEFAULT_SMOOTHING = 1e-9


class ParseError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


@dataclass
class ScenarioBundle:
    train: list[tuple[int, ...]]
    test: list[tuple[int, ...]]
    solution: list[float]
    alphabet_size: int

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.alphabet_size)

    def validate(self, tol: float = 1e-6) -> None:
        if len(self.test) != len(self.solution):
            raise ValueError(
                f"test/solution length mismatch: {len(self.test)} vs {len(self.solution)}"
            )
        total = math.fsum(self.solution)
        if abs(total - 1.0) > tol:
            raise ValueError(f"solution probabilities sum to {total}, expected 1")


def _parse_ints(path, line_no: int, line: str) -> list[int]:
    try:
        return [int(tok) for tok in line.split()]
    except ValueError as exc:
        raise ParseError(path, line_no, f"malformed integer line: {line!r}") from exc


def parse_string_file(path) -> tuple[list[tuple[int, ...]], int]:
    """Decode a PAutomaC string file; traces come back final-terminated."""
    path = Path(path)
    with path.open() as fh:
        return parse_string_lines(fh, path)


def parse_string_lines(lines, path="<stream>") -> tuple[list[tuple[int, ...]], int]:
    it = iter(enumerate(lines, start=1))
    try:
        line_no, header = next(it)
    except StopIteration:
        raise ParseError(path, 0, "empty file") from None
    head = _parse_ints(path, line_no, header)
    if len(head) != 2:
        raise ParseError(path, line_no, f"header must be '<count> <alphabet>', got {header!r}")
    count, alphabet_size = head
    if alphabet_size < 1:
        raise ParseError(path, line_no, f"alphabet size must be >= 1, got {alphabet_size}")
    xi = alphabet_size
    traces = []
    for line_no, line in it:
        if not line.strip():
            continue
        fields = _parse_ints(path, line_no, line)
        length, symbols = fields[0], fields[1:]
        if length != len(symbols):
            raise ParseError(path, line_no,
                             f"declared length {length} but found {len(symbols)} symbols")
        for s in symbols:
            if not 0 <= s < alphabet_size:
                raise ParseError(path, line_no, f"symbol {s} outside alphabet {alphabet_size}")
        traces.append(tuple(symbols) + (xi,))
    if len(traces) != count:
        raise ParseError(path, line_no if traces else 1,
                         f"header declares {count} strings, found {len(traces)}")
    return traces, alphabet_size


def parse_solution_file(path) -> list[float]:
    path = Path(path)
    probs = []
    with path.open() as fh:
        it = iter(enumerate(fh, start=1))
        line_no, header = next(it, (0, None))
        if header is None:
            raise ParseError(path, 0, "empty solution file")
        try:
            count = int(header.split()[0])
        except (ValueError, IndexError) as exc:
            raise ParseError(path, line_no, f"malformed count line: {header!r}") from exc
        for line_no, line in it:
            if not line.strip():
                continue
            try:
                probs.append(float(line))
            except ValueError as exc:
                raise ParseError(path, line_no, f"malformed probability: {line!r}") from exc
    if len(probs) != count:
        raise ParseError(path, line_no, f"header declares {count} probabilities, found {len(probs)}")
    return probs


def parse_pautomac(train_path, test_path, solution_path) -> ScenarioBundle:
    train, a1 = parse_string_file(train_path)
    test, a2 = parse_string_file(test_path)
    solution = parse_solution_file(solution_path)
    bundle = ScenarioBundle(train, test, solution, max(a1, a2))
    bundle.validate()
    return bundle


def candidate_probabilities(model: PdfaView, bundle: ScenarioBundle,
                            smoothing: float = DEFAULT_SMOOTHING) -> list[float]:
    """Model probabilities of the test strings, smoothed and renormalized
    over the test set (competition convention). Merged hypotheses drop
    low-frequency transitions, so zero raw probabilities are expected."""
    xi = bundle.alphabet_size
    raw = [string_probability(model, t, xi).probability for t in bundle.test]
    shifted = [p + smoothing for p in raw]
    total = math.fsum(shifted)
    return [p / total for p in shifted]


def cross_perplexity(true_probs: Sequence[float], cand_probs: Sequence[float]) -> float:
    """2 ** cross-entropy of the candidate under the target distribution."""
    acc = 0.0
    for pt, pc in zip(true_probs, cand_probs):
        if pt > 0.0:
            if pc <= 0.0:
                return math.inf
            acc -= pt * math.log2(pc)
    return 2.0 ** acc


def perplexity(model: PdfaView, bundle: ScenarioBundle,
               smoothing: float = DEFAULT_SMOOTHING) -> float:
    return cross_perplexity(bundle.solution, candidate_probabilities(model, bundle, smoothing))


def true_perplexity(bundle: ScenarioBundle) -> float:
    """Self-perplexity of the solution distribution: the floor any candidate
    can reach, attained only by matching it on the test support."""
    return cross_perplexity(bundle.solution, bundle.solution)


REPORT_FIELDS = (
    "scenario", "mode", "heuristic", "F", "perplexity", "true_perplexity",
    "wall_ms", "peak_mem_bytes", "states",
)


@dataclass
class ReportRow:
    scenario: str
    mode: str
    heuristic: str
    F: int
    perplexity: float
    true_perplexity: float
    wall_ms: float
    peak_mem_bytes: int
    states: int


def report_csv(rows: Sequence[ReportRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(REPORT_FIELDS)
    for r in rows:
        writer.writerow([getattr(r, f) for f in REPORT_FIELDS])
    return out.getvalue()


def load_report_csv(text: str) -> list[ReportRow]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for rec in reader:
        rows.append(ReportRow(
            scenario=rec["scenario"], mode=rec["mode"], heuristic=rec["heuristic"],
            F=int(rec["F"]), perplexity=float(rec["perplexity"]),
            true_perplexity=float(rec["true_perplexity"]), wall_ms=float(rec["wall_ms"]),
            peak_mem_bytes=int(rec["peak_mem_bytes"]), states=int(rec["states"]),
        ))
    return rows


def report_summary(rows: Sequence[ReportRow]) -> str:
    """Human-readable table next to the machine CSV."""
    header = f"{'scenario':<16} {'mode':<11} {'heuristic':<13} {'F':>2} " \
             f"{'perplexity':>12} {'true':>10} {'ratio':>7} {'states':>6} {'mem':>12}"
    lines = [header, "-" * len(header)]
    for r in rows:
        ratio = r.perplexity / r.true_perplexity if r.true_perplexity else math.inf
        lines.append(
            f"{r.scenario:<16} {r.mode:<11} {r.heuristic:<13} {r.F:>2} "
            f"{r.perplexity:>12.4f} {r.true_perplexity:>10.4f} {ratio:>7.3f} "
            f"{r.states:>6} {r.peak_mem_bytes:>12}"
        )
    return "\n".join(lines) + "\n"
