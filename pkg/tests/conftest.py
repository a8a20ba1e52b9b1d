import numpy as np
import pytest

from pdfastream.model import Alphabet, PdfaView
from pdfastream.sketch import SketchSeeds, StackConfig
from pdfastream.tree import PrefixTree


@pytest.fixture
def seeds():
    return SketchSeeds.generate(d=4, lm=2, seed=1234)


def build_tree(alphabet_size=3, w=64, d=4, max_len=3, lm=None, seeds=None,
               sketches=True):
    if not sketches:
        return PrefixTree(alphabet_size)
    if seeds is None:
        seeds = SketchSeeds.generate(d=d, lm=lm or 2, seed=99)
    return PrefixTree(alphabet_size, StackConfig(w, d, max_len, lm), seeds)


def ingest_all(tree, traces, t_s, gate=True):
    for t in traces:
        tree.ingest_trace(t, t_s, gate)


def two_state_model() -> PdfaView:
    """Stationary two-state source: q0 -a-> q1 loops back with b, both can stop."""
    view = PdfaView(root=0, states=[0, 1])
    view.transitions = {(0, 0): 1, (0, 1): 0, (1, 0): 1, (1, 1): 0}
    view.symbol_prob = {(0, 0): 0.6, (0, 1): 0.1, (1, 0): 0.1, (1, 1): 0.55}
    view.final_prob = {0: 0.3, 1: 0.35}
    return view


def sample_traces(model: PdfaView, alphabet_size: int, n: int, seed: int):
    from pdfastream.synthetic import sample_trace

    alphabet = Alphabet(alphabet_size)
    rng = np.random.default_rng(seed)
    return [sample_trace(model, alphabet, rng) for _ in range(n)]


def random_traces(alphabet_size: int, n: int, seed: int, max_len=8):
    """Uniform random final-terminated traces (not from any model)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        length = int(rng.integers(0, max_len))
        out.append(tuple(int(s) for s in rng.integers(0, alphabet_size, length))
                   + (alphabet_size,))
    return out
