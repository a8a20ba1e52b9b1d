"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``. Scenario-based criteria
share one module-scoped fixture that generates five ground-truth scenarios
in the competition file format and runs every needed (mode, heuristic)
combination once.
"""
import math
import time
from dataclasses import dataclass

import numpy as np
import pytest

from exactref import ExactStack, exact_css_consistency
from pdfastream import _kernel as K
from pdfastream.heuristics import (
    HeuristicConfig,
    css_cellwise_consistency,
    css_consistency,
)
from pdfastream.pautomac import parse_pautomac, perplexity, true_perplexity
from pdfastream.sketch import (
    CountMinSketch,
    LayerRegistries,
    SketchSeeds,
    SketchStack,
    StackConfig,
    sketch_dimensions,
)
from pdfastream.streamer import StreamConfig, run
from pdfastream.synthetic import generate_scenario
from pdfastream.tree import PrefixTree, StructuralFailure


def _report(criterion: int, ok: bool, detail: str = ""):
    print(f"\n[acceptance] criterion {criterion:>2}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {criterion} failed: {detail}"


# ---------------------------------------------------------------------------
# criterion 1: sketch overestimate bound at the stated dimensions
# ---------------------------------------------------------------------------

def test_criterion_1_sketch_error_bound():
    started = time.perf_counter()
    beta = gamma = 0.01
    w, d = sketch_dimensions(beta, gamma)
    assert (w, d) == (272, 5)
    rng = np.random.default_rng(2024)
    total_queries = 0
    failures = 0
    for trial in range(200):
        keys = rng.zipf(1.5, size=10_000).astype(np.uint64)
        sk = CountMinSketch(w, d, SketchSeeds.generate(d, 1, 50_000 + trial))
        sk.store_many_fps(keys)
        m = sk.total_inserted
        distinct, true_counts = np.unique(keys, return_counts=True)
        estimates = sk.retrieve_many_fps(distinct)
        assert (estimates >= true_counts).all()  # no-underestimate side
        failures += int((estimates > true_counts + beta * m).sum())
        total_queries += len(distinct)
    rate = failures / total_queries
    elapsed = time.perf_counter() - started
    _report(1, rate <= 2 * gamma + 0.01 and elapsed < 60,
            f"(overestimate rate {rate:.5f} <= 0.03, {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# criterion 2: merge/undo identity over randomized episodes
# ---------------------------------------------------------------------------

def test_criterion_2_merge_undo_identity():
    started = time.perf_counter()
    rng = np.random.default_rng(7)
    episodes = 1000
    identical = 0
    for ep in range(episodes):
        seeds = SketchSeeds.generate(2, 1, 80_000 + ep)
        tree = PrefixTree(3, StackConfig(16, 2, 2), seeds)
        n_traces = int(rng.integers(30, 90))
        for _ in range(n_traces):
            body = tuple(int(s) for s in rng.integers(0, 3, rng.integers(0, 6)))
            tree.ingest_trace(body + (3,), t_s=int(rng.integers(1, 4)))
        assert tree.node_count() <= 500
        before = tree.state_hash()
        steps = 0
        while tree.blues and steps < 12:
            bid = int(rng.choice(sorted(tree.blues)))
            if rng.random() < 0.6 and tree.reds:
                rid = int(rng.choice(sorted(tree.reds)))
                try:
                    tree.merge(rid, bid, t_s=2)
                except StructuralFailure:
                    tree.promote(bid, t_s=2)
            else:
                tree.promote(bid, t_s=2)
            steps += 1
        tree.undo_all()
        identical += tree.state_hash() == before
    elapsed = time.perf_counter() - started
    _report(2, identical == episodes and elapsed < 60,
            f"({identical}/{episodes} episodes bit-identical, {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# criterion 3: false-reject rate of the consistency check
# ---------------------------------------------------------------------------

def _stack_from_counts(cfg, seeds, key_fps, counts, registries):
    stack = SketchStack(cfg, seeds)
    for fp, c in zip(key_fps, counts):
        if c > 0:
            stack.layers[0].store_many_fps(np.full(int(c), fp, dtype=np.uint64))
    for fp in key_fps:
        registries.register(0, int(fp))
    return stack


def test_criterion_3_hoeffding_false_reject_rate():
    started = time.perf_counter()
    alpha, n, trials = 0.05, 1000, 1000
    probs = np.array([0.3, 0.25, 0.2, 0.15, 0.1])
    keys = [K.fingerprint((sym, 5)) for sym in range(5)]
    cfg = StackConfig(128, 4, max_len=1)
    rng = np.random.default_rng(99)
    rejects = 0
    for trial in range(trials):
        seeds = SketchSeeds.generate(4, 1, 120_000 + trial)
        registries = LayerRegistries(1)
        c1 = rng.multinomial(n, probs)
        c2 = rng.multinomial(n, probs)
        s1 = _stack_from_counts(cfg, seeds, keys, c1, registries)
        s2 = _stack_from_counts(cfg, seeds, keys, c2, registries)
        if not css_consistency(s1, n, s2, n, registries, alpha).consistent:
            rejects += 1
    rate = rejects / trials
    elapsed = time.perf_counter() - started
    _report(3, rate <= 0.13 and elapsed < 60,
            f"(false-reject rate {rate:.4f} <= 0.13, {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# scenario suite shared by criteria 4, 5 and 6
# ---------------------------------------------------------------------------

SCENARIOS = [
    # name, states, alphabet, seed
    ("syn01", 6, 4, 11),
    ("syn05", 10, 5, 55),
    ("syn45", 12, 6, 455),
    ("syn07", 8, 4, 77),
    ("syn13", 14, 5, 133),
]
N_TRAIN = 25_000
N_TEST = 800


@dataclass
class ScenarioResult:
    name: str
    symbols: int
    true_perp: float
    perp: dict          # config label -> perplexity
    peak_mem: dict      # config label -> bytes
    states: dict


CONFIGS = {
    "batch/css3": ("batch", HeuristicConfig(kind="css", f_s=3)),
    "batch/mh4": ("batch", HeuristicConfig(kind="css-minhash", f_s=4, lm=2)),
    "new/mh4": ("stream-new", HeuristicConfig(kind="css-minhash", f_s=4, lm=2)),
    "old/mh4": ("stream-old", HeuristicConfig(kind="css-minhash", f_s=4, lm=2)),
    "new/al3": ("stream-new", HeuristicConfig(kind="alergia-ktails", k=3)),
    "old/al3": ("stream-old", HeuristicConfig(kind="alergia-ktails", k=3)),
}


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    root = tmp_path_factory.mktemp("scenarios")
    results = []
    for name, n_states, alphabet, seed in SCENARIOS:
        paths = generate_scenario(root, name, n_states, alphabet, N_TRAIN, N_TEST, seed)
        bundle = parse_pautomac(paths["train"], paths["test"], paths["solution"])
        symbols = sum(len(t) for t in bundle.train)
        res = ScenarioResult(name, symbols, true_perplexity(bundle), {}, {}, {})
        for label, (mode, hcfg) in CONFIGS.items():
            cfg = StreamConfig(batch_size=5000, t_s=25, mode=mode, heuristic=hcfg,
                               seed=seed + 1)
            out = run(bundle.train, bundle.alphabet_size, cfg)
            res.perp[label] = perplexity(out.hypothesis, bundle)
            res.peak_mem[label] = out.peak_mem_estimate_bytes
            res.states[label] = out.hypothesis.num_states()
        results.append(res)
        print(f"\n[suite] {name}: symbols={symbols} true={res.true_perp:.3f} " +
              " ".join(f"{k}={v:.3f}" for k, v in res.perp.items()))
    return results


def test_criterion_4_batch_quality(suite):
    started = time.perf_counter()
    good = sum(r.perp["batch/css3"] <= 1.5 * r.true_perp for r in suite)
    ratios = [r.perp["batch/css3"] / r.true_perp for r in suite]
    _report(4, good >= 4,
            f"({good}/{len(suite)} scenarios within 1.5x, ratios=" +
            ",".join(f"{x:.3f}" for x in ratios) + ")")


def test_criterion_5_streaming_ordering(suite):
    mean_new = np.mean([r.perp["new/mh4"] for r in suite])
    mean_old = np.mean([r.perp["old/mh4"] for r in suite])
    alergia_wins = sum(r.perp["new/al3"] < r.perp["old/al3"] for r in suite)
    ok = mean_new <= mean_old and alergia_wins > len(suite) / 2
    _report(5, ok,
            f"(css-minhash mean new={mean_new:.3f} <= old={mean_old:.3f}; "
            f"alergia strict wins {alergia_wins}/{len(suite)})")


def test_criterion_6_memory_trend(suite):
    qualifying = [r for r in suite if r.symbols > 100_000]
    assert qualifying, "suite must include scenarios above 1e5 symbols"
    ratios = [r.peak_mem["batch/mh4"] / r.peak_mem["new/mh4"] for r in qualifying]
    ok = all(x >= 4.0 for x in ratios)
    _report(6, ok, "(batch/stream peak ratios " +
            ",".join(f"{x:.1f}x" for x in ratios) + ", all >= 4x)")


# ---------------------------------------------------------------------------
# criterion 7: shape of the false-accept envelope
# ---------------------------------------------------------------------------

def test_criterion_7_fm0_shape():
    from pdfastream.pac import f_m0

    started = time.perf_counter()
    grid = np.unique(np.concatenate([
        np.arange(1, 5000),
        np.logspace(np.log10(5000), 7, 4000),
    ]).astype(np.int64))
    ok = True
    details = []
    for mu in (0.1, 0.3, 0.5, 0.9):
        for alpha in (0.05, 0.2):
            values = np.array([f_m0(int(m), mu, alpha) for m in grid])
            peak = int(values.argmax())
            tail = values[peak:]
            single_max = bool((np.diff(tail) <= 1e-15).all())
            interior = 0 < peak
            decays = values[-1] < 1e-6 and grid[-1] == 10**7
            ok &= single_max and interior and decays
            details.append(f"mu={mu}/a={alpha}:{'ok' if single_max and interior and decays else 'BAD'}")
    elapsed = time.perf_counter() - started
    _report(7, ok, f"({'; '.join(details[:4])}...; {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# criterion 8: cell-wise test converges to the registry test
# ---------------------------------------------------------------------------

def _separated_pair(rng, n_keys=6, gap=None):
    base = rng.dirichlet([1.5] * n_keys)
    shifted = base.copy()
    i, j = rng.choice(n_keys, size=2, replace=False)
    delta = gap if gap is not None else rng.uniform(0.2, 0.4)
    shifted[i] = base[i] + delta
    shifted[j] = max(base[j] - delta, 0.0)
    shifted /= shifted.sum()
    if np.max(np.abs(base - shifted)) < 0.2:
        return _separated_pair(rng, n_keys, gap)
    return base, shifted


def _cellwise_agreement(m: int, pairs: int, rng_seed: int) -> int:
    rng = np.random.default_rng(rng_seed)
    cfg = StackConfig(128, 4, max_len=1)
    keys = [K.fingerprint((sym, 9)) for sym in range(6)]
    agree = 0
    for trial in range(pairs):
        seeds = SketchSeeds.generate(4, 1, 300_000 + trial)
        registries = LayerRegistries(1)
        p1, p2 = _separated_pair(rng)
        c1 = np.round(p1 * m).astype(int)
        c2 = np.round(p2 * m).astype(int)
        n1, n2 = int(c1.sum()), int(c2.sum())
        s1 = _stack_from_counts(cfg, seeds, keys, c1, registries)
        s2 = _stack_from_counts(cfg, seeds, keys, c2, registries)
        full = css_consistency(s1, n1, s2, n2, registries, 0.05)
        cells = css_cellwise_consistency(s1, n1, s2, n2, 0.05)
        agree += full.consistent == cells.consistent
    return agree


def test_criterion_8_cellwise_convergence():
    started = time.perf_counter()
    agree_small = _cellwise_agreement(10_000, 100, rng_seed=61)
    agree_large = _cellwise_agreement(100_000, 100, rng_seed=61)
    elapsed = time.perf_counter() - started
    ok = agree_large >= 90 and agree_large >= agree_small
    _report(8, ok,
            f"(agreement {agree_large}/100 at m=1e5, {agree_small}/100 at m=1e4, "
            f"{elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# criterion 9: replay efficiency on a stationary source
# ---------------------------------------------------------------------------

def test_criterion_9_replay_efficiency():
    from pdfastream.synthetic import make_bundle, random_pdfa

    started = time.perf_counter()
    model = random_pdfa(4, 3, seed=909)
    bundle = make_bundle(model, 3, n_train=5000, n_test=10, seed=910)
    cfg = StreamConfig(batch_size=500, t_s=20, mode="stream-new",
                       heuristic=HeuristicConfig(kind="css", f_s=2), seed=5)
    result = run(bundle.train, 3, cfg)
    fractions = []
    for m in result.metrics[2:10]:
        candidates = (m.refinements_replayed + m.refinements_failed_structural
                      + m.refinements_discarded_consistency)
        if candidates:
            fractions.append(m.refinements_replayed / candidates)
    mean_frac = float(np.mean(fractions))
    elapsed = time.perf_counter() - started
    _report(9, bool(fractions) and mean_frac >= 0.9,
            f"(mean phase-1 replay fraction {mean_frac:.3f} over batches 3..10, "
            f"{elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# criterion 10: exact-count oracle equivalence on collision-free sketches
# ---------------------------------------------------------------------------

def test_criterion_10_oracle_equivalence():
    started = time.perf_counter()
    rng = np.random.default_rng(1010)
    xi = 4
    suffixes = [(0, xi), (1, xi), (2, xi), (3, xi), (xi,),
                (0, 0, xi), (0, 1, xi), (1, 0, xi), (2, 1, xi), (3, 3, xi)]
    pairs = 500
    agreements = 0
    for trial in range(pairs):
        cfg = StackConfig(256, 4, max_len=2)  # width 16x the distinct keys
        seeds = SketchSeeds.generate(4, 2, 700_000 + trial)
        registries = LayerRegistries(cfg.n_layers)
        stacks = []
        exacts = []
        ns = []
        for side in range(2):
            stack = SketchStack(cfg, seeds)
            exact = ExactStack(2)
            n = 0
            for suffix in suffixes:
                count = int(rng.integers(0, 40))
                arr = np.asarray(suffix, dtype=np.uint64)
                fps = K.trace_layer_fps(arr, cfg.n_raw)
                for _ in range(count):
                    stack.observe_row(fps[0], None, len(suffix) == 1, registries)
                    exact.observe(suffix, 0)
                n += count
            stacks.append(stack)
            exacts.append(exact)
            ns.append(max(n, 1))
        got = css_consistency(stacks[0], ns[0], stacks[1], ns[1], registries, 0.05)
        want_ok, want_score, want_layers = exact_css_consistency(
            exacts[0], ns[0], exacts[1], ns[1], 0.05)
        same = got.consistent == want_ok
        if same and want_ok:
            same = math.isclose(got.score, want_score, abs_tol=1e-9)
        agreements += same
    elapsed = time.perf_counter() - started
    _report(10, agreements == pairs,
            f"({agreements}/{pairs} verdicts identical to the exact oracle, "
            f"{elapsed:.1f}s)")
