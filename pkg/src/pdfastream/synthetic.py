"""Seeded ground-truth model generation and PAutomaC-format scenario export.

The public competition corpus is not bundled; these generators produce
scenario triples (train/test/solution) in the exact same file grammar from
known random automata, which doubles as ground truth for tests.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .model import Alphabet, PdfaView, string_probability
from .pautomac import ScenarioBundle

MAX_TRACE_LEN = 80


def random_pdfa(n_states: int, alphabet_size: int, seed: int,
                min_final: float = 0.08, concentration: float = 0.6) -> PdfaView:
    """Random fully-connected deterministic automaton.

    A spanning arborescence guarantees reachability; remaining transitions
    go to uniform random states. Probability vectors are Dirichlet draws
    with a floor on the stopping probability so sampled traces stay short.
    Low ``concentration`` skews states toward a few dominant symbols, which
    keeps distinct states distinguishable.
    """
    rng = np.random.default_rng(seed)
    states = list(range(n_states))
    view = PdfaView(root=0, states=states)
    # spanning structure: state i entered from a random earlier state
    targets = {}
    for i in range(1, n_states):
        src = int(rng.integers(0, i))
        free = [a for a in range(alphabet_size) if (src, a) not in targets]
        if not free:
            free = list(range(alphabet_size))
        targets[(src, int(rng.choice(free)))] = i
    for q in states:
        for a in range(alphabet_size):
            if (q, a) not in targets:
                targets[(q, a)] = int(rng.integers(0, n_states))
    for q in states:
        weights = rng.dirichlet([concentration] * (alphabet_size + 1))
        final = max(float(weights[-1]), min_final)
        rest = weights[:-1] / weights[:-1].sum() * (1.0 - final)
        view.final_prob[q] = final
        for a in range(alphabet_size):
            view.transitions[(q, a)] = targets[(q, a)]
            view.symbol_prob[(q, a)] = float(rest[a])
    return view


def sample_trace(model: PdfaView, alphabet: Alphabet, rng: np.random.Generator,
                 max_len: int = MAX_TRACE_LEN) -> tuple[int, ...]:
    """One final-terminated trace from the model; overlong walks restart."""
    while True:
        body = []
        q = model.root
        ok = True
        while True:
            if len(body) > max_len:
                ok = False
                break
            r = rng.random()
            if r < model.final_prob.get(q, 0.0):
                break
            r -= model.final_prob.get(q, 0.0)
            hit = None
            for a in range(alphabet.size):
                p = model.symbol_prob.get((q, a), 0.0)
                if r < p:
                    hit = a
                    break
                r -= p
            if hit is None:
                hit = alphabet.size - 1  # numeric slack lands on the last symbol
            body.append(hit)
            q = model.transitions[(q, hit)]
        if ok:
            return tuple(body) + (alphabet.xi,)


def make_bundle(model: PdfaView, alphabet_size: int, n_train: int, n_test: int,
                seed: int) -> ScenarioBundle:
    """Sampled scenario with competition-convention solution probabilities:
    true model probabilities of the distinct test strings, renormalized over
    the test set."""
    alphabet = Alphabet(alphabet_size)
    rng = np.random.default_rng(seed)
    train = [sample_trace(model, alphabet, rng) for _ in range(n_train)]
    test_set = {}
    attempts = 0
    while len(test_set) < n_test and attempts < n_test * 200:
        t = sample_trace(model, alphabet, rng)
        attempts += 1
        if t not in test_set:
            test_set[t] = string_probability(model, t, alphabet.xi).probability
    test = list(test_set)
    raw = [test_set[t] for t in test]
    total = math.fsum(raw)
    solution = [p / total for p in raw]
    bundle = ScenarioBundle(train, test, solution, alphabet_size)
    bundle.validate()
    return bundle


def write_string_file(path, traces, alphabet_size: int) -> None:
    with Path(path).open("w") as fh:
        fh.write(f"{len(traces)} {alphabet_size}\n")
        for t in traces:
            body = t[:-1]
            fh.write(" ".join([str(len(body))] + [str(s) for s in body]) + "\n")


def write_solution_file(path, probs) -> None:
    with Path(path).open("w") as fh:
        fh.write(f"{len(probs)}\n")
        for p in probs:
            fh.write(f"{p!r}\n")


def write_bundle(directory, name: str, bundle: ScenarioBundle) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "train": directory / f"{name}.pautomac.train",
        "test": directory / f"{name}.pautomac.test",
        "solution": directory / f"{name}.pautomac_solution.txt",
    }
    write_string_file(paths["train"], bundle.train, bundle.alphabet_size)
    write_string_file(paths["test"], bundle.test, bundle.alphabet_size)
    write_solution_file(paths["solution"], bundle.solution)
    return paths


def generate_scenario(directory, name: str, n_states: int, alphabet_size: int,
                      n_train: int, n_test: int, seed: int) -> dict[str, Path]:
    model = random_pdfa(n_states, alphabet_size, seed)
    bundle = make_bundle(model, alphabet_size, n_train, n_test, seed + 1)
    return write_bundle(directory, name, bundle)
