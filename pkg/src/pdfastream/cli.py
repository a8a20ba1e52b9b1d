"""Command-line surface: learn, eval, pac, synth and suite subcommands."""
from __future__ import annotations

import datetime
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from . import __version__
from .heuristics import KINDS, HeuristicConfig
from .model import pdfa_from_json, pdfa_to_dot, pdfa_to_json
from .pac import PacParams, format_report, parameter_report
from .pautomac import (
    DEFAULT_SMOOTHING,
    ParseError,
    ReportRow,
    load_report_csv,
    parse_pautomac,
    parse_string_file,
    parse_solution_file,
    perplexity,
    report_csv,
    report_summary,
    true_perplexity,
    ScenarioBundle,
)
from .streamer import MODES, StreamConfig, metrics_to_csv, run
from .synthetic import generate_scenario


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _write_manifest(path: Path, config: dict, inputs: dict, outputs: dict,
                    started: str) -> None:
    doc = {
        "tool": "pdfastream",
        "version": __version__,
        "started": started,
        "finished": _utcnow(),
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))


@click.group()
@click.version_option(__version__)
def main():
    """Streaming state-machine learner with sketch-based merge checks."""


def _stream_config(mode, heuristic, fs, lm, k, alpha, batch, t_s, state_bound,
                   seed, width, depth, narrowed_beta) -> StreamConfig:
    margin = 0.0
    if narrowed_beta:
        # discount the sketch overestimate bound from the test threshold
        import math
        margin = math.e / width
    hcfg = HeuristicConfig(kind=heuristic, alpha=alpha, f_s=fs, lm=lm, k=k,
                           threshold_margin=margin)
    return StreamConfig(batch_size=batch, t_s=t_s, state_bound=state_bound,
                        mode=mode, heuristic=hcfg, seed=seed,
                        sketch_w=width, sketch_d=depth)


@main.command()
@click.option("--train", "train_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(MODES), default="stream-new", show_default=True)
@click.option("--heuristic", type=click.Choice(KINDS), default="css-minhash", show_default=True)
@click.option("--Fs", "fs", type=int, default=4, show_default=True,
              help="Longest suffix window stored per state.")
@click.option("--lm", type=int, default=2, show_default=True,
              help="MinHash target length (css-minhash only).")
@click.option("--k", type=int, default=3, show_default=True,
              help="Lookahead depth for the tree-walking baseline.")
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--batch", type=int, default=5000, show_default=True,
              help="Traces per minimization pass (stream modes).")
@click.option("--tS", "t_s", type=int, default=25, show_default=True,
              help="Size threshold before a state can join the fringe.")
@click.option("--state-bound", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--width", type=int, default=128, show_default=True)
@click.option("--depth", type=int, default=4, show_default=True)
@click.option("--narrowed-beta/--no-narrowed-beta", default=False, show_default=True,
              help="Narrow the consistency threshold by the sketch error bound.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out",
              show_default=True)
def learn(train_path, mode, heuristic, fs, lm, k, alpha, batch, t_s, state_bound,
          seed, width, depth, narrowed_beta, out_dir):
    """Learn a model from a PAutomaC-format training file."""
    started = _utcnow()
    try:
        config = _stream_config(mode, heuristic, fs, lm, k, alpha, batch, t_s,
                                state_bound, seed, width, depth, narrowed_beta)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    try:
        traces, alphabet_size = parse_string_file(train_path)
    except (OSError, ParseError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    result = run(traces, alphabet_size, config)
    if config.mode == "batch" or result.minimization_passes == 1:
        click.echo(f"single minimization pass over {result.traces_read} traces")

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        model_json = out / "model.json"
        model_json.write_text(pdfa_to_json(result.hypothesis))
        (out / "model.dot").write_text(pdfa_to_dot(result.hypothesis))
        (out / "metrics.csv").write_text(metrics_to_csv(result.metrics))
        _write_manifest(
            out / "manifest.json",
            config={
                "mode": mode, "heuristic": heuristic, "Fs": fs, "lm": lm, "k": k,
                "alpha": alpha, "batch": batch, "tS": t_s, "state_bound": state_bound,
                "seed": seed, "width": width, "depth": depth,
                "narrowed_beta": narrowed_beta,
            },
            inputs={"train": str(train_path), "alphabet_size": alphabet_size},
            outputs={"model": str(model_json)},
            started=started,
        )
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(
        f"learned {result.hypothesis.num_states()} states from {result.traces_read} "
        f"traces in {result.minimization_passes} passes -> {model_json}"
    )


def _eval_one(model_path, test_path, solution_path, smoothing):
    test, alphabet_size = parse_string_file(test_path)
    solution = parse_solution_file(solution_path)
    bundle = ScenarioBundle([], test, solution, alphabet_size)
    bundle.validate()
    floor = true_perplexity(bundle)
    if model_path is None:
        return floor, floor, 0
    model = pdfa_from_json(Path(model_path).read_text())
    return perplexity(model, bundle, smoothing), floor, model.num_states()


@main.command("eval")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Model JSON; omit to score the solution against itself.")
@click.option("--test", "test_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--solution", "solution_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--smoothing", type=float, default=DEFAULT_SMOOTHING, show_default=True)
@click.option("--results", "results_path", type=click.Path(dir_okay=False), default=None,
              help="Append a CSV row to this results file.")
@click.option("--scenario", default=None, help="Scenario label for the results row.")
def eval_cmd(model_path, test_path, solution_path, smoothing, results_path, scenario):
    """Score a model against a PAutomaC test/solution pair."""
    try:
        score, floor, states = _eval_one(model_path, test_path, solution_path, smoothing)
    except (OSError, ParseError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"perplexity: {score:.6f}")
    click.echo(f"true perplexity: {floor:.6f}")
    if results_path:
        row = ReportRow(
            scenario=scenario or Path(test_path).stem, mode="-", heuristic="-", F=0,
            perplexity=score, true_perplexity=floor, wall_ms=0.0, peak_mem_bytes=0,
            states=states,
        )
        path = Path(results_path)
        existing = load_report_csv(path.read_text()) if path.exists() else []
        path.write_text(report_csv(existing + [row]))


@main.command()
@click.option("--mu", type=float, required=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--n", "n_states", type=int, required=True)
@click.option("--sigma", "alphabet_size", type=int, required=True)
@click.option("--eps", "epsilon", type=float, required=True)
@click.option("--delta", "delta_prime", type=float, required=True)
@click.option("--beta", type=float, default=0.01, show_default=True)
@click.option("--gamma", type=float, default=0.01, show_default=True)
@click.option("--Fs", "fs", type=int, default=4, show_default=True)
def pac(mu, alpha, n_states, alphabet_size, epsilon, delta_prime, beta, gamma, fs):
    """Print suggested sketch dimensions, m0 and batch size."""
    try:
        params = PacParams(mu=mu, alpha=alpha, beta=beta, gamma=gamma, epsilon=epsilon,
                           delta_prime=delta_prime, n_states=n_states,
                           alphabet_size=alphabet_size, f_s=fs)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    click.echo(format_report(parameter_report(params)), nl=False)


@main.command()
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--name", required=True)
@click.option("--states", type=int, default=8, show_default=True)
@click.option("--alphabet", type=int, default=5, show_default=True)
@click.option("--train", "n_train", type=int, default=20000, show_default=True)
@click.option("--test", "n_test", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def synth(out_dir, name, states, alphabet, n_train, n_test, seed):
    """Generate a PAutomaC-format scenario from a random ground-truth model."""
    paths = generate_scenario(out_dir, name, states, alphabet, n_train, n_test, seed)
    for kind, path in paths.items():
        click.echo(f"{kind}: {path}")


def _suite_worker(args):
    (name, train_path, test_path, solution_path, mode, heuristic, fs, lm, k,
     alpha, batch, t_s, state_bound, seed, width, depth, smoothing) = args
    traces, alphabet_size = parse_string_file(train_path)
    config = _stream_config(mode, heuristic, fs, lm, k, alpha, batch, t_s,
                            state_bound, seed, width, depth, False)
    result = run(traces, alphabet_size, config)
    test, a2 = parse_string_file(test_path)
    solution = parse_solution_file(solution_path)
    bundle = ScenarioBundle([], test, solution, max(alphabet_size, a2))
    bundle.validate()
    wall = sum(m.wall_ms for m in result.metrics)
    return ReportRow(
        scenario=name, mode=mode, heuristic=heuristic,
        F=k if heuristic.startswith("alergia") else fs,
        perplexity=perplexity(result.hypothesis, bundle, smoothing),
        true_perplexity=true_perplexity(bundle),
        wall_ms=round(wall, 3),
        peak_mem_bytes=result.peak_mem_estimate_bytes,
        states=result.hypothesis.num_states(),
    )


@main.command()
@click.option("--data-dir", type=click.Path(exists=True, file_okay=False), required=True,
              envvar="PDFASTREAM_DATA", help="Directory of scenario triples "
              "(<name>.pautomac.train/.test and <name>.pautomac_solution.txt).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="suite-out",
              show_default=True)
@click.option("--mode", "modes", type=click.Choice(MODES), multiple=True,
              default=("batch", "stream-old", "stream-new"), show_default=True)
@click.option("--heuristic", "heuristics", type=click.Choice(KINDS), multiple=True,
              default=("css-minhash", "alergia-ktails"), show_default=True)
@click.option("--Fs", "fs", type=int, default=4, show_default=True)
@click.option("--lm", type=int, default=2, show_default=True)
@click.option("--k", type=int, default=3, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--batch", type=int, default=5000, show_default=True)
@click.option("--tS", "t_s", type=int, default=25, show_default=True)
@click.option("--state-bound", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--width", type=int, default=128, show_default=True)
@click.option("--depth", type=int, default=4, show_default=True)
@click.option("--smoothing", type=float, default=DEFAULT_SMOOTHING, show_default=True)
@click.option("--jobs", type=int, default=2, show_default=True)
def suite(data_dir, out_dir, modes, heuristics, fs, lm, k, alpha, batch, t_s,
          state_bound, seed, width, depth, smoothing, jobs):
    """Run a grid of (scenario, mode, heuristic) combos across processes."""
    data = Path(data_dir)
    scenarios = []
    for train_path in sorted(data.glob("*.pautomac.train")):
        name = train_path.name.replace(".pautomac.train", "")
        test_path = data / f"{name}.pautomac.test"
        solution_path = data / f"{name}.pautomac_solution.txt"
        if test_path.exists() and solution_path.exists():
            scenarios.append((name, train_path, test_path, solution_path))
    if not scenarios:
        raise click.UsageError(f"no scenario triples found under {data_dir}")
    started = _utcnow()
    jobs_args = [
        (name, str(tr), str(te), str(so), mode, heuristic, fs, lm, k, alpha,
         batch, t_s, state_bound, seed, width, depth, smoothing)
        for (name, tr, te, so) in scenarios
        for mode in modes
        for heuristic in heuristics
    ]
    with ProcessPoolExecutor(max_workers=max(jobs, 1)) as pool:
        rows = list(pool.map(_suite_worker, jobs_args))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(report_csv(rows))
    summary = report_summary(rows)
    (out / "summary.txt").write_text(summary)
    _write_manifest(out / "manifest.json",
                    config={"modes": list(modes), "heuristics": list(heuristics),
                            "Fs": fs, "lm": lm, "k": k, "alpha": alpha, "batch": batch,
                            "tS": t_s, "seed": seed, "width": width, "depth": depth},
                    inputs={"data_dir": str(data_dir),
                            "scenarios": [s[0] for s in scenarios]},
                    outputs={"results": str(out / "results.csv")},
                    started=started)
    click.echo(summary, nl=False)


if __name__ == "__main__":
    main()
