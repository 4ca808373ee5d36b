"""Command-line entry points for the loop's offline and online workflows."""
from __future__ import annotations

import json
import sys
import threading
from pathlib import Path

import click

from . import dsp, mwl, rl
from .adaptation import AdaptationCatalogue, validate_catalogue
from .errors import NeuroloopError
from .ingestion import generate_epoch, load_synthetic_spec, replay_stream, write_recording
from .orchestrator import bootstrap_assets, load_session_config, replay_session, run_loop
from .simulate import (
    SimulatedUser,
    generate_dataset,
    greedy_policy,
    no_adaptation_policy,
    report_to_json,
    simulate,
)

CONFIG_ENVVAR = "NEUROLOOP_CONFIG"


@click.group()
def main():
    """Closed-loop neuroadaptive dashboard toolkit."""


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="Synthetic source spec (YAML/JSON).")
@click.option("--epochs", default=30, show_default=True, help="Number of 2 s epochs.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Recording CSV to write.")
def synth(spec_path, epochs, out_path):
    """Generate a synthetic EEG recording in the replay CSV format."""
    spec = load_synthetic_spec(spec_path)
    rows = write_recording(out_path, (generate_epoch(spec, i) for i in range(epochs)))
    click.echo(f"wrote {epochs} epochs ({rows} rows) to {out_path}")


@main.command()
@click.option("--file", "file_path", type=click.Path(exists=True),
              help="Recording CSV to stream as epochs.")
@click.option("--session", "session_path", type=click.Path(exists=True),
              help="Recorded session JSONL to re-publish.")
@click.option("--realtime", is_flag=True, help="Pace emission at one epoch per 2 s.")
@click.option("--calibration", type=click.Path(exists=True),
              help="With --file: also print workload estimates.")
@click.option("--port", type=int, default=None,
              help="With --session: serve the WebSocket bridge on this port.")
def replay(file_path, session_path, realtime, calibration, port):
    """Replay a recording as a feature/MWL stream, or re-publish a session log."""
    if bool(file_path) == bool(session_path):
        raise click.UsageError("pass exactly one of --file or --session")
    if session_path:
        report = replay_session(session_path, realtime=realtime or port is not None, ws_port=port)
        click.echo(json.dumps(report))
        return
    thresholds = mwl.QuantileThresholds.load(calibration) if calibration else None
    for epoch in replay_stream(file_path, realtime=realtime):
        features = dsp.extract_features(epoch)
        doc = features.to_payload()
        if thresholds is not None:
            doc["mwl"] = mwl.estimate(features, thresholds).to_payload()
        click.echo(json.dumps(doc))


@main.command()
@click.option("--features", "features_path", type=click.Path(exists=True),
              help="JSONL of band-power messages (payloads or envelopes).")
@click.option("--recording", "recording_path", type=click.Path(exists=True),
              help="Replay CSV; features are extracted first.")
@click.option("--out", "out_path", required=True, type=click.Path())
def calibrate(features_path, recording_path, out_path):
    """Fit per-band quantile thresholds and persist them."""
    if bool(features_path) == bool(recording_path):
        raise click.UsageError("pass exactly one of --features or --recording")
    if features_path:
        samples = mwl.features_from_jsonl(features_path)
    else:
        samples = {name: [] for name in dsp.BAND_NAMES}
        for epoch in replay_stream(recording_path):
            features = dsp.extract_features(epoch)
            for name in dsp.BAND_NAMES:
                samples[name].append(features.power[name])
    thresholds = mwl.calibrate(samples)
    thresholds.save(out_path)
    click.echo(f"calibrated on n={thresholds.calibration_n} samples per band -> {out_path}")


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--layout", required=True, type=click.Choice([l.value for l in rl.Layout]))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--alpha", default=0.1, show_default=True)
@click.option("--epsilon", default=0.1, show_default=True)
@click.option("--max-sweeps", default=500, show_default=True)
@click.option("--tolerance", default=1e-4, show_default=True)
@click.option("--weight-clip", default=10.0, show_default=True)
@click.option("--target", default="coupled", show_default=True,
              type=click.Choice(["coupled", "frozen-uniform"]),
              help="Importance-weighting target policy mode.")
def train(data_path, layout, out_path, alpha, epsilon, max_sweeps, tolerance, weight_clip, target):
    """Train one layout's agent from a logged-transition JSONL dataset."""
    layout = rl.Layout(layout)
    records = rl.load_dataset(data_path, layout=layout)
    cfg = rl.TrainingConfig(
        alpha=alpha,
        epsilon=epsilon,
        max_sweeps=max_sweeps,
        tolerance=tolerance,
        weight_clip=weight_clip,
        target_mode=target.replace("-", "_"),
    )
    table = rl.train(records, layout, cfg)
    table.save(out_path)
    report = table.report
    click.echo(
        f"trained {layout.value} on {len(records)} records: "
        f"sweeps={report.sweeps} converged={report.converged} "
        f"max_delta={report.final_max_delta:.2e} -> {out_path}"
    )


@main.command("eval")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
def eval_cmd(data_path, model_path):
    """Offline importance-sampling evaluation of a trained model on a dataset."""
    table = rl.QTable.load(model_path)
    records = rl.load_dataset(data_path, layout=table.layout)
    click.echo(json.dumps(rl.evaluate_policy(records, table), indent=2))


@main.command("gen-data")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--layout", required=True, type=click.Choice([l.value for l in rl.Layout]))
@click.option("-n", "--n", default=5000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--behavior", default="uniform", show_default=True)
@click.option("--user-table", type=click.Path(exists=True), help="User model YAML override.")
def gen_data(out_path, layout, n, seed, behavior, user_table):
    """Generate a synthetic logged-transition dataset from the simulator."""
    user = SimulatedUser.load(user_table) if user_table else SimulatedUser()
    records = generate_dataset(user, behavior, n, rl.Layout(layout), seed=seed)
    count = rl.save_dataset(out_path, records)
    click.echo(f"wrote {count} transitions to {out_path}")


@main.command("simulate")
@click.option("--model", "model_paths", multiple=True, type=click.Path(exists=True),
              help="Trained model file(s); repeat per layout.")
@click.option("-n", "--n", default=10_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--user-table", type=click.Path(exists=True))
def simulate_cmd(model_paths, n, seed, user_table):
    """Compare trained greedy policies against the no-adaptation baseline."""
    user = SimulatedUser.load(user_table) if user_table else SimulatedUser()
    policies = {"baseline_no_adaptation": no_adaptation_policy()}
    for path in model_paths:
        table = rl.QTable.load(path)
        policies[f"greedy_{table.layout.value}"] = greedy_policy(table)
    report = simulate(policies, user, n_episodes=n, seed=seed)
    click.echo(report_to_json(report))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), envvar=CONFIG_ENVVAR,
              help=f"Session config file (or ${CONFIG_ENVVAR}).")
@click.option("--bootstrap", is_flag=True,
              help="Generate missing calibration/model assets before starting.")
@click.option("--ws-port", type=int, default=None, help="Override WebSocket port.")
@click.option("--realtime/--no-realtime", default=None,
              help="Override pacing (2 s per epoch vs as fast as possible).")
def run(config_path, bootstrap, ws_port, realtime):
    """Run one closed-loop session end to end."""
    overrides: dict = {}
    if ws_port is not None:
        overrides.update(ws_port=ws_port, ws_enabled=True)
    if realtime is not None:
        overrides["pacing_s"] = 2.0 if realtime else 0.0
    cfg = load_session_config(config_path, **overrides)
    if bootstrap:
        for created in bootstrap_assets(cfg):
            click.echo(f"bootstrapped {created}")
    stop = threading.Event()
    try:
        report = run_loop(cfg, stop_event=stop)
    except KeyboardInterrupt:
        stop.set()
        raise
    click.echo(json.dumps({k: v for k, v in report.items() if k != "metrics"}, indent=2))
    latency = report["metrics"]["latency"]
    if latency["count"]:
        click.echo(
            f"loop latency: p50={latency['p50_ms']:.1f} ms "
            f"p99={latency['p99_ms']:.1f} ms over {latency['count']} epochs"
        )


@main.command("catalogue-validate")
@click.option("--catalogue", "catalogue_path", type=click.Path(exists=True), default=None,
              help="Catalogue JSON; defaults to the packaged catalogue.")
def catalogue_validate(catalogue_path):
    """Validate an adaptation catalogue; exits non-zero on violations."""
    catalogue = AdaptationCatalogue.load(catalogue_path)
    violations = validate_catalogue(catalogue)
    if violations:
        for v in violations:
            click.echo(f"violation: {v}", err=True)
        sys.exit(1)
    click.echo(f"catalogue valid: {len(catalogue)} entries")


def entrypoint():
    try:
        main(standalone_mode=True)
    except NeuroloopError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    entrypoint()
