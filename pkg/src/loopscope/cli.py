"""Command-line entry point.

Exit codes: 0 on success, 2 on validation errors (bad flags, malformed
specs, unknown scenarios), 3 when --strict is set and the verdict is
inconclusive at the configured limits.
"""

from __future__ import annotations

import json
import sys

import click

from .engine import Limits, replay as engine_replay
from .errors import LoopscopeError
from .failures import monte_carlo
from .ir import parse_spec
from .report import (
    analysis_bundle,
    classification_bundle,
    emit_report,
    goldens_bundle,
    simulation_bundle,
    trace_bundle,
)
from .scenarios import list_scenarios, load_scenario, verify_golden
from .service import resolve_addr
from .tree import trace_metrics

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INCONCLUSIVE = 3


def _parse_limits(_ctx, _param, value):
    if value is None:
        return Limits()
    try:
        steps, nodes, queries = (int(p) for p in value.split(","))
        return Limits(steps, nodes, queries)
    except (ValueError, LoopscopeError) as e:
        raise click.BadParameter(f"limits must be steps,tree-nodes,queries: {e}")


def _load_machine(spec_path, scenario_id):
    if (spec_path is None) == (scenario_id is None):
        raise LoopscopeError("provide exactly one of --spec or --scenario")
    if spec_path is not None:
        with open(spec_path) as fh:
            return parse_spec(fh.read())
    entry = load_scenario(scenario_id)
    if entry.kind != "classification-fixture":
        raise LoopscopeError(f"scenario {scenario_id!r} is not a machine fixture")
    return entry.payload


def _write(document, out):
    if out:
        with open(out, "w") as fh:
            fh.write(document)
    else:
        click.echo(document, nl=False)


_common = [
    click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False),
                 default=None, help="Machine spec JSON file."),
    click.option("--scenario", "scenario_id", default=None, help="Built-in scenario id."),
    click.option("--limits", callback=_parse_limits, default=None,
                 help="steps,tree-nodes,queries"),
    click.option("--format", "fmt", type=click.Choice(["json", "md"]), default="json"),
    click.option("--out", default=None, help="Write the report to a file."),
]


def _with_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


@click.group()
def main():
    """Analyze, simulate, and serve human-in-the-loop machine setups."""


@main.command()
@_with_options(_common)
@click.option("--strict", is_flag=True, help="Exit 3 when the verdict is inconclusive.")
@click.option("--lenient-endpoint", is_flag=True,
              help="Allow administrative steps between the final query and the halt.")
def classify(spec_path, scenario_id, limits, fmt, out, strict, lenient_endpoint):
    """Classify a setup over its whole input domain."""
    try:
        machine = _load_machine(spec_path, scenario_id)
        bundle = classification_bundle(machine, limits, strict=not lenient_endpoint)
    except LoopscopeError as e:
        raise click.UsageError(str(e))
    _write(emit_report(bundle, fmt), out)
    if strict and not bundle["verdict"]["conclusive"]:
        sys.exit(EXIT_INCONCLUSIVE)


@main.command()
@_with_options(_common)
@click.option("--strict", is_flag=True, help="Exit 3 when the analysis is inconclusive.")
def analyze(spec_path, scenario_id, limits, fmt, out, strict):
    """Full tree analysis: verdict, per-input real flags, segment strips."""
    try:
        machine = _load_machine(spec_path, scenario_id)
        bundle = analysis_bundle(machine, limits)
    except LoopscopeError as e:
        raise click.UsageError(str(e))
    _write(emit_report(bundle, fmt), out)
    if strict and not bundle["verdict"]["conclusive"]:
        sys.exit(EXIT_INCONCLUSIVE)


@main.command()
@click.option("--scenario", "scenario_id", required=True, help="Timed scenario id.")
@click.option("--trials", default=1000, show_default=True)
@click.option("--seed", "master_seed", default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "md"]), default="json")
@click.option("--records", "include_records", default=0,
              help="Include the first N trial records in the report.")
@click.option("--out", default=None)
def simulate(scenario_id, trials, master_seed, fmt, include_records, out):
    """Seeded Monte Carlo over a timed failure scenario."""
    try:
        entry = load_scenario(scenario_id)
        if entry.kind != "timed-scenario":
            raise LoopscopeError(f"scenario {scenario_id!r} is not a timed scenario")
        records, summary = monte_carlo(entry.payload, trials, master_seed)
    except LoopscopeError as e:
        raise click.UsageError(str(e))
    bundle = simulation_bundle(entry.payload, summary, records, include_records)
    _write(emit_report(bundle, fmt), out)


@main.command()
@_with_options(_common)
@click.option("--trace", "trace_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Trace JSON-lines file to replay.")
def replay(spec_path, scenario_id, limits, fmt, out, trace_path):
    """Re-run a recorded trace and verify it reproduces exactly."""
    from .engine import Trace

    try:
        machine = _load_machine(spec_path, scenario_id)
        with open(trace_path) as fh:
            trace = Trace.from_jsonl(fh.read())
        rerun = engine_replay(trace, machine, limits)
    except LoopscopeError as e:
        raise click.UsageError(str(e))
    identical = rerun == trace
    bundle = trace_bundle(rerun, metrics=trace_metrics(rerun),
                          notes=["replay identical" if identical
                                 else "replay DIVERGED from recording"])
    _write(emit_report(bundle, fmt), out)
    if not identical:
        sys.exit(EXIT_VALIDATION)


@main.command()
@click.option("--verify", "verify_ids", multiple=True,
              help="Verify these goldens (repeatable); --verify-all for every one.")
@click.option("--verify-all", is_flag=True)
@click.option("--format", "fmt", type=click.Choice(["json", "md"]), default="json")
@click.option("--out", default=None)
def scenarios(verify_ids, verify_all, fmt, out):
    """List built-in scenarios, optionally verifying goldens."""
    ids = list_scenarios()
    if not verify_ids and not verify_all:
        _write(json.dumps({"ids": ids}, sort_keys=True, indent=2) + "\n", out)
        return
    targets = ids if verify_all else list(verify_ids)
    try:
        results = [verify_golden(sid) for sid in targets]
    except LoopscopeError as e:
        raise click.UsageError(str(e))
    bundle = goldens_bundle(results)
    _write(emit_report(bundle, fmt), out)
    if not bundle["passed"]:
        sys.exit(1)


@main.command()
@click.option("--addr", default=None,
              help="NDJSON socket host:port (default LOOPSCOPE_ADDR or 127.0.0.1:8787).")
@click.option("--http-addr", default=None,
              help="HTTP/WebSocket host:port (default: socket port + 1).")
@click.option("--transcripts", "transcript_dir", default=None,
              help="Directory for session transcript files.")
def serve(addr, http_addr, transcript_dir):
    """Run the live session service until interrupted."""
    import asyncio

    from .service import serve as serve_async

    host, port = resolve_addr(addr)
    click.echo(f"ndjson socket on {host}:{port}; http on port {port + 1 if http_addr is None else http_addr}",
               err=True)
    try:
        asyncio.run(serve_async(addr=addr, http_addr=http_addr,
                                transcript_dir=transcript_dir))
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
