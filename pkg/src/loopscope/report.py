"""Report assembly and rendering.

Bundles are plain dicts tagged with a ``kind``; every bundle embeds the
spec hash and limits it was computed under, so a report is
self-describing.  JSON output is canonical (sorted keys, fixed
separators): identical inputs produce byte-identical documents.
"""

from __future__ import annotations

import json

from .engine import HALT, Limits
from .errors import DomainError
from .tree import (
    TreeQuery,
    build_tree,
    classify_setup,
    detect_real_queries,
)


def classification_bundle(machine, limits=Limits(), strict=True):
    verdict = classify_setup(machine, limits, strict=strict)
    return {"kind": "classification",
            "spec_hash": machine.spec_hash(),
            "machine": machine.name,
            "limits": limits.to_json(),
            "verdict": verdict.to_json()}


def _canonical_segments(tree):
    """Segment strip along the canonical path (first word answer at each query)."""
    strip = []
    last_depth = 0
    node = tree
    while isinstance(node, TreeQuery):
        strip.append(node.step_depth - last_depth)
        last_depth = node.step_depth
        answer, sub = node.word_branches()[0]
        node = sub
    # closing segment is unknown without halting depth info; report queries count
    return strip


def analysis_bundle(machine, limits=Limits(), strict=True):
    verdict = classify_setup(machine, limits, strict=strict)
    inputs = []
    for input in machine.input_domain():
        tree = build_tree(machine, input, limits)
        report = detect_real_queries(tree)
        inputs.append({
            "input": input,
            "real_flags": report.real_flags(),
            "conclusive": report.conclusive,
            "segments": _canonical_segments(tree),
            "query_prompts": _prompts_on_canonical(tree),
        })
    return {"kind": "analysis",
            "spec_hash": machine.spec_hash(),
            "machine": machine.name,
            "limits": limits.to_json(),
            "verdict": verdict.to_json(),
            "inputs": inputs}


def _prompts_on_canonical(tree):
    prompts = []
    node = tree
    while isinstance(node, TreeQuery):
        prompts.append(node.prompt)
        _answer, node = node.word_branches()[0]
    return prompts


def simulation_bundle(scenario, summary, records, include_records=0):
    bundle = {"kind": "simulation",
              "scenario": scenario.name,
              "summary": summary.to_json()}
    if include_records:
        bundle["records"] = [r.to_json() for r in records[:include_records]]
    return bundle


def trace_bundle(trace, metrics=None, decisive=None, notes=()):
    bundle = {"kind": "trace",
              "spec_hash": trace.spec_hash,
              "input": trace.input,
              "outcome": trace.outcome,
              "output": trace.output,
              "queries": [q.to_json() for q in trace.queries],
              "segments": trace.segments,
              "notes": list(notes)}
    if metrics is not None:
        bundle["metrics"] = metrics.to_json()
    if decisive is not None:
        bundle["decisive_points"] = list(decisive)
    return bundle


def goldens_bundle(results):
    return {"kind": "goldens",
            "passed": all(r.passed for r in results),
            "results": [r.to_json() for r in results]}


def emit_report(bundle, format="json"):
    if format == "json":
        return json.dumps(bundle, sort_keys=True, indent=2) + "\n"
    if format == "md":
        return render_markdown(bundle)
    raise DomainError(f"unknown report format {format!r}")


def _strip_line(segments, closing=None):
    parts = []
    for i, seg in enumerate(segments):
        parts.append(f"[{seg}]")
        parts.append(f"Q{i}")
    if closing is not None:
        parts.append(f"[{closing}]")
    elif parts:
        parts.pop()  # segments list already ends after the last query
    return " ".join(parts) if parts else "(no queries)"


def render_markdown(bundle):
    kind = bundle.get("kind")
    lines = []
    if kind == "classification":
        v = bundle["verdict"]
        lines.append(f"# Classification: {bundle['machine']}")
        lines.append("")
        lines.append(f"- spec_hash: `{bundle['spec_hash']}`")
        lines.append(f"- limits: `{json.dumps(bundle['limits'], sort_keys=True)}`")
        lines.append(f"- class: **{v['class']}**")
        lines.append(f"- conclusive: {v['conclusive']}")
        lines.append(f"- abort reachable: {v['abort_reachable']}")
        if v["evidence"]:
            lines.append("")
            lines.append("## Evidence")
            for item in v["evidence"]:
                lines.append(f"- `{json.dumps(item, sort_keys=True)}`")
        for note in v.get("notes", []):
            lines.append(f"> {note}")
    elif kind == "analysis":
        v = bundle["verdict"]
        lines.append(f"# Analysis: {bundle['machine']}")
        lines.append("")
        lines.append(f"- spec_hash: `{bundle['spec_hash']}`")
        lines.append(f"- limits: `{json.dumps(bundle['limits'], sort_keys=True)}`")
        lines.append(f"- class: **{v['class']}** (conclusive: {v['conclusive']})")
        lines.append("")
        lines.append("## Inputs")
        for entry in bundle["inputs"]:
            lines.append(f"### input `{json.dumps(entry['input'], sort_keys=True)}`")
            lines.append(f"- real flags: {entry['real_flags']}")
            for i, seg in enumerate(entry["segments"]):
                lines.append(f"- segments: [{seg} steps] before Q{i}")
            if not entry["segments"]:
                lines.append("- segments: (no queries on canonical path)")
    elif kind == "simulation":
        s = bundle["summary"]
        lines.append(f"# Simulation: {bundle['scenario']}")
        lines.append("")
        lines.append(f"- trials: {s['trials']}  master seed: {s['master_seed']}")
        lines.append("")
        lines.append("| outcome | count | rate | 95% Wilson |")
        lines.append("|---|---|---|---|")
        for row in s["rates"]:
            lines.append(f"| {row['outcome']} | {row['count']} | {row['rate']:.4f} "
                         f"| [{row['wilson_low']:.4f}, {row['wilson_high']:.4f}] |")
        if s["attribution"]:
            lines.append("")
            lines.append("## Decisive modes (ablation)")
            for row in s["attribution"]:
                lines.append(f"- {row['mode_id']} ({row['category_id']}): "
                             f"decisive in {row['decisive']} trials")
        for note in s.get("notes", []):
            lines.append(f"> {note}")
    elif kind == "trace":
        lines.append("# Trace")
        lines.append("")
        lines.append(f"- spec_hash: `{bundle['spec_hash']}`")
        lines.append(f"- outcome: **{bundle['outcome']}**"
                     + (f" output `{bundle['output']}`"
                        if bundle["outcome"] == HALT else ""))
        segs = bundle["segments"]
        lines.append(f"- strip: {_strip_line(segs[:-1], closing=segs[-1]) if segs else '(empty)'}")
        if "decisive_points" in bundle:
            lines.append(f"- decisive points: {bundle['decisive_points']}")
        for note in bundle.get("notes", []):
            lines.append(f"> {note}")
    elif kind == "goldens":
        lines.append("# Golden suite")
        lines.append("")
        for r in bundle["results"]:
            status = "pass" if r["passed"] else "FAIL"
            lines.append(f"- {r['id']}: {status}")
            for d in r["diffs"]:
                lines.append(f"  - `{d['field']}` expected "
                             f"`{json.dumps(d['expected'], sort_keys=True)}` got "
                             f"`{json.dumps(d['actual'], sort_keys=True)}`")
    else:
        lines.append(f"```\n{json.dumps(bundle, sort_keys=True, indent=2)}\n```")
    return "\n".join(lines) + "\n"
