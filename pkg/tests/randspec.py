"""Seeded generator of small random process-machine specs.

Machines are linear chains of compute / query / branch-diamond segments
over a binary alphabet with single-symbol answers, ending in a halt.
Every generated spec is valid by construction and fully enumerable at
modest limits, which makes them suitable for exhaustive property checks.
"""

import random

from loopscope.ir import spec_from_json


def random_spec_json(seed, max_segments=4, max_queries=3):
    rng = random.Random(seed)
    n_segments = rng.randint(1, max_segments)
    vars_ = [{"name": "w", "domain": {"kind": "word"}}]
    query_vars = []
    nodes = {}
    order = []

    def add(node_id, node):
        nodes[node_id] = node
        order.append(node_id)

    queries = 0
    for i in range(n_segments):
        kind = rng.choice(["compute", "query", "branch"])
        if kind == "query" and queries >= max_queries:
            kind = "compute"
        if kind == "compute":
            src = rng.choice(['"0"', '"1"', "w"])
            add(f"c{i}", {"kind": "compute", "assignments": [["w", src]], "next": None})
        elif kind == "query":
            var = f"q{queries}"
            query_vars.append(var)
            vars_.append({"name": var, "domain": {"kind": "word"}})
            prompt = rng.choice(['"0"', '"1"', "w"])
            add(f"q{i}", {"kind": "query", "prompt": prompt, "bind": var, "next": None})
            queries += 1
        else:
            # diamond: branch into two computes that rejoin
            subject = rng.choice(query_vars + ["w"])
            add(f"b{i}", {"kind": "branch", "condition": f'{subject} == "1"',
                          "then": f"bt{i}", "else": f"be{i}"})
            nodes[f"bt{i}"] = {"kind": "compute",
                               "assignments": [["w", rng.choice(['"0"', '"1"'])]],
                               "next": None}
            nodes[f"be{i}"] = {"kind": "compute",
                               "assignments": [["w", rng.choice(['"1"', '"0"', "w"])]],
                               "next": None}
            order.append(f"bt{i}")
            order.append(f"be{i}")

    output = rng.choice(query_vars + ["w", '"0"'])
    nodes["halt"] = {"kind": "halt", "output": output}

    # wire each segment entry to the next segment's entry
    entries = [nid for nid in order if nid[0] in "cqb" and not nid.startswith(("bt", "be"))]
    entries.append("halt")
    for current, following in zip(entries, entries[1:]):
        node = nodes[current]
        if node["kind"] == "branch":
            nodes["bt" + current[1:]]["next"] = following
            nodes["be" + current[1:]]["next"] = following
        else:
            node["next"] = following

    return {"name": f"random-{seed}", "alphabet": ["0", "1"], "max_answer_len": 1,
            "inputs": [], "vars": vars_, "entry": entries[0], "nodes": nodes}


def random_machine(seed, **kwargs):
    return spec_from_json(random_spec_json(seed, **kwargs))
