"""Regenerate the JSON fixtures shipped in src/hyprod/fixtures."""

import json
import math
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "hyprod" / "fixtures"


def dump(name, doc):
    (OUT / name).write_text(json.dumps(doc, indent=2) + "\n")


def cycle(n):
    return {"kind": "FiniteGraph", "label": f"c{n}", "vertices": list(range(n)),
            "edges": [[i, (i + 1) % n] for i in range(n)]}


def star(arms):
    edges, nxt = [], 1
    for L in arms:
        prev = 0
        for _ in range(L):
            edges.append([prev, nxt])
            prev, nxt = nxt, nxt + 1
    return {"kind": "FiniteGraph", "label": "star_" + "".join(map(str, arms)),
            "vertices": list(range(nxt)), "edges": edges}


def random_tree(n, seed):
    rng = np.random.default_rng(seed)
    edges = [[int(rng.integers(0, i)), i, float(rng.choice([0.5, 1.0, 1.5, 2.0]))] for i in range(1, n)]
    return {"kind": "FiniteGraph", "label": f"random_tree_{n}", "vertices": list(range(n)), "edges": edges}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    dump("star_234.json", star([2, 3, 4]))
    dump("binary_d4.json", {"kind": "RegularTree", "label": "binary_d4", "branching": 2, "depth": 4,
                            "busemann": {"ray": [0, 1, 3, 7, 15]}})
    dump("ternary_d3.json", {"kind": "RegularTree", "label": "ternary_d3", "branching": 3, "depth": 3})
    dump("random_tree_50.json", random_tree(50, 7))
    dump("c4.json", cycle(4))
    dump("c40.json", cycle(40))
    dump("line.json", {"kind": "Segment", "label": "line", "lo": -10.0, "hi": 10.0,
                       "busemann": {"closed_form": "segment_plus", "origin": 0.0}})
    dump("segment10.json", {"kind": "Segment", "label": "segment10", "lo": 0.0, "hi": 10.0,
                            "busemann": {"closed_form": "segment_plus", "origin": 0.0}})
    dump("halfplane.json", {"kind": "UpperHalfPlane", "label": "halfplane",
                            "box": {"x": [-5.0, 5.0], "y": [math.exp(-2), math.exp(2)]},
                            "h": 0.1, "headroom": 3.0,
                            "busemann": {"closed_form": "uhp_vertical", "origin": [0.0, 1.0]}})
    dump("halfplane_small.json", {"kind": "UpperHalfPlane", "label": "halfplane_small",
                                  "box": {"x": [-1.0, 1.0], "y": [math.exp(-1), math.exp(1)]},
                                  "h": 0.2, "headroom": 3.0,
                                  "busemann": {"closed_form": "uhp_vertical", "origin": [0.0, 1.0]}})
    dump("cross.json", {"label": "cross", "factor1": "line.json", "factor2": "line.json",
                        "mode": "basepoint", "basepoints": [0.0, 0.0], "flavor": "max", "mesh": 0.25})
    dump("diagonal.json", {"label": "diagonal", "factor1": "line.json", "factor2": "line.json",
                           "mode": "busemann", "flavor": "max", "mesh": 0.25})
    dump("halfplane_product.json", {"label": "halfplane_product", "factor1": "halfplane.json",
                                    "factor2": "halfplane.json", "mode": "busemann", "flavor": "max",
                                    "mesh": 0.1, "delta_samples": 200, "delta_seed": 0})
    dump("halfplane_small_product.json", {"label": "halfplane_small_product",
                                          "factor1": "halfplane_small.json", "factor2": "halfplane_small.json",
                                          "mode": "busemann", "flavor": "max", "mesh": 0.2,
                                          "delta_samples": 60, "delta_seed": 0})
    dump("cross_rays.json", {"rays": [{"toward": [10.0, 10.0]}, {"toward": [-10.0, 10.0]},
                                      {"toward": [10.0, -10.0]}, {"toward": [-10.0, -10.0]}]})
    lo = math.exp(-2)
    dump("halfplane_rays.json", {"rays": [{"from": [[0.0, 1.0], [0.0, 1.0]],
                                           "toward": [[4.0 * s1, lo], [4.0 * s2, lo]]}
                                          for s1 in (1, -1) for s2 in (1, -1)]})


if __name__ == "__main__":
    main()
