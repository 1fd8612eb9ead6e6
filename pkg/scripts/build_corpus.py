#!/usr/bin/env python3
"""Generate the standard scenario corpus used by the acceptance suite.

    python scripts/build_corpus.py --out corpus/
"""
import argparse
import json
import tempfile

from sbvx.cli import build_corpus

FIELD = {
    "kind": "closed_form",
    "domain": {"type": "disk", "center": [0, 0], "radius": 1.0},
    "p_minus": 1.3, "p_plus": 1.7,
    "params": {"form": "affine", "p0": 1.5, "a": [0.1, 0.05]},
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="corpus")
    ap.add_argument("--base-seed", type=int, default=1000)
    args = ap.parse_args()

    groups = []
    for s in (0.5, 0.75, 0.9):
        for kind in (
            "piecewise-constant-with-arc-jump",
            "sphere-vortex-with-slit",
            "random-cells-with-random-polyline",
        ):
            budget = 0.5 * 0.05 * (1 - s) / 2
            groups.append({
                "name": f"{kind.split('-')[0]}_s{int(100 * s)}",
                "count": 6,
                "pipeline": "approximate",
                "exponent_field": FIELD,
                "map": {"kind": kind, "params": {"budget": budget, "k": 2}},
                "params": {"s": s, "eta": 0.05},
            })
    spec = {"base_seed": args.base_seed, "groups": groups}
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as f:
        json.dump(spec, f)
        spec_path = f.name
    raise SystemExit(build_corpus(spec_path, args.out))


if __name__ == "__main__":
    main()
