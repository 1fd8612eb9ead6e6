#!/usr/bin/env python3
"""Thin wrapper around the scenario runner.

    python scripts/run_scenario.py --scenario scenarios/demo.json --out out/
"""
import sys

from sbvx.cli import main

if __name__ == "__main__":
    sys.exit(main(["run", *sys.argv[1:]]))
