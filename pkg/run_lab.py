#!/usr/bin/env python3
"""Run a gauge-lab experiment from a checkout: python run_lab.py --config example.json"""
import os
import sys

# Make the package importable without installing it
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from gaugelab.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
