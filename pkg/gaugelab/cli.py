import argparse
import os
import sys

from .config import KINDS, ExperimentConfig
from .core import run
from .errors import LabError
from .io import load_config, save_json
from .validator import validate


def build_parser():
    parser = argparse.ArgumentParser(description="Run gauge-lab experiments on Klein-Gordon wave packets.")
    parser.add_argument('--config', help="Path to a JSON experiment config", default=None)
    parser.add_argument('--kind', choices=KINDS, help="Override the experiment kind", default=None)
    parser.add_argument('--seed', type=int, help="Override the measurement seed", default=None)
    parser.add_argument('--out', help="Output directory", default=None)
    parser.add_argument('--emit-plots', action='store_true', help="Write matplotlib scripts next to the series")
    parser.add_argument('--validate-only', action='store_true', help="Print diagnostics and exit")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    out_dir = args.out
    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
        if args.kind:
            config.kind = args.kind
        if args.seed is not None:
            config.measurement.seed = args.seed
        out_dir = out_dir or config.output.directory

        if args.validate_only:
            diagnostics = validate(config)
            for d in diagnostics:
                print(f"  - {d}")
            print(f"{len(diagnostics)} diagnostics.")
            return 2 if diagnostics else 0

        run(config, out_dir, emit_plots=args.emit_plots or None)
    except LabError as exc:
        target = os.path.join(out_dir or ExperimentConfig().output.directory, "error.json")
        save_json(exc.to_record(), target)
        print(f"Error [{exc.code}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
