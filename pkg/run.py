#!/usr/bin/env python3
"""
Run the FL / non-FL resource allocation experiments.

  python run.py solve --config F --seed S [--trace] [--out DIR]
                         → optimize one channel draw and compare with the baseline
  python run.py sweep --config F --var M --values 20,40,60,80,100 --trials 50 --seed 0 --out DIR [--jobs J]
                         → Monte-Carlo sweep of M, L or D (trials.csv, summary.csv)
  python run.py oracle --config F --seed S --steps 15 --rounds 3 [--out DIR]
                         → grid-search reference on a toy instance (2L + 3K + 1 <= 6)

Exit codes: 0 success, 1 bad input or config, 2 infeasible instance.
"""
import sys
from pathlib import Path


REPO_ROOT = Path(__file__).resolve().parent
if str(REPO_ROOT) not in sys.path:
    sys.path.insert(0, str(REPO_ROOT))

MODES = ("solve", "sweep", "oracle")


def _usage() -> str:
    return f"usage: python run.py {{{','.join(MODES)}}} [options]  (python run.py <mode> --help for details)"


if __name__ == '__main__':
    mode = sys.argv[1] if len(sys.argv) > 1 else ''

    if mode == 'solve':
        from flmimo.harness.solve import main
        sys.exit(main(sys.argv[2:]))
    elif mode == 'sweep':
        from flmimo.harness.sweep import main
        sys.exit(main(sys.argv[2:]))
    elif mode == 'oracle':
        from flmimo.harness.oracle import main
        sys.exit(main(sys.argv[2:]))
    else:
        print(_usage(), file=sys.stderr)
        sys.exit(1)
