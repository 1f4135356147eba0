"""Phase sweep over (alpha, p, n) followed by the markdown report.

Equivalent to ``henonlab sweep`` then ``henonlab report`` on the same
directory; the defaults reproduce the alpha = 0, p = 50, n = 1..5 sweep.

    python3 scripts/phase_sweep.py --out runs/alpha0_p50
"""

import argparse
import sys

from henonlab.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--alpha", default="0")
    parser.add_argument("--p", default="50")
    parser.add_argument("--n", default="1..5")
    parser.add_argument("--nr", default="192")
    parser.add_argument("--ntheta", default="96")
    parser.add_argument("--out", required=True)
    args = parser.parse_args()
    code = cli_main(["sweep", "--alpha", args.alpha, "--p", args.p, "--n", args.n,
                     "--nr", args.nr, "--ntheta", args.ntheta, "--out", args.out])
    report_code = cli_main(["report", args.out])
    return code or report_code


if __name__ == "__main__":
    sys.exit(main())
