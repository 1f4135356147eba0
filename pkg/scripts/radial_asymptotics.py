"""Scaled radial energies against their large-p limits over a range of p.

Prints p * int |grad v_p|^2 for the Lane-Emden two-zone solution, the
per-region values and p * E_p(u_rad) for each alpha, and writes them to CSV.

    python3 scripts/radial_asymptotics.py --p 25,50,100,200,400,800 --alpha 0,2 --out radial.csv
"""

import argparse
import csv

from henonlab.cli import parse_alpha_list, parse_float_list
from henonlab.constants import EIGHT_PI_E, lane_emden_dirichlet_limit, radial_energy_limit
from henonlab.radial import lane_emden_nodal, radial_profile


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--p", default="25,50,100,200,400,800")
    parser.add_argument("--alpha", default="0,2")
    parser.add_argument("--out", help="CSV destination")
    args = parser.parse_args()
    ps = parse_float_list(args.p)
    alphas = parse_alpha_list(args.alpha)
    rows = []
    for p in ps:
        le = lane_emden_nodal(p)
        inner, outer = le.region_dirichlet
        row = {"p": p, "p_dirichlet": le.p_dirichlet, "target": lane_emden_dirichlet_limit(),
               "inner_ratio_8pie": p * inner / EIGHT_PI_E, "outer_ratio_8pie": p * outer / EIGHT_PI_E}
        for alpha in alphas:
            row[f"p_energy_a{alpha:g}"] = radial_profile(alpha, p).p_energy
            row[f"target_a{alpha:g}"] = radial_energy_limit(alpha)
        rows.append(row)
        print("  ".join(f"{k}={v:.10g}" for k, v in row.items()))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
