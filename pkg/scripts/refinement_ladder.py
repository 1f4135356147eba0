"""Energy, residual and Morse counts of one cell across grid resolutions.

Integer outputs (m_n, case, region count) are trusted once they stop
changing between consecutive rungs.

    python3 scripts/refinement_ladder.py --alpha 0 --p 30 --n 2 --ladder 48x24,96x48,192x96
"""

import argparse
import time

from henonlab.constants import ProblemParams
from henonlab.nehari import SolveConfig, minimize, solver_mesh
from henonlab.nodal import analyze
from henonlab.radial import radial_profile
from henonlab.spectrum import morse_index_symmetric


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--alpha", type=float, default=0.0)
    parser.add_argument("--p", type=float, default=30.0)
    parser.add_argument("--n", type=int, default=2)
    parser.add_argument("--ladder", default="48x24,96x48,192x96")
    parser.add_argument("--restarts", type=int, default=3)
    args = parser.parse_args()
    params = ProblemParams(alpha=args.alpha, p=args.p, n=args.n)
    prof = radial_profile(args.alpha, args.p)
    print(f"radial p*E = {prof.p_energy:.10g}")
    print("grid       p_energy      residual   m_n  case   regions  init_kind       seconds")
    for rung in args.ladder.split(","):
        nr, nt = (int(x) for x in rung.split("x"))
        start = time.perf_counter()
        mesh = solver_mesh(params, nr, nt, profile=prof)
        sol = minimize(SolveConfig(restarts=args.restarts, floor_aware=True), params, mesh, prof)
        morse = morse_index_symmetric(mesh, sol.field, params.p)
        rep = analyze(mesh, sol.field, params, energies=False)
        print(f"{rung:<10} {sol.scaled_energy:<13.10g} {sol.residual:<10.2e} {morse.negative_count:<4} "
              f"{rep.case:<6} {rep.region_count:<8} {sol.init_kind:<15} {time.perf_counter() - start:.1f}")


if __name__ == "__main__":
    main()
