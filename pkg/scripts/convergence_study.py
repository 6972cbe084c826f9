"""Refinement study: identity residual norms on successively halved grids.

Each level halves dx, dt and dt_out of the previous one and prints the
L-inf/L2 norms of every local identity plus the coarse/fine ratios, which
approach 4 for a second-order discretization.

    python3 scripts/convergence_study.py scenarios/free_gaussian.cfg --levels 3
"""

import argparse

from wavefield import build_report
from wavefield.scenario import load_scenario, simulate

LOCAL = ("continuity", "energy_frequency", "momentum_balance", "local_balance")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario")
    ap.add_argument("--levels", type=int, default=3)
    args = ap.parse_args()

    s = load_scenario(args.scenario)
    prev = None
    print(f"{'n_points':>9} {'identity':<17} {'Linf':>10} {'L2':>10} {'ratio Linf':>11} {'ratio L2':>9}")
    for _ in range(args.levels):
        h = simulate(s)
        if prev is None:
            rep = build_report(h, LOCAL)
            rows = {t: (e.linf, e.l2, None, None) for t, e in rep.entries.items()}
        else:
            rep = build_report(prev, LOCAL, refinement=h)
            rows = {t: (e.refined_linf, e.refined_l2, e.ratio_linf, e.ratio) for t, e in rep.entries.items()}
        for tag, (linf, l2, rl, r2) in rows.items():
            ratios = "" if rl is None else f"{rl:11.3f} {r2:9.3f}"
            print(f"{h.grid.n_points:>9} {tag:<17} {linf:10.3e} {l2:10.3e} {ratios}")
        prev, s = h, s.refined()


if __name__ == "__main__":
    main()
