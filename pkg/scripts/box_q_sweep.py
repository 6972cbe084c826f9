"""Q and local energy of box eigenstates n = 1..N on a fixed grid.

Prints, per state, the measured constant Q value with its spread along x for
the spectral (sine) and 3-point derivative backends next to the closed form
hbar^2 k_n^2 / (m L). Q is flat in x for every state but its level grows as
n^2.

    python3 scripts/box_q_sweep.py --n 6 --points 4096
"""

import argparse

import numpy as np

from wavefield import PotentialSpec, box_eigenstate, energy_field, eval_potential, make_grid, q_field


def spread(v):
    return (v.max() - v.min()) / abs(v.mean())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--length", type=float, default=1.0)
    args = ap.parse_args()

    g = make_grid(0.0, args.length, args.points)
    v = eval_potential(PotentialSpec.box(), g)
    print(f"{'n':>3} {'Q (sine)':>18} {'spread':>9} {'Q (3-point)':>18} {'spread':>9} {'closed form':>18} "
          f"{'E mean':>14} {'E spread':>9}")
    q1 = None
    for n in range(1, args.n + 1):
        psi = box_eigenstate(g, n)
        qs = q_field(psi, deriv="sine").valid
        qf = q_field(psi, deriv="fd").valid
        E = energy_field(psi, v).valid
        exact = (n * np.pi / args.length) ** 2 / args.length
        q1 = q1 or qs.mean()
        print(f"{n:>3} {qs.mean():18.12g} {spread(qs):9.1e} {qf.mean():18.12g} {spread(qf):9.1e} {exact:18.12g} "
              f"{E.mean():14.8g} {spread(E):9.1e}   Q(n)/Q(1) = {qs.mean() / q1:.6g}")


if __name__ == "__main__":
    main()
