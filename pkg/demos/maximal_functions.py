"""Maximal functions of a jump and of an oscillating packet.

Run with ``python demos/maximal_functions.py``.
"""

import numpy as np

from psidobench.grid import make_grid, sample
from psidobench.maximal import CubeFamilySpec, hardy_littlewood, q_maximal, sharp_maximal


def main():
    g = make_grid(1, 8.0, 512)
    sign = sample(g, lambda x: np.sign(x[..., 0]), label="sign")
    packet = sample(g, lambda x: np.cos(6 * x[..., 0]) * np.exp(-x[..., 0] ** 2), label="packet")
    probes = [0.0, 0.5, 2.0, 6.0]
    idx = [int(round((x + g.L) / g.dx)) for x in probes]

    print(f"grid: n={g.n}, L={g.L}, N={g.N}, dx={g.dx:.4g}")
    for f in (sign, packet):
        M = hardy_littlewood(f).values.real
        M2 = q_maximal(f, 2.0).values.real
        full = sharp_maximal(f, CubeFamilySpec(dyadic=False)).values.real
        dyadic = sharp_maximal(f).values.real
        print(f"\n{f.label}")
        print(f"{'x':>6} {'|f|':>8} {'Mf':>8} {'M_2 f':>8} {'f#':>8} {'f# dyadic':>10}")
        for x, j in zip(probes, idx):
            print(f"{x:6.2f} {abs(f.values[j]):8.4f} {M[j]:8.4f} {M2[j]:8.4f} "
                  f"{full[j]:8.4f} {dyadic[j]:10.4f}")
        print(f"max f#/Mf = {np.max(full / np.maximum(M, 1e-300)):.4f} (never above 2)")


if __name__ == "__main__":
    main()
