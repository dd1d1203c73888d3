"""Grid-convergence demo: the three discretizations side by side.

Solves a manufactured anisotropic problem (tanh anisotropy profile with a
floor of 1e-8) on a sequence of meshes with the direct model (P), the
mean/fluctuation reformulation (AP) and the hybrid model (APL), then prints
relative errors and the empirical order of convergence.

Run:  python3 demos/01_convergence.py
"""

import numpy as np

from aniso_hybrid import (DOMAIN_B, EpsProfile, build_mesh, eoc, error_norms,
                          find_interface_for_eps, make_setup, solve_model,
                          split_at_interface)


def main():
    setup = make_setup("a", DOMAIN_B, EpsProfile.tanh_profile(1e-8, 1.0, 30.0))
    cell_counts = (16, 32, 64, 128)

    print(f"{'cells':>7} {'model':>6} {'h':>10} {'rel L2':>12} {'rel H1':>12}")
    history = {kind: [] for kind in ("P", "AP", "APL")}
    for cells in cell_counts:
        nx = nz = cells - 1
        mesh = build_mesh(DOMAIN_B, nx, nz)
        iota = find_interface_for_eps(mesh, setup.eps, 1e-6)
        split = split_at_interface(mesh, iota)
        for kind in ("P", "AP", "APL"):
            field = solve_model(kind, mesh, setup,
                                split=split if kind == "APL" else None)
            rep = error_norms(field, setup)
            history[kind].append((mesh.h, rep.rel_h1))
            print(f"{cells:>5}^2 {kind:>6} {mesh.h:>10.4f} "
                  f"{rep.rel_l2:>12.3e} {rep.rel_h1:>12.3e}")

    print("\nempirical order of convergence (H1, log-log slope):")
    for kind, pairs in history.items():
        print(f"  {kind:>4}: {eoc(pairs):.3f}   (first-order expected)")


if __name__ == "__main__":
    main()
