"""Interface-placement demo for the hybrid model.

The hybrid (APL) model replaces the lower part of the domain, where the
anisotropy parameter eps(z) is tiny, by the cheap 1D limit model.  The
deeper the interface is pushed (the smaller eps at the interface), the
closer the hybrid gets to the full reformulated (AP) solution -- until the
modeling error drops below the discretization error and the error curve
plateaus.  Past that point a deeper interface only costs degrees of freedom.

This demo scans interface positions on two meshes, prints the error curve
and the automatically selected plateau point, and shows that the selected
interface moves deeper as the mesh is refined.

Run:  python3 demos/03_interface_placement.py
"""

import numpy as np

from aniso_hybrid import (DOMAIN_B, EpsProfile, build_mesh,
                          find_interface_for_eps, interface_scan, make_setup)


def candidates(mesh, eps):
    cands = []
    for target in np.logspace(-1, -7, 9):
        i = find_interface_for_eps(mesh, eps, float(target))
        if i not in cands:
            cands.append(i)
    return cands


def main():
    setup = make_setup("a", DOMAIN_B, EpsProfile.tanh_profile(1e-8, 1.0, 30.0))
    for cells in (32, 64):
        nx = nz = cells - 1
        mesh = build_mesh(DOMAIN_B, nx, nz)
        scan = interface_scan(mesh, setup, candidates(mesh, setup.eps),
                              plateau_tol=0.10)
        print(f"--- {cells}x{cells} cells ---")
        print(f"{'iota':>6} {'eps(z_iota)':>13} {'rel H1':>12}")
        for iota, e_i, err in zip(scan.iotas, scan.eps_iotas, scan.rel_h1s):
            mark = "  <- selected" if iota == scan.iota_star else ""
            print(f"{iota:>6} {e_i:>13.3e} {err:>12.3e}{mark}")
        print(f"plateau point: iota={scan.iota_star}, "
              f"eps(z_iota)={scan.eps_star:.3e}\n")


if __name__ == "__main__":
    main()
