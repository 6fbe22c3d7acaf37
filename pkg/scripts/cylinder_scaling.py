"""Normalized frequency-ball integral ``I(R, tau) * tau / R`` over an (R, tau) grid.

A uniform constant would make the ratio flat.  The table shows the exact
ball integral, the square ``(r, t)`` integral and the one-dimensional
majorant side by side, plus a fit of the ball values against
``R log(tau) / tau^2``, which tracks them much more closely.
"""

import argparse

import numpy as np

from maxstab.reconstruction import cylindrical_integral


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radii", type=float, nargs="+", default=[1.0, 2.0, 4.0])
    ap.add_argument("--taus", type=float, nargs="+", default=[16.0, 64.0, 256.0])
    ap.add_argument("--k2", type=float, default=1.0)
    args = ap.parse_args()
    forms = ("ball", "cylinder", "majorant")
    print(f"{'R':>6} {'tau':>8} " + " ".join(f"{f:>12}" for f in forms) + f" {'ball/(R ln tau/tau^2)':>22}")
    spread = {f: [] for f in forms}
    for R in args.radii:
        for tau in args.taus:
            vals = {f: cylindrical_integral(R, tau, args.k2, 1.0, f) for f in forms}
            for f in forms:
                spread[f].append(vals[f] * tau / R)
            alt = vals["ball"] / (R * np.log(tau) / tau**2)
            print(f"{R:6.2f} {tau:8.1f} " + " ".join(f"{spread[f][-1]:12.4e}" for f in forms) + f" {alt:22.4e}")
    for f in forms:
        print(f"spread of I tau / R ({f}): {max(spread[f]) / min(spread[f]):.2f}")


if __name__ == "__main__":
    main()
