"""Exact Gaussian moment curves for every flow, on the two benchmark pairs.

Evolves mean, variance and KL along the diffusion (W), reaction (FR),
combined (WFR) flows and their tempered variants for the 1D pairs
mu0 = N(0,1) -> pi = N(20, 0.1) and mu0 = N(0,1) -> pi = N(1, 5), then
prints a compact table and writes one CSV per flow under results/oracle/.

Run:  python3 demos/gaussian_flow_curves.py
"""

from pathlib import Path

import numpy as np

from wfr_smc.gaussian_flows import GaussianState, evolve, gaussian_kl
from wfr_smc.schedules import linear_horizon

OUT = Path("results/oracle")
GRID = np.linspace(0.0, 5.0, 101)
KINDS = ["w", "fr", "wfr", "tempered_w", "tempered_fr", "tempered_wfr"]


def run_pair(label, pi):
    mu0 = GaussianState([0.0], [[1.0]])
    schedule = linear_horizon(GRID[-1])
    print(f"\n=== {label} ===")
    print(f"{'t':>5} " + " ".join(f"{k:>14}" for k in KINDS) + "   (KL values)")
    curves = {}
    for kind in KINDS:
        states = evolve(kind, mu0, pi, GRID, schedule=schedule)
        curves[kind] = states
        rows = ["t,m,C,kl"]
        for s in states:
            rows.append(f"{s.time:.6g},{s.mean[0]:.12g},{s.cov[0, 0]:.12g},"
                        f"{gaussian_kl(s, pi):.12g}")
        path = OUT / f"{label}_{kind}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    for i in range(0, len(GRID), 10):
        kls = [gaussian_kl(curves[k][i], pi) for k in KINDS]
        print(f"{GRID[i]:5.1f} " + " ".join(f"{v:14.6g}" for v in kls))
    # the combined flow is never slower than either part, and tempering
    # never helps: visible directly in the columns above
    kl_w = np.array([gaussian_kl(s, pi) for s in curves["w"]])
    kl_fr = np.array([gaussian_kl(s, pi) for s in curves["fr"]])
    kl_wfr = np.array([gaussian_kl(s, pi) for s in curves["wfr"]])
    assert np.all(kl_wfr <= np.minimum(kl_w, kl_fr) + 1e-9)
    print(f"wrote {len(KINDS)} CSVs to {OUT}/")


if __name__ == "__main__":
    run_pair("narrow_target", GaussianState([20.0], [[0.1]]))
    run_pair("wide_target", GaussianState([1.0], [[5.0]]))
