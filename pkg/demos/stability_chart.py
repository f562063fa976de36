"""Stability chart of the lower equilibrium in the (tau, atilde) plane.

Counts unstable characteristic roots on a grid from the crossing formula,
spot-checks the count against the numerical spectrum, and writes the chart
and the Hopf curves as SVG files.
"""

import sys
from pathlib import Path

import numpy as np

from delaybif.analytic import hopf_curves, stability_chart
from delaybif.model import REFERENCE
from delaybif.plotting import emit_plot
from delaybif.spectrum import Quasipolynomial, approximate_spectrum


def main(out="demo_out"):
    out = Path(out)
    out.mkdir(exist_ok=True)
    a, c = REFERENCE.a, REFERENCE.c
    taus = np.linspace(0.0, 50.0, 126)
    atildes = np.linspace(0.03, 0.25, 45)
    chart = stability_chart(a, c, taus, atildes)
    print(f"grid {chart.n_u.shape}, unstable fraction {np.mean(chart.n_u > 0):.3f}")

    rng = np.random.default_rng(0)
    for _ in range(5):
        i, j = rng.integers(len(atildes)), rng.integers(len(taus))
        qp = Quasipolynomial(a, atildes[i], c, taus[j])
        print(f"  atilde={atildes[i]:.4f} tau={taus[j]:6.2f}: formula n_u={chart.n_u[i, j]}, "
              f"spectrum n_u={approximate_spectrum(qp).n_u}")

    ii, jj = np.meshgrid(np.arange(len(atildes)), np.arange(len(taus)), indexing="ij")
    table = {"tau": taus[jj].ravel(), "atilde": atildes[ii].ravel(), "n_u": chart.n_u.ravel()}
    (out / "chart.svg").write_text(emit_plot(table, {"x": "tau", "y": ["atilde"], "kind": "scatter",
                                                     "color_by": "n_u", "title": "unstable root count"}))
    curves = hopf_curves(a, c, atildes, 50.0, 3)
    rows = {"atilde": [], "tau": []}
    for pts in curves.values():
        rows["atilde"] += list(pts[:, 0])
        rows["tau"] += list(pts[:, 1])
    (out / "hopf_curves.svg").write_text(emit_plot(rows, {"x": "tau", "y": ["atilde"], "kind": "scatter"}))
    print(f"wrote {out / 'chart.svg'} and {out / 'hopf_curves.svg'}")


if __name__ == "__main__":
    main(*sys.argv[1:])
