"""Limit cycles born at the first Hopf delay, followed in tau.

Continues the branch, lists its Floquet events, switches onto the
period-doubled branch, and checks one stable orbit by forward simulation.
Writes the min/max x1 envelope of the branch as an SVG file.
"""

import sys
from pathlib import Path

import numpy as np

from delaybif.analytic import hopf_table
from delaybif.model import REFERENCE
from delaybif.periodic.branch import continue_branch, hopf_seed, period_doubling_seed
from delaybif.periodic.events import EventKind
from delaybif.plotting import emit_plot
from delaybif.simulate import Constant, integrate


def show(name, br):
    print(f"{name}: {len(br)} orbits, tau in [{br.taus.min():.4f}, {br.taus.max():.4f}], stop: {br.stop_reason}")
    for e in br.events:
        print(f"  {e.kind.value:<20} tau={e.tau_at:.5f}  multiplier={e.multiplier}")


def main(out="demo_out"):
    out = Path(out)
    out.mkdir(exist_ok=True)
    hp = hopf_table(REFERENCE, 0).family(1)[0]
    br = continue_branch(hopf_seed(REFERENCE, hp), (0.0, 6.0))
    show("first branch", br)
    pd = next(e for e in br.events if e.kind is EventKind.PERIOD_DOUBLING)
    show("doubled branch", continue_branch(period_doubling_seed(pd.orbit), (3.0, 6.0)))

    pt = min(br.points, key=lambda p: abs(p.tau - 2.5))
    tr = integrate(REFERENCE.with_tau(pt.tau), Constant((0.05, 0.0)), 1500.0, 1e-9)
    late = tr(np.linspace(1400.0, 1500.0, 4000))
    lo, hi = pt.orbit.extents
    print(f"tau={pt.tau:.3f}: orbit x1 in [{lo:.4f}, {hi:.4f}], simulation x1 in "
          f"[{late[:, 0].min():.4f}, {late[:, 0].max():.4f}]")

    ext = np.array([p.orbit.extents for p in br.points])
    table = {"tau": br.taus, "x1_min": ext[:, 0], "x1_max": ext[:, 1]}
    (out / "branch.svg").write_text(emit_plot(table, {"kind": "envelope", "ylabel": "x1"}))
    print(f"wrote {out / 'branch.svg'}")


if __name__ == "__main__":
    main(*sys.argv[1:])
