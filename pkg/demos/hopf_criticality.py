"""Hopf delays of the lower equilibrium and the criticality of each.

Prints the first Hopf points of both families for the reference
parameters, the sign of the first Lyapunov coefficient from the closed
form and from the general center-manifold formula, and the unstable
delay intervals.
"""

from delaybif.analytic import hopf_table, unstable_set
from delaybif.lyapunov import classify_all_hopf, lyapunov_general_oracle
from delaybif.model import REFERENCE, lower_equilibrium, swing_jet


def main():
    p = REFERENCE
    jet = swing_jet(p, lower_equilibrium(p))
    print(f"a={p.a}, atilde={p.atilde}, w={p.w}, c={p.c:.6f}")
    print(f"{'fam':>3} {'n':>2} {'tau':>10} {'omega':>8} {'closed':>7} {'general L':>12}  criticality")
    for hc in sorted(classify_all_hopf(p, 4), key=lambda h: h.point.tau):
        hp, r = hc.point, hc.report
        L = lyapunov_general_oracle(jet, p.a, p.atilde, hp.omega, hp.tau)
        print(f"{hp.family:>3} {hp.n:>2} {hp.tau:10.5f} {hp.omega:8.5f} {r.sign:>7d} {L:12.4e}  {r.criticality.value}")

    us = unstable_set(hopf_table(p, 20))
    print(f"\nn_max = {us.n_max} (zero-based index)")
    for lo, hi in us.intervals[:4]:
        print(f"  unstable for {lo:.4f} < tau < {hi:.4f}")
    print(f"  ... and for tau > {us.intervals[-1][0]:.4f}")


if __name__ == "__main__":
    main()
