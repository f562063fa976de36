"""Period-doubling cascade below the accumulation delay.

Follows the branch from the second first-family Hopf delay, switching at
each period doubling, and fits the geometric approach of the doubling
delays to the accumulation point.
"""

import numpy as np

from delaybif.model import REFERENCE
from delaybif.periodic.cascade import cascade_scan, feigenbaum_ratios, log_fit

TAU_INF = 12.21308


def main():
    steps = cascade_scan(REFERENCE, (5.0, 12.22), 6)
    for s in steps:
        print(f"PD at tau={s.tau:.8f}  period {s.parent_period:.3f} -> {s.period:.3f}  multiplier {s.multiplier:.5f}")
    taus = np.array([s.tau for s in steps])
    if taus.size >= 3:
        slope, _, r2 = log_fit(taus, TAU_INF)
        print(f"log(tau_inf - tau_k) ~ {slope:.3f} k, R^2 = {r2:.4f}")
        print("spacing ratios", np.round(feigenbaum_ratios(taus), 3))


if __name__ == "__main__":
    main()
