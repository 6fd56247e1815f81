"""Theoretical versus simulated thresholds at a fixed ARL.

The closed-form threshold is asymptotic in w.  Calibrating by simulation shows
how far off it is for short windows.  Pass a trial count to trade accuracy for
time, e.g. ``python3 demos/04_threshold_table.py 100``.
"""

# %%
import sys

from dascusum import DetectorConfig, GaussianParams, calibrate_threshold
from dascusum.tuning import delta0_star, threshold_for_arl, v_star

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 200
theta0 = GaussianParams(1, 1)
gamma = 5000

print(f"{'w':>4} {'theory':>8} {'simulated':>10}")
for w in (10, 20, 30, 40, 50, 100, 150):
    d0 = delta0_star(1.0, w)
    base = DetectorConfig(threshold=1.0, window=w, drift=v_star(d0, w))
    b_sim = calibrate_threshold(gamma, base, theta0, "das", trials, seed=7)
    print(f"{w:>4} {threshold_for_arl(gamma, d0):8.3f} {b_sim:10.3f}", flush=True)
