"""Acceptance criteria, one test per criterion.

Each check returns ``(passed, detail)``.  Results are collected in
``RESULTS`` and printed as one PASS/FAIL line per criterion at the end of the
pytest run (see ``conftest.py``).  The file can also be run directly:

    python3 tests/test_acceptance.py
"""

from __future__ import annotations

import math
import sys
import time

import numpy as np
import pytest
from scipy import stats

from dascusum.detectors import (
    DetectorConfig,
    GaussianParams,
    das_cusum_increment,
    glr_statistic,
    rolling_window_estimates,
    run_detector,
    symmetric_kl,
    vector_increments,
)
from dascusum.montecarlo import Scenario, calibrate_threshold, edd_vs_arl_curve, estimate_edd
from dascusum.synthetic import OccupancyScenario, occupancy_stream, score_transitions
from dascusum.tuning import delta0_star, edd_theoretical, optimal_window, threshold_for_arl, v_star

G = GaussianParams
T0, T1 = G(1, 1), G(2, 2)
WINDOWS = (10, 20, 30, 40, 50, 100, 150)
TABLE_THEORY = {
    5000: (3.68, 2.38, 1.86, 1.57, 1.37, 0.94, 0.75),
    10000: (3.98, 2.57, 2.02, 1.70, 1.50, 1.02, 0.82),
}
TABLE_SIM = {
    5000: (14.77, 6.10, 3.16, 2.13, 1.69, 1.01, 0.77),
    10000: (18.16, 7.91, 4.13, 2.70, 2.11, 1.26, 0.96),
}
TRIALS = 500

RESULTS: list[str] = []


def verdict(num: int, title: str, check) -> None:
    t0 = time.perf_counter()
    ok, detail = check()
    line = f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail} [{time.perf_counter() - t0:.1f}s]"
    RESULTS.append(line)
    assert ok, line


def das_cfg(w, b, s=1.0):
    return DetectorConfig(threshold=b, window=w, drift=v_star(delta0_star(s, w), w))


# -- checks ----------------------------------------------------------------


def check_theoretical_thresholds():
    misses = []
    for gamma, row in TABLE_THEORY.items():
        for w, stated in zip(WINDOWS, row):
            b = threshold_for_arl(gamma, delta0_star(1.0, w))
            if abs(b - stated) > 0.01:
                misses.append(f"gamma={gamma} w={w}: {b:.4f} vs {stated}")
    return not misses, f"{14 - len(misses)}/14 within 0.01" + (f"; off: {misses}" if misses else "")


def check_simulated_thresholds():
    rows, bad = [], []
    for gamma, row in TABLE_SIM.items():
        for w, stated in zip(WINDOWS, row):
            tol = 0.35 if w < 40 else 0.15
            b = calibrate_threshold(gamma, das_cfg(w, 1.0), T0, "das", TRIALS, seed=7)
            rel = b / stated - 1.0
            rows.append(f"{w}:{b:.3g}({rel:+.0%})")
            if abs(rel) > tol:
                bad.append(f"gamma={gamma} w={w}")
    return not bad, f"gamma 5000/10000 -> {' '.join(rows)}" + (f"; out of band: {bad}" if bad else "")


def check_small_change_window():
    w = optimal_window(5000, 0.5, 2)
    return 10 <= w <= 14, f"w*={w}"


def check_large_change_window():
    w_free = optimal_window(5000, 2.0, 2)
    w_floor = optimal_window(5000, 2.0, 20)
    return w_free == 4 and w_floor == 20, f"unconstrained w*={w_free} (stated 4), floored w*={w_floor}"


def check_theory_gap_w120():
    sc = Scenario(T0, T1, 120)
    grid = [round(0.5 + 0.05 * k, 2) for k in range(13)]
    pts = [p for p in edd_vs_arl_curve(grid, sc, TRIALS, seed=5) if p.source == "simulated"]
    used = [p for p in pts if 1e3 <= p.arl <= 1e4]
    gaps = [abs(p.edd - edd_theoretical(p.arl, sc.s, 120)) for p in used]
    ok = len(used) >= 3 and max(gaps) <= 2.0
    return ok, f"{len(used)} points with ARL in [1e3,1e4], max |gap|={max(gaps):.2f} samples"


def check_symmetry():
    w = 40
    b = threshold_for_arl(5000, delta0_star(1.0, w))
    fwd = estimate_edd(das_cfg(w, b), T0, T1, "das", TRIALS, seed=3).value
    back = estimate_edd(das_cfg(w, b), T1, T0, "das", TRIALS, seed=3).value
    das_rel = abs(fwd - back) / max(fwd, back)
    b_cu = math.log(5000)
    cu_f = estimate_edd(DetectorConfig(threshold=b_cu, post_change=T1), T0, T1, "cusum", TRIALS, seed=3).value
    cu_b = estimate_edd(DetectorConfig(threshold=b_cu, post_change=T0), T1, T0, "cusum", TRIALS, seed=3).value
    cu_rel = abs(cu_f - cu_b) / max(cu_f, cu_b)
    ok = das_rel <= 0.15 and cu_rel > 0.25
    return ok, (
        f"DAS {fwd:.1f} vs {back:.1f} ({das_rel:.1%}); "
        f"CUSUM b={b_cu:.2f}: {cu_f:.1f} vs {cu_b:.1f} ({cu_rel:.1%})"
    )


def _windowed_das_increments(x, w, theta0, v):
    means, variances = rolling_window_estimates(x, w)
    cfg = DetectorConfig(threshold=1.0, window=w, drift=v)
    return vector_increments("das", x[: means.size], means, variances, theta0, cfg)


def check_martingale():
    w = 150
    out = []
    ok = True
    for d0 in (0.5, 1.0):
        x = np.random.default_rng(77).normal(T0.mean, T0.std, size=1_000_000 + w)
        inc = _windowed_das_increments(x, w, T0, v_star(d0, w))
        m = float(np.exp(d0 * inc).mean())
        ok &= 0.95 <= m <= 1.05
        out.append(f"delta0={d0}: {m:.4f}")
    return ok, ", ".join(out)


def check_increment_identities():
    grid_ok = True
    for x in np.linspace(-30, 30, 61):
        for mu in (-3.0, 0.0, 1.0, 10.0):
            for var in (0.01, 1.0, 9.0):
                for v in (0.01, 0.2422, 1.0):
                    grid_ok &= das_cusum_increment(float(x), G(mu, var), G(mu, var), v) == -v
    w = 150
    v = v_star(delta0_star(1.0, w), w)
    x = np.random.default_rng(31).normal(T1.mean, T1.std, size=100_000 + w)
    mean = float(_windowed_das_increments(x, w, T0, v).mean())
    target = symmetric_kl(T0, T1) - v
    ok = grid_ok and abs(mean - target) <= 0.05
    return ok, f"identity grid {'exact' if grid_ok else 'broken'}; post-change mean {mean:.4f} vs {target:.4f}"


def _brute_force_glr(x, theta0):
    best, arg = -math.inf, None
    for start in range(0, x.size - 1):
        seg = x[start:]
        mu = seg.mean()
        var = ((seg - mu) ** 2).mean()
        val = stats.norm.logpdf(seg, mu, math.sqrt(var)).sum() - stats.norm.logpdf(seg, theta0.mean, theta0.std).sum()
        if val > best:
            best, arg = val, start
    return best, arg


def check_glr_oracle():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(100):
        theta0 = G(float(rng.normal()), float(rng.uniform(0.3, 3.0)))
        x = rng.normal(rng.normal(), rng.uniform(0.3, 3.0), size=50)
        stat, _ = glr_statistic(x, theta0, max_lookback=500, min_segment=2)
        ref, _ = _brute_force_glr(x, theta0)
        worst = max(worst, abs(stat - ref))
    return worst <= 1e-9, f"max |closed form - brute force| = {worst:.2e} over 100 histories"


OCC_WINDOW = 300
OCC_DAS_THRESHOLD = 3000.0
OCC_ADAPTIVE_GRID = (10, 20, 50, 100, 200, 300, 500, 700, 1000, 1500, 2000, 3000, 5000)


def check_occupancy():
    sc = OccupancyScenario()
    w = OCC_WINDOW
    v = v_star(delta0_star(symmetric_kl(sc.empty, sc.occupied), w), w)
    streams = [occupancy_stream(np.random.default_rng(seed), sc) for seed in range(TRIALS)]

    def success_rate(kind, cfg):
        ok = 0
        for x in streams:
            ev = run_detector(x, cfg, kind, sc.empty)
            detected, false_alarms = score_transitions(ev, sc.transitions, before=w, after=sc.ramp + 100)
            ok += detected == 2 and false_alarms == 0
        return ok / len(streams)

    das = success_rate("das", DetectorConfig(threshold=OCC_DAS_THRESHOLD, window=w, drift=v))
    adaptive = {b: success_rate("adaptive", DetectorConfig(threshold=b, window=w)) for b in OCC_ADAPTIVE_GRID}
    best_b = max(adaptive, key=adaptive.get)
    ok = das >= 0.95 and all(r < 0.5 for r in adaptive.values())
    return ok, (
        f"DAS b={OCC_DAS_THRESHOLD:g} success {das:.1%}; adaptive best b={best_b} success {adaptive[best_b]:.1%}"
    )


CRITERIA = [
    (1, "theoretical thresholds", check_theoretical_thresholds),
    (2, "simulated thresholds", check_simulated_thresholds),
    (3, "optimal window, small change", check_small_change_window),
    (4, "optimal window, large change", check_large_change_window),
    (5, "theory vs simulation at w=120", check_theory_gap_w120),
    (6, "symmetry under swap", check_symmetry),
    (7, "martingale condition", check_martingale),
    (8, "increment identities", check_increment_identities),
    (9, "GLR closed form vs brute force", check_glr_oracle),
    (10, "occupancy stream, one threshold", check_occupancy),
]


@pytest.mark.parametrize("num,title,check", CRITERIA, ids=[f"c{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(num, title, check):
    verdict(num, title, check)


if __name__ == "__main__":
    failed = 0
    for num, title, check in CRITERIA:
        try:
            verdict(num, title, check)
        except AssertionError:
            failed += 1
        print(RESULTS[-1], flush=True)
    sys.exit(1 if failed else 0)
