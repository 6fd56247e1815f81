"""Synthetic streams for exercising the detectors.

``occupancy_stream`` mimics a seat pressure sensor: an empty seat reads low
with little spread, an occupied seat reads high with large spread, and a
seated person shifts around, which moves the occupied level by small amounts.
Getting in and out are short linear ramps rather than instantaneous jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .detectors import ChangeEvent, GaussianParams


def piecewise_stream(
    rng: np.random.Generator, segments: Sequence[tuple[int, GaussianParams]]
) -> np.ndarray:
    """Concatenated i.i.d. Gaussian segments."""
    return np.concatenate([rng.normal(p.mean, p.std, size=n) for n, p in segments])


def two_regime_stream(
    rng: np.random.Generator,
    n_pre: int = 500,
    n_post: int = 500,
    theta0: GaussianParams = GaussianParams(1.0, 1.0),
    theta1: GaussianParams = GaussianParams(2.0, 2.0),
) -> np.ndarray:
    return piecewise_stream(rng, [(n_pre, theta0), (n_post, theta1)])


@dataclass(frozen=True)
class OccupancyScenario:
    """Three-regime seat stream.

    The default in-seat movement is sized so that each shift has a symmetric
    divergence comparable to the DAS drift at moderate windows: large enough
    to matter to a detector without a drift term, small next to the
    empty/occupied divergence.
    """

    empty: GaussianParams = GaussianParams(1.0, 1.0)
    occupied: GaussianParams = GaussianParams(10.0, 9.0)
    lengths: tuple[int, int, int] = (2000, 6000, 2000)
    ramp: int = 30
    # in-seat movement: occupied level shifts every few hundred samples
    shift_every: tuple[int, int] = (300, 900)
    shift_mean: float = 2.0
    shift_var_ratio: float = 1.5
    # slow sensor drift of the occupied level, total change over the segment
    drift: float = 0.0
    transitions: tuple[int, int] = field(init=False)

    def __post_init__(self) -> None:
        a, b, _ = self.lengths
        object.__setattr__(self, "transitions", (a, a + b))

    @property
    def size(self) -> int:
        return sum(self.lengths)


def occupancy_stream(rng: np.random.Generator, scenario: OccupancyScenario = OccupancyScenario()) -> np.ndarray:
    """Empty, occupied, empty, with ramps at both transitions.

    Each ramp starts at the nominal transition index and lasts
    ``scenario.ramp`` samples; mean and variance are interpolated linearly.
    """
    n_empty1, n_occ, n_empty2 = scenario.lengths
    e, o = scenario.empty, scenario.occupied

    means = np.empty(scenario.size)
    variances = np.empty(scenario.size)
    means[:n_empty1] = e.mean
    variances[:n_empty1] = e.variance
    means[n_empty1 + n_occ:] = e.mean
    variances[n_empty1 + n_occ:] = e.variance

    lo, hi = scenario.shift_every
    pos = n_empty1
    end = n_empty1 + n_occ
    log_r = math.log(scenario.shift_var_ratio)
    while pos < end:
        n = int(rng.integers(lo, hi + 1))
        means[pos:pos + n] = o.mean + rng.uniform(-scenario.shift_mean, scenario.shift_mean)
        variances[pos:pos + n] = o.variance * math.exp(rng.uniform(-log_r, log_r))
        pos += n
    if scenario.drift:
        means[n_empty1:end] += np.linspace(0.0, scenario.drift, n_occ)
    means[end:] = e.mean
    variances[end:] = e.variance

    r = scenario.ramp
    if r > 0:
        frac = (np.arange(r) + 1) / (r + 1)
        for start, src, dst in ((n_empty1, e, None), (end, None, e)):
            m_from = src.mean if src else means[start - 1]
            v_from = src.variance if src else variances[start - 1]
            m_to = dst.mean if dst else means[start + r]
            v_to = dst.variance if dst else variances[start + r]
            means[start:start + r] = m_from + frac * (m_to - m_from)
            variances[start:start + r] = v_from + frac * (v_to - v_from)

    return means + np.sqrt(variances) * rng.standard_normal(scenario.size)


def score_transitions(
    events: Sequence[ChangeEvent],
    transitions: Sequence[int],
    before: int,
    after: int,
) -> tuple[int, int]:
    """Count detected transitions and false alarms.

    An alarm within ``[n_c - before, n_c + after]`` of a transition ``n_c``
    detects it; the first such alarm counts and any further alarm in that
    zone, or outside every zone, is a false alarm.
    """
    detected = 0
    false_alarms = 0
    claimed = set()
    for ev in events:
        t = ev.alarm_index
        zone = next((k for k, n_c in enumerate(transitions) if n_c - before <= t <= n_c + after), None)
        if zone is None or zone in claimed:
            false_alarms += 1
        else:
            claimed.add(zone)
            detected += 1
    return detected, false_alarms
