"""Closed-form tuning for DAS-CUSUM.

Given a target average run length ``gamma``, a (minimum) symmetric KL
divergence ``s`` to detect and a future-window length ``w``:

* ``delta0_star(s, w) = -1/s + sqrt(1/s**2 + w)`` is the equivalence factor
  that minimizes the asymptotic detection delay,
* ``v_star(delta0, w) = -log(1 - delta0**2 / w) / delta0`` is the drift that
  makes ``exp(delta0 * s_t)`` a martingale under the pre-change law,
* ``threshold_for_arl(gamma, delta0) = log(gamma) / delta0``,
* ``edd_theoretical`` is the delay ``log(gamma) / (delta0*s + log(1 - delta0**2/w)) + w``.

Asymptotic ``o(1)`` corrections are dropped everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

DEFAULT_W_FLOOR = 20
DEFAULT_W_MAX = 500


@dataclass(frozen=True)
class TuningInputs:
    target_arl: float
    sym_divergence: float
    window: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.target_arl > 1.0:
            raise ValueError("target_arl must be > 1")
        if not self.sym_divergence > 0.0:
            raise ValueError("sym_divergence must be > 0")
        if self.window is not None and self.window < 2:
            raise ValueError("window must be >= 2")


@dataclass(frozen=True)
class TuningOutputs:
    delta0: float
    drift: float
    threshold: float
    theoretical_edd: float
    window_star: int
    unconstrained_window: int


def delta0_star(s: float, w: float) -> float:
    """Equivalence factor minimizing the detection delay at fixed ARL."""
    if not s > 0.0:
        raise ValueError("s must be > 0")
    if not w >= 2:
        raise ValueError("w must be >= 2")
    return -1.0 / s + math.sqrt(1.0 / (s * s) + w)


def v_star(delta0: float, w: float) -> float:
    """Drift satisfying the martingale condition for ``delta0`` and window ``w``."""
    if not delta0 > 0.0:
        raise ValueError("delta0 must be > 0")
    ratio = delta0 * delta0 / w
    if ratio >= 1.0:
        raise ValueError(f"delta0**2 must be < w (got delta0={delta0}, w={w})")
    return -math.log1p(-ratio) / delta0


def threshold_for_arl(gamma: float, delta0: float) -> float:
    if not gamma > 1.0:
        raise ValueError("gamma must be > 1")
    if not delta0 > 0.0:
        raise ValueError("delta0 must be > 0")
    return math.log(gamma) / delta0


def edd_at_delta0(gamma: float, s: float, w: float, delta0: float) -> float:
    """Theoretical delay for an arbitrary admissible ``delta0``.

    Returns ``inf`` where the denominator is not positive.
    """
    ratio = delta0 * delta0 / w
    if ratio >= 1.0:
        return math.inf
    denom = delta0 * s + math.log1p(-ratio)
    if denom <= 0.0:
        return math.inf
    return math.log(gamma) / denom + w


def edd_theoretical(gamma: float, s: float, w: float) -> float:
    """Expected detection delay at ARL ``gamma`` using the optimal ``delta0``."""
    if not gamma >= 1.0:
        raise ValueError("gamma must be >= 1")
    return edd_at_delta0(gamma, s, w, delta0_star(s, w))


def optimal_window(
    gamma: float,
    s_prime: float,
    w_floor: int = DEFAULT_W_FLOOR,
    w_max: int = DEFAULT_W_MAX,
) -> int:
    """Integer window in ``[w_floor, w_max]`` with the smallest theoretical delay.

    Ties go to the smaller window.
    """
    if w_floor < 2:
        raise ValueError("w_floor must be >= 2")
    if w_max <= w_floor:
        raise ValueError("w_max must be > w_floor")
    best_w, best = w_floor, math.inf
    for w in range(w_floor, w_max + 1):
        edd = edd_theoretical(gamma, s_prime, w)
        if edd < best:
            best_w, best = w, edd
    return best_w


def tune(
    gamma: float,
    s_prime: float,
    window: Optional[int] = None,
    w_floor: int = DEFAULT_W_FLOOR,
    w_max: int = DEFAULT_W_MAX,
    delta0: Optional[float] = None,
) -> TuningOutputs:
    """Full tuning pass: window, ``delta0``, drift, threshold and predicted delay.

    ``window`` forces the window instead of searching; ``delta0`` overrides
    the optimal equivalence factor.
    """
    TuningInputs(gamma, s_prime, window)
    unconstrained = optimal_window(gamma, s_prime, 2, max(w_max, 3))
    if window is None:
        w = optimal_window(gamma, s_prime, w_floor, w_max)
    else:
        w = int(window)
    d0 = delta0_star(s_prime, w) if delta0 is None else float(delta0)
    return TuningOutputs(
        delta0=d0,
        drift=v_star(d0, w),
        threshold=threshold_for_arl(gamma, d0),
        theoretical_edd=edd_at_delta0(gamma, s_prime, w, d0),
        window_star=w,
        unconstrained_window=unconstrained,
    )
