"""Monte Carlo estimation of average run length and detection delay.

Reproducibility contract
------------------------
Trial ``i`` of a run with master seed ``seed`` draws its samples from
``numpy.random.Generator(Philox(SeedSequence(seed, spawn_key=(i,))))``.
Philox is counter-based, so every trial owns an independent substream that
depends only on ``(seed, i)``.  Trials are simulated as a batch but reduced in
trial-index order, so results never depend on how the work is scheduled.

Run lengths are counted in statistic steps: a first alarm at the first
scored sample is a run length of 1.  Detection delays add the window latency
``w`` (samples consumed after the alarm sample) to the run length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence

import numpy as np

from .detectors import (
    VARIANCE_FLOOR,
    DetectorConfig,
    GaussianParams,
    SequentialDetector,
    clamped_paths,
    symmetric_kl,
    vector_increments,
)
from .tuning import delta0_star, edd_at_delta0, threshold_for_arl, v_star

DEFAULT_CHUNK = 1024
CALIBRATION_BRACKET = (1e-3, 1e2)


class ConfigurationError(ValueError):
    pass


class CalibrationError(RuntimeError):
    def __init__(self, message: str, history: Sequence[tuple[float, float]]):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    std_error: float
    trials: int
    master_seed: int
    censored: int = 0
    samples: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.trials


@dataclass(frozen=True)
class CurvePoint:
    arl: float
    edd: float
    threshold: float
    window: int
    source: Literal["theoretical", "simulated"]


@dataclass(frozen=True)
class Scenario:
    """A pre/post-change pair plus the detector settings used to study it.

    ``drift`` and ``sym_div`` default to the tuned values: ``sym_div`` is the
    symmetric KL divergence of the pair and ``drift`` is ``v*`` for
    ``delta0*(sym_div, window)``.
    """

    theta0: GaussianParams
    theta1: GaussianParams
    window: int
    kind: str = "das"
    sym_div: Optional[float] = None
    drift: Optional[float] = None

    @property
    def s(self) -> float:
        return self.sym_div if self.sym_div is not None else symmetric_kl(self.theta0, self.theta1)

    @property
    def delta0(self) -> float:
        return delta0_star(self.s, self.window)

    @property
    def v(self) -> float:
        return self.drift if self.drift is not None else v_star(self.delta0, self.window)

    def config(self, threshold: float) -> DetectorConfig:
        return DetectorConfig(
            threshold=threshold,
            window=self.window,
            drift=self.v,
            min_sym_div=self.s,
            post_change=self.theta1,
        )

    def swapped(self) -> "Scenario":
        return replace(self, theta0=self.theta1, theta1=self.theta0)


def trial_generator(master_seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial, derived from ``(master_seed, trial)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial),))
    return np.random.Generator(np.random.Philox(ss))


# -- vectorized first-alarm kernel ------------------------------------------


def _increments(
    kind: str,
    x: np.ndarray,
    steps: int,
    w: int,
    theta0: GaussianParams,
    config: DetectorConfig,
) -> np.ndarray:
    """Per-step increments for a batch of trials.

    ``x`` has shape ``(trials, steps + w)``; step ``j`` scores ``x[:, j]``
    against the window ``x[:, j+1 : j+1+w]``.
    """
    xt = x[:, :steps]
    if kind == "cusum":
        return vector_increments(kind, xt, None, None, theta0, config)
    # centre on the pre-change mean before summing to limit cancellation
    y = x - theta0.mean
    zeros = np.zeros((x.shape[0], 1))
    c1 = np.concatenate([zeros, np.cumsum(y, axis=1)], axis=1)
    c2 = np.concatenate([zeros, np.cumsum(y * y, axis=1)], axis=1)
    s1 = (c1[:, w + 1: w + 1 + steps] - c1[:, 1: 1 + steps]) / w
    s2 = (c2[:, w + 1: w + 1 + steps] - c2[:, 1: 1 + steps]) / w
    var_hat = np.maximum(s2 - s1 * s1, VARIANCE_FLOOR)
    return vector_increments(kind, xt, s1 + theta0.mean, var_hat, theta0, config)


def first_alarm_times(
    kind: str,
    config: DetectorConfig,
    theta0: GaussianParams,
    data: GaussianParams,
    trials: int,
    horizon: int,
    seed: int,
    chunk: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """Run length to the first alarm for each trial, or ``horizon + 1`` if none.

    Every trial's stream is i.i.d. ``data`` from its own substream.  The
    detector knows ``theta0`` as its pre-change distribution.
    """
    config.validate(kind)
    w = config.latency(kind)
    gens = [trial_generator(seed, i) for i in range(trials)]
    if kind == "glr":
        return _first_alarm_times_scalar(kind, config, theta0, data, gens, horizon)

    result = np.full(trials, horizon + 1, dtype=np.int64)
    active = np.arange(trials)
    u = np.zeros(trials)  # max(S, 0) carried between chunks
    tail = np.stack([gens[i].standard_normal(w) for i in range(trials)]) if w else np.empty((trials, 0))
    done_steps = 0
    b = config.threshold
    while active.size and done_steps < horizon:
        steps = min(chunk, horizon - done_steps)
        fresh = np.stack([gens[i].standard_normal(steps) for i in active])
        z = np.concatenate([tail, fresh], axis=1) if w else fresh
        x = data.mean + data.std * z
        inc = _increments(kind, x, steps, w, theta0, config)
        path = clamped_paths(inc, u[active])
        crossed = path > b
        hit = crossed.any(axis=1)
        first = np.argmax(crossed, axis=1)
        result[active[hit]] = done_steps + first[hit] + 1
        u[active] = path[:, -1]
        keep = ~hit
        active = active[keep]
        tail = z[keep, steps:]
        done_steps += steps
    return result


def _first_alarm_times_scalar(
    kind: str,
    config: DetectorConfig,
    theta0: GaussianParams,
    data: GaussianParams,
    gens: list[np.random.Generator],
    horizon: int,
) -> np.ndarray:
    w = config.latency(kind)
    out = np.full(len(gens), horizon + 1, dtype=np.int64)
    block = 256
    for i, g in enumerate(gens):
        det = SequentialDetector(config, kind, theta0)
        consumed = 0
        while consumed < horizon + w and not det.events:
            xs = data.mean + data.std * g.standard_normal(block)
            for xv in xs.tolist():
                det.update(xv)
                consumed += 1
                if det.events or consumed >= horizon + w:
                    break
        if det.events:
            out[i] = det.events[0].alarm_index + 1
    return out


def _summarize(times: np.ndarray, horizon: int, seed: int, extra: int = 0) -> MonteCarloEstimate:
    censored = int(np.count_nonzero(times > horizon))
    vals = np.minimum(times, horizon).astype(float) + extra
    n = vals.size
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MonteCarloEstimate(float(vals.mean()), se, n, int(seed), censored, vals)


def estimate_arl(
    config: DetectorConfig,
    theta0: GaussianParams,
    kind: str,
    trials: int,
    horizon: int,
    seed: int,
    chunk: int = DEFAULT_CHUNK,
) -> MonteCarloEstimate:
    """Mean time to the first false alarm on pre-change data.

    Trials without an alarm by ``horizon`` contribute ``horizon`` and are
    counted in ``censored``.
    """
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    if horizon < config.latency(kind) + 1:
        raise ConfigurationError(f"horizon {horizon} too small for window {config.window}")
    times = first_alarm_times(kind, config, theta0, theta0, trials, horizon, seed, chunk)
    return _summarize(times, horizon, seed)


def estimate_edd(
    config: DetectorConfig,
    theta0: GaussianParams,
    theta1: GaussianParams,
    kind: str,
    trials: int,
    seed: int,
    horizon: int = 1_000_000,
    chunk: int = 256,
) -> MonteCarloEstimate:
    """Mean detection delay with the change at the first sample.

    The delay counts the alarm sample plus the ``w`` window samples that had
    to arrive before the decision.
    """
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    times = first_alarm_times(kind, config, theta0, theta1, trials, horizon, seed, chunk)
    return _summarize(times, horizon, seed, extra=config.latency(kind))


def calibrate_threshold(
    target_arl: float,
    config: DetectorConfig,
    theta0: GaussianParams,
    kind: str,
    trials: int,
    seed: int,
    rel_tol: float = 0.10,
    max_iter: int = 20,
    bracket: tuple[float, float] = CALIBRATION_BRACKET,
    horizon: Optional[int] = None,
) -> float:
    """Find ``b`` whose simulated ARL is within ``rel_tol`` of ``target_arl``.

    Bisects on ``b`` with geometric midpoints.  All evaluations reuse the same
    seed, so the simulated ARL is monotone in ``b`` along the search.
    ``config.threshold`` is ignored.
    """
    if target_arl <= config.latency(kind):
        raise ConfigurationError("target_arl must exceed the window length")
    horizon = int(horizon or 50 * target_arl)
    lo, hi = bracket
    history: list[tuple[float, float]] = []
    below = above = False
    best_b, best_err = None, math.inf
    for _ in range(max_iter):
        b = math.sqrt(lo * hi)
        est = estimate_arl(replace(config, threshold=b), theta0, kind, trials, horizon, seed)
        history.append((b, est.value))
        err = abs(est.value / target_arl - 1.0)
        if err < best_err:
            best_b, best_err = b, err
        if err <= rel_tol:
            return b
        if est.value < target_arl:
            lo, below = b, True
        else:
            hi, above = b, True
    if not (below and above):
        raise CalibrationError(
            f"target ARL {target_arl} not bracketed by b in {bracket}; evaluations: {history}",
            history,
        )
    return best_b


def theoretical_point(threshold: float, scenario: Scenario) -> CurvePoint:
    """Point on the theoretical EDD-ARL curve for a threshold, ``gamma = exp(delta0 * b)``."""
    d0 = scenario.delta0
    gamma = math.exp(d0 * threshold)
    edd = edd_at_delta0(gamma, scenario.s, scenario.window, d0)
    return CurvePoint(gamma, edd, threshold, scenario.window, "theoretical")


def edd_vs_arl_curve(
    thresholds: Sequence[float],
    scenario: Scenario,
    trials: int,
    seed: int,
    arl_horizon: Optional[int] = None,
) -> list[CurvePoint]:
    """Simulated and theoretical EDD-versus-ARL points, sorted by ARL."""
    thresholds = list(thresholds)
    if not thresholds:
        raise ConfigurationError("threshold grid is empty")
    points = []
    for b in thresholds:
        cfg = scenario.config(b)
        if arl_horizon is None:
            horizon = int(50 * math.exp(min(scenario.delta0 * b, 30.0))) + scenario.window + 1
            horizon = min(max(horizon, 10_000), 5_000_000)
        else:
            horizon = arl_horizon
        arl = estimate_arl(cfg, scenario.theta0, scenario.kind, trials, horizon, seed)
        edd = estimate_edd(cfg, scenario.theta0, scenario.theta1, scenario.kind, trials, seed + 1)
        points.append(CurvePoint(arl.value, edd.value, b, scenario.window, "simulated"))
        if scenario.kind == "das":
            points.append(theoretical_point(b, scenario))
    points.sort(key=lambda p: (p.arl, p.source))
    return points


def theoretical_threshold(target_arl: float, scenario: Scenario) -> float:
    return threshold_for_arl(target_arl, scenario.delta0)
