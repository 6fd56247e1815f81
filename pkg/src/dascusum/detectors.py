"""Sequential change detectors for univariate Gaussian streams.

Four detector kinds share one per-sample state machine:

``cusum``
    Page's recursion with both distributions known,
    ``S_t = (S_{t-1} + llr(x_t))^+``.
``adaptive``
    Same recursion, with the post-change parameters replaced by an
    estimate from the ``w`` samples that follow ``x_t``.
``das``
    Data-adaptive symmetric CUSUM.  The increment adds ``KL(theta0 || theta_hat)``
    to the log-likelihood ratio and subtracts a drift ``v``; the clamp acts on
    the previous value only, ``S_t = (S_{t-1})^+ + s_t``.
``glr``
    Window-limited generalized likelihood ratio over segment start points,
    using the closed form ``k * KL(mle(segment) || theta0)``.

After an alarm the estimate that triggered it becomes the new pre-change
distribution and the statistic restarts from zero, so a single pass finds
multiple change points.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Sequence

import numpy as np

VARIANCE_FLOOR = 1e-8
LOG_2PI = math.log(2.0 * math.pi)

DetectorKind = Literal["cusum", "adaptive", "glr", "das"]
DETECTOR_KINDS: tuple[str, ...] = ("cusum", "adaptive", "glr", "das")


class InsufficientDataError(ValueError):
    """Raised when a window or history is too short for the requested estimate."""


@dataclass(frozen=True)
class GaussianParams:
    """Mean and variance of a univariate normal distribution."""

    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mean):
            raise ValueError(f"mean must be finite, got {self.mean!r}")
        if not (math.isfinite(self.variance) and self.variance > 0.0):
            raise ValueError(f"variance must be finite and > 0, got {self.variance!r}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class DetectorConfig:
    """Tuning knobs shared by all detector kinds.

    ``post_change`` is only read by the classical ``cusum`` kind.  ``window``
    is the future-window length for ``adaptive``/``das``; ``drift`` is the
    DAS-CUSUM drift ``v``.  ``min_sym_div`` and ``target_arl`` are carried for
    reporting; they do not enter the recursion directly.
    """

    threshold: float
    window: int = 40
    drift: float = 0.0
    min_sym_div: Optional[float] = None
    target_arl: Optional[float] = None
    post_change: Optional[GaussianParams] = None
    max_lookback: int = 500
    min_segment: int = 2

    def validate(self, kind: str) -> None:
        if kind not in DETECTOR_KINDS:
            raise ValueError(f"unknown detector kind {kind!r}; expected one of {DETECTOR_KINDS}")
        if not self.threshold > 0.0:
            raise ValueError("threshold must be > 0")
        if kind in ("adaptive", "das") and self.window < 2:
            raise ValueError("window must be >= 2")
        if kind == "das" and not self.drift > 0.0:
            raise ValueError("drift must be > 0 for the das detector")
        if kind == "cusum" and self.post_change is None:
            raise ValueError("the cusum detector needs known post_change parameters")
        if kind == "glr":
            if self.min_segment < 2:
                raise ValueError("min_segment must be >= 2")
            if self.max_lookback < self.min_segment:
                raise ValueError("max_lookback must be >= min_segment")

    def latency(self, kind: str) -> int:
        """Samples consumed after ``x_t`` before the decision at ``t`` is made."""
        return self.window if kind in ("adaptive", "das") else 0


@dataclass(frozen=True)
class ChangeEvent:
    """One alarm.

    ``decision_index`` is the last sample consumed before the alarm could be
    raised; for windowed detectors it is ``alarm_index + window``.
    """

    alarm_index: int
    decision_index: int
    adopted_params: GaussianParams
    statistic: float = float("nan")


# -- Gaussian primitives ---------------------------------------------------


def gaussian_loglik(x: float, p: GaussianParams) -> float:
    """Natural-log density of ``x`` under ``N(p.mean, p.variance)``."""
    if not math.isfinite(x):
        raise ValueError(f"sample must be finite, got {x!r}")
    d = x - p.mean
    return -0.5 * (LOG_2PI + math.log(p.variance)) - d * d / (2.0 * p.variance)


def kl_gaussian(p: GaussianParams, q: GaussianParams) -> float:
    """``KL(p || q)`` for two univariate normals, in nats."""
    d = p.mean - q.mean
    return 0.5 * math.log(q.variance / p.variance) + (p.variance + d * d) / (2.0 * q.variance) - 0.5


def symmetric_kl(p: GaussianParams, q: GaussianParams) -> float:
    """``KL(p || q) + KL(q || p)``.

    Uses the closed form of the sum, where the log terms cancel, so the result
    is exactly symmetric in its arguments.
    """
    d2 = (p.mean - q.mean) ** 2
    a, b = p.variance, q.variance
    # addition is commutative in IEEE arithmetic, so swapping p and q is bit-exact
    return ((a + d2) / b + (b + d2) / a) * 0.5 - 1.0


def window_estimate(samples: Sequence[float]) -> GaussianParams:
    """Sample mean and population variance (divisor ``w``) of a window.

    The variance is floored at ``VARIANCE_FLOOR`` so that flat windows still
    yield a usable density.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise InsufficientDataError(f"window needs at least 2 samples, got {arr.size}")
    mean = float(arr.mean())
    var = float(np.mean((arr - mean) ** 2))
    return GaussianParams(mean, max(var, VARIANCE_FLOOR))


# -- recursions ------------------------------------------------------------


def llr(x: float, theta0: GaussianParams, theta1: GaussianParams) -> float:
    """``log f_theta1(x) - log f_theta0(x)``."""
    d0 = x - theta0.mean
    d1 = x - theta1.mean
    return (
        0.5 * math.log(theta0.variance / theta1.variance)
        + d0 * d0 / (2.0 * theta0.variance)
        - d1 * d1 / (2.0 * theta1.variance)
    )


def cusum_step(S_prev: float, x: float, theta0: GaussianParams, theta1: GaussianParams) -> float:
    """Page's recursion: clamp applied after adding the log-likelihood ratio."""
    return max(S_prev + llr(x, theta0, theta1), 0.0)


def das_cusum_increment(
    x: float, theta0: GaussianParams, theta_hat: GaussianParams, v: float
) -> float:
    """DAS-CUSUM increment ``llr(x) + KL(theta0 || theta_hat) - v``.

    Expanded for Gaussians the log-variance terms cancel:

        -(x - mu_hat)^2 / (2 var_hat) + (x - mu0)^2 / (2 var0)
        + (var0 + (mu0 - mu_hat)^2) / (2 var_hat) - 1/2 - v
    """
    dh = x - theta_hat.mean
    d0 = x - theta0.mean
    dm = theta0.mean - theta_hat.mean
    return (
        -dh * dh / (2.0 * theta_hat.variance)
        + d0 * d0 / (2.0 * theta0.variance)
        + (theta0.variance + dm * dm) / (2.0 * theta_hat.variance)
        - 0.5
        - v
    )


def das_cusum_step(S_prev: float, increment: float) -> float:
    """``max(S_prev, 0) + increment``; the result may be negative."""
    return max(S_prev, 0.0) + increment


def glr_statistic(
    history: Sequence[float],
    theta0: GaussianParams,
    max_lookback: int = 500,
    min_segment: int = 2,
) -> tuple[float, int]:
    """Window-limited GLR statistic and the start index of the best segment.

    Candidate segments end at the last sample and start within the last
    ``max_lookback`` samples, with length at least ``min_segment``.  For each,
    the maximized log-likelihood ratio is ``k * KL(mle || theta0)`` where
    ``mle`` is the segment's sample mean and population variance.
    Returns ``(statistic, start_index)`` with the index into ``history``.
    """
    x = np.asarray(history, dtype=float)
    n = x.size
    if min_segment < 2:
        raise ValueError("min_segment must be >= 2")
    if n < min_segment:
        raise InsufficientDataError(f"history has {n} samples, need at least {min_segment}")
    stats, starts, _, _ = _glr_candidates(x, theta0, max_lookback, min_segment)
    best = int(np.argmax(stats))
    return float(stats[best]), int(starts[best])


def _glr_candidates(
    x: np.ndarray, theta0: GaussianParams, max_lookback: int, min_segment: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n = x.size
    tail = x[max(0, n - max_lookback):]
    # reversed cumulative sums give every segment ending at the last sample
    centred = tail[::-1] - theta0.mean
    k = np.arange(1, tail.size + 1, dtype=float)
    s1 = np.cumsum(centred)
    s2 = np.cumsum(centred * centred)
    keep = slice(min_segment - 1, None)
    k, s1, s2 = k[keep], s1[keep], s2[keep]
    dmean = s1 / k
    var = np.maximum(s2 / k - dmean * dmean, VARIANCE_FLOOR)
    v0 = theta0.variance
    kl = 0.5 * np.log(v0 / var) + (var + dmean * dmean) / (2.0 * v0) - 0.5
    stats = k * kl
    starts = n - k.astype(int)
    return stats, starts, dmean + theta0.mean, var


# -- the multi-change state machine ----------------------------------------


class SequentialDetector:
    """Per-sample detector with post-alarm restart.

    Feed samples one at a time through :meth:`update`.  Windowed kinds keep a
    FIFO of the ``w`` samples after ``x_t`` and only advance the statistic once
    it is full, so the alarm for ``x_t`` is raised while consuming
    ``x_{t+w}``.
    """

    def __init__(self, config: DetectorConfig, kind: str, theta0: GaussianParams) -> None:
        config.validate(kind)
        self.config = config
        self.kind = kind
        self.theta0 = theta0
        self.statistic = 0.0
        self.sample_index = 0  # samples consumed so far
        self._latency = config.latency(kind)
        self._buffer: deque[float] = deque(maxlen=self._latency + 1)
        self._history: deque[float] = deque(maxlen=config.max_lookback)
        self.events: list[ChangeEvent] = []

    def reset(self, theta0: GaussianParams) -> None:
        self.theta0 = theta0
        self.statistic = 0.0
        self._history.clear()

    def update(self, x: float) -> Optional[ChangeEvent]:
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"sample {self.sample_index} is not finite: {x!r}")
        self.sample_index += 1
        self._buffer.append(x)
        if len(self._buffer) <= self._latency:
            return None
        t = self.sample_index - 1 - self._latency
        x_t = self._buffer[0]
        theta_hat = None
        if self._latency:
            theta_hat = window_estimate(list(self._buffer)[1:])
        return self.advance(t, x_t, theta_hat)

    def advance(self, t: int, x_t: float, theta_hat: Optional[GaussianParams]) -> Optional[ChangeEvent]:
        """Advance the statistic by sample ``t`` given its window estimate."""
        cfg = self.config
        kind = self.kind
        if kind == "das":
            self.statistic = das_cusum_step(
                self.statistic, das_cusum_increment(x_t, self.theta0, theta_hat, cfg.drift)
            )
            adopted = theta_hat
        elif kind == "adaptive":
            self.statistic = cusum_step(self.statistic, x_t, self.theta0, theta_hat)
            adopted = theta_hat
        elif kind == "cusum":
            self.statistic = cusum_step(self.statistic, x_t, self.theta0, cfg.post_change)
            adopted = cfg.post_change
        else:
            self._history.append(x_t)
            if len(self._history) < cfg.min_segment:
                return None
            hist = np.fromiter(self._history, dtype=float, count=len(self._history))
            stats, _, means, variances = _glr_candidates(hist, self.theta0, cfg.max_lookback, cfg.min_segment)
            best = int(np.argmax(stats))
            self.statistic = float(stats[best])
            adopted = GaussianParams(float(means[best]), float(variances[best]))

        if self.statistic > cfg.threshold:
            event = ChangeEvent(t, t + self._latency, adopted, self.statistic)
            self.events.append(event)
            # classical CUSUM keeps its known pair; the others adopt the estimate
            self.reset(self.theta0 if kind == "cusum" else adopted)
            return event
        return None

    def run(self, stream: Iterable[float]) -> list[ChangeEvent]:
        for x in stream:
            self.update(x)
        return self.events


def rolling_window_estimates(x: np.ndarray, w: int, chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """Mean and floored population variance of ``x[t+1 : t+1+w]`` for every valid ``t``.

    Returns arrays of length ``len(x) - w``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size - w
    if n <= 0:
        return np.empty(0), np.empty(0)
    views = np.lib.stride_tricks.sliding_window_view(x[1:], w)
    means = np.empty(n)
    variances = np.empty(n)
    for lo in range(0, n, chunk):
        block = views[lo:lo + chunk]
        m = block.mean(axis=1)
        means[lo:lo + chunk] = m
        variances[lo:lo + chunk] = np.mean((block - m[:, None]) ** 2, axis=1)
    np.maximum(variances, VARIANCE_FLOOR, out=variances)
    return means, variances


def vector_increments(
    kind: str,
    x_t: np.ndarray,
    mu_hat: Optional[np.ndarray],
    var_hat: Optional[np.ndarray],
    theta0: GaussianParams,
    config: DetectorConfig,
) -> np.ndarray:
    """Array version of the per-step increment for ``cusum``, ``adaptive`` and ``das``."""
    d0 = x_t - theta0.mean
    if kind == "cusum":
        th1 = config.post_change
        mu_hat = np.full_like(x_t, th1.mean)
        var_hat = np.full_like(x_t, th1.variance)
    dh = x_t - mu_hat
    if kind == "das":
        dm = theta0.mean - mu_hat
        return (
            -dh * dh / (2.0 * var_hat)
            + d0 * d0 / (2.0 * theta0.variance)
            + (theta0.variance + dm * dm) / (2.0 * var_hat)
            - 0.5
            - config.drift
        )
    if kind in ("adaptive", "cusum"):
        return 0.5 * np.log(theta0.variance / var_hat) + d0 * d0 / (2.0 * theta0.variance) - dh * dh / (2.0 * var_hat)
    raise ValueError(f"no vectorized increment for detector kind {kind!r}")


def clamped_paths(increments: np.ndarray, start: np.ndarray | float = 0.0) -> np.ndarray:
    """``U_t = max(U_{t-1} + s_t, 0)`` along the last axis, from ``U_0 = start``.

    Both recursions alarm exactly when this path exceeds a positive
    threshold: for Page's form it is the statistic itself, for the DAS form
    it is ``max(S_t, 0)``.
    """
    c = np.cumsum(increments, axis=-1)
    c += np.asarray(start)[..., None] if np.ndim(start) else start
    return c - np.minimum(np.minimum.accumulate(c, axis=-1), 0.0)


def run_detector(
    stream: Iterable[float],
    config: DetectorConfig,
    kind: str,
    theta0: GaussianParams,
    block: int = 2048,
) -> list[ChangeEvent]:
    """Run a detector over a whole stream and return every alarm.

    Samples whose future window runs past the end of the stream are never
    scored.  Array input takes a vectorized path: between alarms the
    pre-change distribution is fixed, so increments for a block of samples
    are computed at once.  Iterable input is fed through
    :class:`SequentialDetector` sample by sample; both give the same events.
    """
    config.validate(kind)
    if not isinstance(stream, np.ndarray):
        det = SequentialDetector(config, kind, theta0)
        return det.run(stream)

    x = np.asarray(stream, dtype=float)
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0])
        raise ValueError(f"sample {bad} is not finite: {x[bad]!r}")
    if kind == "glr":
        det = SequentialDetector(config, kind, theta0)
        for t, xt in enumerate(x.tolist()):
            det.advance(t, xt, None)
        return det.events

    w = config.latency(kind)
    if w:
        means, variances = rolling_window_estimates(x, w)
        n = means.size
    else:
        means = variances = None
        n = x.size
    events: list[ChangeEvent] = []
    b = config.threshold
    pos = 0
    u = 0.0
    while pos < n:
        hi = min(pos + block, n)
        mu = means[pos:hi] if w else None
        var = variances[pos:hi] if w else None
        inc = vector_increments(kind, x[pos:hi], mu, var, theta0, config)
        path = clamped_paths(inc, u)
        crossed = np.flatnonzero(path > b)
        if crossed.size == 0:
            u = float(path[-1])
            pos = hi
            continue
        k = int(crossed[0])
        t = pos + k
        if kind == "das":
            prev = u if k == 0 else float(path[k - 1])
            stat = prev + float(inc[k])
        else:
            stat = float(path[k])
        if w:
            adopted = GaussianParams(float(means[t]), float(variances[t]))
        else:
            adopted = config.post_change
        events.append(ChangeEvent(t, t + w, adopted, stat))
        if kind != "cusum":
            theta0 = adopted
        u = 0.0
        pos = t + 1
    return events
