"""Command-line front end: ``detect``, ``tune``, ``simulate`` and ``curve``.

Every option can also come from a plain ``key=value`` file passed with
``--config``; keys are the long flag names (``sym-div`` or ``sym_div``) and
flags given on the command line win over the file.  Numbers are printed with
six significant digits and TSV output uses tabs with a fixed column order, so
runs can be compared with ``diff``.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .detectors import (
    DETECTOR_KINDS,
    ChangeEvent,
    DetectorConfig,
    GaussianParams,
    run_detector,
    symmetric_kl,
    window_estimate,
)
from .montecarlo import (
    CalibrationError,
    ConfigurationError,
    CurvePoint,
    Scenario,
    calibrate_threshold,
    edd_vs_arl_curve,
    estimate_arl,
    estimate_edd,
)
from .tuning import (
    DEFAULT_W_FLOOR,
    DEFAULT_W_MAX,
    delta0_star,
    edd_theoretical,
    threshold_for_arl,
    tune,
    v_star,
)

EVENT_COLUMNS = ("alarm_index", "decision_index", "adopted_mean", "adopted_variance")
CURVE_COLUMNS = ("source", "arl", "edd", "threshold", "window")
TABLE_WINDOWS = (10, 20, 30, 40, 50, 100, 150)
TABLE_ARLS = (5000.0, 10000.0)


class UsageError(ValueError):
    """Bad flags or an incomplete scenario; exit status 2."""


class IngestError(ValueError):
    """Malformed input data; exit status 1."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def fmt(x: float) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".6g")


# -- input -----------------------------------------------------------------


def _open_text(source: str | Path | TextIO) -> tuple[TextIO, bool]:
    if hasattr(source, "read"):
        return source, False
    if str(source) == "-":
        return sys.stdin, False
    return open(source, newline="", encoding="utf-8"), True


def ingest_csv(source: str | Path | TextIO) -> list[tuple[int, float]]:
    """Read ``index,value`` rows from a path, ``-`` (stdin) or an open file.

    A first row whose index field is not an integer is treated as a header.
    Blank lines are skipped.  Index gaps are allowed; rows keep file order.
    """
    fh, close = _open_text(source)
    rows: list[tuple[int, float]] = []
    try:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != 2:
                raise IngestError(f"expected 2 fields 'index,value', got {len(rec)}", lineno)
            idx_s, val_s = rec[0].strip(), rec[1].strip()
            try:
                idx = int(idx_s)
            except ValueError:
                if not rows and lineno == 1:
                    continue  # header
                raise IngestError(f"index {idx_s!r} is not an integer", lineno) from None
            try:
                val = float(val_s)
            except ValueError:
                raise IngestError(f"value {val_s!r} is not a number", lineno) from None
            if not math.isfinite(val):
                raise IngestError(f"value {val_s!r} is not finite", lineno)
            rows.append((idx, val))
    finally:
        if close:
            fh.close()
    return rows


def read_events_csv(source: str | Path | TextIO) -> list[tuple[int, int, float, float]]:
    """Parse the CSV written by ``detect`` back into tuples."""
    fh, close = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != EVENT_COLUMNS:
            raise IngestError(f"expected header {','.join(EVENT_COLUMNS)}", 1)
        return [(int(a), int(d), float(m), float(v)) for a, d, m, v in reader]
    finally:
        if close:
            fh.close()


def read_config(path: str | Path) -> dict[str, str]:
    """``key=value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}, line {lineno}: expected key=value")
            key, value = (p.strip() for p in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


# -- option parsing --------------------------------------------------------


def _params(text: str) -> GaussianParams:
    try:
        mean, var = (float(p) for p in text.split(","))
        return GaussianParams(mean, var)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'mean,variance', got {text!r} ({exc})") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    """Comma-separated integers; ``a:b`` expands to the inclusive range."""
    out: list[int] = []
    try:
        for part in (p.strip() for p in text.split(",")):
            if not part:
                continue
            if ":" in part:
                lo, hi = (int(p) for p in part.split(":"))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers or a:b ranges, got {text!r}") from None
    return out


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--detector", choices=DETECTOR_KINDS, default="das")
    p.add_argument("--theta0", type=_params, help="pre-change 'mean,variance'")
    p.add_argument("--theta1", type=_params, help="post-change 'mean,variance'")
    p.add_argument("--arl", type=float, help="target average run length")
    p.add_argument("--sym-div", type=float, help="minimum symmetric KL divergence to detect")
    p.add_argument("--window", type=int, help="future-window length w")
    p.add_argument("--threshold", type=float, help="detection threshold b")
    p.add_argument("--drift", type=float, help="DAS drift v")
    p.add_argument("--delta0", type=float, help="force the equivalence factor")
    p.add_argument("--w-floor", type=int, default=DEFAULT_W_FLOOR)
    p.add_argument("--w-max", type=int, default=DEFAULT_W_MAX)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--horizon", type=int, help="Monte Carlo horizon for ARL runs")
    p.add_argument("--tsv", action="store_true", help="machine-readable output")
    p.add_argument("-o", "--output", help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dascusum", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="find change points in an index,value CSV")
    p.add_argument("input", nargs="?", default="-", help="CSV path or '-' for stdin")
    _common(p)

    p = sub.add_parser("tune", help="window, drift and threshold for a target ARL")
    _common(p)

    p = sub.add_parser("simulate", help="Monte Carlo ARL/EDD for one scenario")
    _common(p)

    p = sub.add_parser("curve", help="EDD-versus-ARL points, a threshold table or EDD versus window")
    _common(p)
    p.add_argument("--mode", choices=("thresholds", "threshold-table", "window"), default="thresholds")
    p.add_argument("--thresholds", type=_floats, help="threshold grid, e.g. 1,1.5,2")
    p.add_argument("--windows", type=_ints, help="window grid, e.g. 10,20 or 5:60")
    p.add_argument("--arl-grid", type=_floats, help="target ARLs for threshold-table mode")
    p.add_argument("--theory-only", type=_bool, nargs="?", const=True, default=False)
    return parser


def _apply_config(sub: argparse.ArgumentParser, values: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None:
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = _bool(raw)
            continue
        conv = action.type or str
        try:
            val = conv(raw)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"config key {key!r}: {exc}") from None
        except ValueError:
            raise UsageError(f"config key {key!r}: cannot parse {raw!r}") from None
        if action.choices is not None and val not in action.choices:
            raise UsageError(f"config key {key!r}: {val!r} not in {list(action.choices)}")
        defaults[key] = val
    sub.set_defaults(**defaults)


@dataclass
class RunConfig:
    command: str
    detector_kind: str = "das"
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    theta0: Optional[GaussianParams] = None
    theta1: Optional[GaussianParams] = None
    target_arl: Optional[float] = None
    sym_div: Optional[float] = None
    window: Optional[int] = None
    threshold: Optional[float] = None
    drift: Optional[float] = None
    delta0: Optional[float] = None
    w_floor: int = DEFAULT_W_FLOOR
    w_max: int = DEFAULT_W_MAX
    seed: int = 0
    trials: int = 500
    horizon: Optional[int] = None
    tsv: bool = False
    mode: str = "thresholds"
    thresholds: Optional[list[float]] = None
    windows: Optional[list[int]] = None
    arl_grid: Optional[list[float]] = None
    theory_only: bool = False

    def validate(self) -> None:
        if self.command == "detect" and not self.input_path:
            raise UsageError("detect needs an input path or '-' for stdin")
        if self.command in ("simulate", "curve") and self.mode != "window" and self.theta0 is None:
            raise UsageError(f"{self.command} needs a scenario: at least --theta0")
        if self.trials < 1:
            raise UsageError("--trials must be >= 1")
        for name in ("window", "horizon"):
            val = getattr(self, name)
            if val is not None and val < 1:
                raise UsageError(f"--{name} must be positive")

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        return cls(
            command=ns.command,
            detector_kind=ns.detector,
            input_path=getattr(ns, "input", None),
            output_path=ns.output,
            theta0=ns.theta0,
            theta1=ns.theta1,
            target_arl=ns.arl,
            sym_div=ns.sym_div,
            window=ns.window,
            threshold=ns.threshold,
            drift=ns.drift,
            delta0=ns.delta0,
            w_floor=ns.w_floor,
            w_max=ns.w_max,
            seed=ns.seed,
            trials=ns.trials,
            horizon=ns.horizon,
            tsv=ns.tsv,
            mode=getattr(ns, "mode", "thresholds"),
            thresholds=getattr(ns, "thresholds", None),
            windows=getattr(ns, "windows", None),
            arl_grid=getattr(ns, "arl_grid", None),
            theory_only=getattr(ns, "theory_only", False),
        )


def parse_run_config(argv: Sequence[str]) -> RunConfig:
    parser = build_parser()
    argv = list(argv)
    pre = parser.parse_args(argv)
    if pre.config:
        sub = parser._subparsers._group_actions[0].choices[pre.command]
        _apply_config(sub, read_config(pre.config))
        pre = parser.parse_args(argv)
    cfg = RunConfig.from_namespace(pre)
    cfg.validate()
    return cfg


# -- commands --------------------------------------------------------------


def _tsv(out: TextIO, rows: Iterable[Sequence[object]]) -> None:
    for row in rows:
        out.write("\t".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def _das_drift(cfg: RunConfig, window: int) -> float:
    if cfg.drift is not None:
        return cfg.drift
    s = _sym_div(cfg)
    d0 = cfg.delta0 if cfg.delta0 is not None else delta0_star(s, window)
    return v_star(d0, window)


def _sym_div(cfg: RunConfig) -> float:
    if cfg.sym_div is not None:
        return cfg.sym_div
    if cfg.theta0 is not None and cfg.theta1 is not None:
        return symmetric_kl(cfg.theta0, cfg.theta1)
    raise UsageError("--sym-div is required (or give --theta0 and --theta1)")


def cmd_detect(cfg: RunConfig, out: TextIO, err: TextIO) -> int:
    values = np.array([v for _, v in ingest_csv(cfg.input_path)], dtype=float)
    if values.size == 0:
        raise IngestError("input is empty")
    kind = cfg.detector_kind

    window = cfg.window
    if window is None:
        if cfg.target_arl is not None and cfg.sym_div is not None:
            window = tune(cfg.target_arl, cfg.sym_div, w_floor=cfg.w_floor, w_max=cfg.w_max).window_star
        else:
            window = DetectorConfig.window
    if window > values.size:
        raise IngestError(f"window {window} is longer than the input ({values.size} samples)")

    estimated = cfg.theta0 is None
    theta0 = window_estimate(values[:window]) if estimated else cfg.theta0

    threshold = cfg.threshold
    if threshold is None:
        if kind != "das" or cfg.target_arl is None:
            raise UsageError("--threshold is required (or --arl with --sym-div for the das detector)")
        s = _sym_div(cfg)
        d0 = cfg.delta0 if cfg.delta0 is not None else delta0_star(s, window)
        threshold = threshold_for_arl(cfg.target_arl, d0)
    drift = _das_drift(cfg, window) if kind == "das" else (cfg.drift or 0.0)
    if kind == "cusum" and cfg.theta1 is None:
        raise UsageError("the cusum detector needs --theta1")

    dcfg = DetectorConfig(threshold=threshold, window=window, drift=drift, post_change=cfg.theta1)
    try:
        dcfg.validate(kind)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    events = run_detector(values, dcfg, kind, theta0)

    write_events(out, events)
    note = f" (estimated from first {window} samples)" if estimated else ""
    err.write(
        f"events={len(events)} detector={kind} samples={values.size} window={window} "
        f"threshold={fmt(threshold)} drift={fmt(drift)} "
        f"theta0={fmt(theta0.mean)},{fmt(theta0.variance)}{note}\n"
    )
    return 0


def write_events(out: TextIO, events: Sequence[ChangeEvent]) -> None:
    out.write(",".join(EVENT_COLUMNS) + "\n")
    for ev in events:
        p = ev.adopted_params
        out.write(f"{ev.alarm_index},{ev.decision_index},{fmt(p.mean)},{fmt(p.variance)}\n")


def cmd_tune(cfg: RunConfig, out: TextIO, err: TextIO) -> int:
    if cfg.target_arl is None or cfg.sym_div is None:
        raise UsageError("tune needs --arl and --sym-div")
    res = tune(cfg.target_arl, cfg.sym_div, cfg.window, cfg.w_floor, cfg.w_max, cfg.delta0)
    rows = [
        ("window", res.window_star),
        ("delta0", res.delta0),
        ("drift", res.drift),
        ("threshold", res.threshold),
        ("edd", res.theoretical_edd),
        ("unconstrained_window", res.unconstrained_window),
    ]
    note = None
    if cfg.window is None and res.window_star != res.unconstrained_window:
        note = (
            f"window floor {cfg.w_floor} overrides the unconstrained optimum "
            f"{res.unconstrained_window}"
        )
    if cfg.tsv:
        _tsv(out, [[k for k, _ in rows], [v for _, v in rows]])
        if note:
            err.write(f"note: {note}\n")
    else:
        for k, v in rows:
            out.write(f"{k}: {fmt(v)}\n")
        if note:
            out.write(f"note: {note}\n")
    return 0


def _scenario(cfg: RunConfig, window: int) -> Scenario:
    theta1 = cfg.theta1
    if theta1 is None:
        raise UsageError("this command needs --theta1")
    return Scenario(cfg.theta0, theta1, window, cfg.detector_kind, cfg.sym_div, cfg.drift)


def _scenario_config(cfg: RunConfig, window: int, threshold: float) -> DetectorConfig:
    kind = cfg.detector_kind
    drift = _das_drift(cfg, window) if kind == "das" else (cfg.drift or 0.0)
    dcfg = DetectorConfig(threshold=threshold, window=window, drift=drift, post_change=cfg.theta1)
    try:
        dcfg.validate(kind)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return dcfg


def cmd_simulate(cfg: RunConfig, out: TextIO, err: TextIO) -> int:
    kind = cfg.detector_kind
    window = cfg.window or DetectorConfig.window
    threshold = cfg.threshold
    calibrated = False
    if threshold is None:
        if cfg.target_arl is None:
            raise UsageError("simulate needs --threshold or --arl (calibrates the threshold)")
        base = _scenario_config(cfg, window, 1.0)
        threshold = calibrate_threshold(
            cfg.target_arl, base, cfg.theta0, kind, cfg.trials, cfg.seed, horizon=cfg.horizon
        )
        calibrated = True
    dcfg = _scenario_config(cfg, window, threshold)
    horizon = cfg.horizon or int(50 * cfg.target_arl if cfg.target_arl else 100_000)
    arl = estimate_arl(dcfg, cfg.theta0, kind, cfg.trials, horizon, cfg.seed)
    edd = None
    if cfg.theta1 is not None:
        edd = estimate_edd(dcfg, cfg.theta0, cfg.theta1, kind, cfg.trials, cfg.seed + 1)

    if cfg.tsv:
        _tsv(out, [CURVE_COLUMNS, ["simulated", arl.value, edd.value if edd else math.nan, threshold, window]])
        return 0
    rows: list[tuple[str, object]] = [
        ("detector", kind),
        ("window", window),
        ("threshold", threshold),
        ("threshold_source", "calibrated" if calibrated else "given"),
        ("trials", cfg.trials),
        ("seed", cfg.seed),
        ("arl", arl.value),
        ("arl_std_error", arl.std_error),
        ("arl_censored", arl.censored),
    ]
    if edd is not None:
        rows += [("edd", edd.value), ("edd_std_error", edd.std_error), ("edd_censored", edd.censored)]
    for k, v in rows:
        out.write(f"{k}: {v if isinstance(v, str) else fmt(v)}\n")
    return 0


def threshold_table_rows(cfg: RunConfig) -> list[CurvePoint]:
    """Theoretical and, unless ``theory_only``, calibrated thresholds per (ARL, window)."""
    s = _sym_div(cfg)
    points: list[CurvePoint] = []
    for gamma in cfg.arl_grid or TABLE_ARLS:
        for w in cfg.windows or TABLE_WINDOWS:
            d0 = delta0_star(s, w)
            b = threshold_for_arl(gamma, d0)
            points.append(CurvePoint(gamma, edd_theoretical(gamma, s, w), b, w, "theoretical"))
            if cfg.theory_only:
                continue
            base = DetectorConfig(threshold=b, window=w, drift=v_star(d0, w))
            b_sim = calibrate_threshold(gamma, base, cfg.theta0, "das", cfg.trials, cfg.seed, horizon=cfg.horizon)
            dcfg = DetectorConfig(threshold=b_sim, window=w, drift=base.drift)
            horizon = cfg.horizon or int(50 * gamma)
            arl = estimate_arl(dcfg, cfg.theta0, "das", cfg.trials, horizon, cfg.seed)
            edd = math.nan
            if cfg.theta1 is not None:
                edd = estimate_edd(dcfg, cfg.theta0, cfg.theta1, "das", cfg.trials, cfg.seed + 1).value
            points.append(CurvePoint(arl.value, edd, b_sim, w, "simulated"))
    return points


def window_rows(cfg: RunConfig) -> list[CurvePoint]:
    """Theoretical EDD against window length at fixed ARL."""
    if cfg.target_arl is None:
        raise UsageError("window mode needs --arl")
    s = _sym_div(cfg)
    windows = cfg.windows or list(range(5, 61))
    if not windows:
        raise UsageError("window grid is empty")
    if min(windows) < 2:
        raise UsageError("windows must be >= 2")
    return [
        CurvePoint(
            cfg.target_arl,
            edd_theoretical(cfg.target_arl, s, w),
            threshold_for_arl(cfg.target_arl, delta0_star(s, w)),
            w,
            "theoretical",
        )
        for w in windows
    ]


def cmd_curve(cfg: RunConfig, out: TextIO, err: TextIO) -> int:
    if cfg.mode == "threshold-table":
        points = threshold_table_rows(cfg)
    elif cfg.mode == "window":
        points = window_rows(cfg)
    else:
        if not cfg.thresholds:
            raise UsageError("threshold grid is empty; pass --thresholds")
        window = cfg.window or DetectorConfig.window
        points = edd_vs_arl_curve(cfg.thresholds, _scenario(cfg, window), cfg.trials, cfg.seed, cfg.horizon)
    _tsv(out, [CURVE_COLUMNS] + [[p.source, p.arl, p.edd, p.threshold, p.window] for p in points])
    return 0


COMMANDS = {"detect": cmd_detect, "tune": cmd_tune, "simulate": cmd_simulate, "curve": cmd_curve}


def main(argv: Optional[Sequence[str]] = None, stdout: TextIO = None, stderr: TextIO = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_run_config(argv)
    except UsageError as exc:
        stderr.write(f"dascusum: error: {exc}\n")
        return 2
    out, close = stdout, False
    try:
        if cfg.output_path:
            out, close = open(cfg.output_path, "w", newline="", encoding="utf-8"), True
        return COMMANDS[cfg.command](cfg, out, stderr)
    except (UsageError, ConfigurationError) as exc:
        stderr.write(f"dascusum {cfg.command}: error: {exc}\n")
        return 2
    except (IngestError, CalibrationError, OSError) as exc:
        stderr.write(f"dascusum {cfg.command}: error: {exc}\n")
        return 1
    except ValueError as exc:
        stderr.write(f"dascusum {cfg.command}: error: {exc}\n")
        return 2
    finally:
        if close:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
