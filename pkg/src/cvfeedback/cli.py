"""Command-line front end: run a scenario and write its table as CSV."""

from __future__ import annotations

import argparse
import datetime
import hashlib
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import scenarios as sc
from .config import ConfigError, apply_overrides, parse_config, serialize_config
from .network import InstabilityError, NetworkStructureError
from .sideband import ParameterError

SCENARIOS = ("source", "open-loop", "feedback-eot", "detuning-sweep", "reflectivity-sweep",
             "cavity-scan", "snl", "correct-detection", "calibrate", "optimize-detuning")

# detected squeezing quoted for the bare source and for the two reference transmissivities
OPEN_LOOP_TRANSMISSIVITIES = (0.334, 0.75)


class UsageError(ValueError):
    pass


@dataclass
class ResultTable:
    columns: tuple
    rows: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        rows = np.asarray(self.rows, dtype=float)
        if rows.size == 0:
            rows = rows.reshape(0, len(self.columns))
        if rows.ndim != 2 or rows.shape[1] != len(self.columns):
            raise ValueError(f"table must have {len(self.columns)} columns, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("table contains non-finite values")
        self.rows = rows

    def column(self, name):
        return self.rows[:, self.columns.index(name)]


def config_hash(cfg):
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:16]


def _rows_for(name, cfg, jobs):
    if name == "source":
        e = sc.source_entanglement(cfg)
        return ("sum_db", "diff_db", "duan", "entangled"), [[e.sum_db, e.diff_db, e.duan,
                                                             float(e.entangled)]]
    if name == "open-loop":
        src = sc.source_entanglement(cfg)
        rows = []
        ts = OPEN_LOOP_TRANSMISSIVITIES
        if cfg.sample.t not in ts:
            ts = ts + (cfg.sample.t,)
        for t in ts:
            rows.append([t, sc.open_loop_transmission(src.sum_db, t),
                         sc.open_loop_transmission(src.diff_db, t)])
        return ("t", "sum_db", "diff_db"), rows
    if name == "feedback-eot":
        r = sc.feedback_eot(cfg)
        return ("sum_db", "diff_db", "duan", "enhancement_db"), [[r.sum_db, r.diff_db, r.duan,
                                                                   r.enhancement_db]]
    if name == "detuning-sweep":
        return ("theta", "d2_intensity", "sum_db", "duan"), sc.detuning_sweep(cfg, jobs)
    if name == "reflectivity-sweep":
        return (("r", "t", "sum_db_feedback_on", "sum_db_feedback_off", "gap_db", "duan_on"),
                sc.reflectivity_sweep(cfg, jobs))
    if name == "cavity-scan":
        t, v, p = sc.cavity_scan(cfg)
        return ("t", "drive_voltage", "circulating_power"), np.column_stack([t, v, p])
    if name == "snl":
        s = sc.snl_calibration(cfg)
        combos = (sc.SUM, sc.DIFF, sc.QuadratureCombo.amplitude_difference("1", "2"),
                  sc.QuadratureCombo.phase_sum("1", "2"))
        return (("amplitude_sum", "phase_difference", "amplitude_difference", "phase_sum"),
                [[s.variance(c) for c in combos]])
    if name == "correct-detection":
        r = sc.feedback_eot(cfg)
        eff = cfg.detection.efficiency
        on = sc.detection_correction(r.sum_db, eff)
        off = sc.detection_correction(r.open_loop.sum_db, eff)
        v_on, v_off = sc.db_to_variance(on), sc.db_to_variance(off)
        return (("detected_on_db", "detected_off_db", "inferred_on_db", "inferred_off_db",
                 "inferred_enhancement_db", "variance_improvement_pct"),
                [[r.sum_db, r.open_loop.sum_db, on, off, on - off, 100 * (v_off - v_on) / v_off]])
    if name == "calibrate":
        cal = sc.calibrate_detected_source(cfg)
        return (("pump_parameter", "excess_phase_noise", "cavity_sum_db", "cavity_diff_db",
                 "detected_sum_db", "detected_diff_db"),
                [[cal.pump_parameter, cal.excess_phase_noise, cal.achieved_sum_db,
                  cal.achieved_diff_db, cfg.calibration.sum_db, cfg.calibration.diff_db]])
    if name == "optimize-detuning":
        rows = []
        for k, obj in enumerate(sc.OBJECTIVES):
            o = sc.optimize_detuning(cfg, obj)
            rows.append([k, o.theta, o.value, float(o.degenerate)])
        return ("objective", "theta", "value", "degenerate"), rows
    raise UsageError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")


def run_scenario(name, cfg, jobs=1):
    """Evaluate scenario ``name`` and return its :class:`ResultTable`."""
    columns, rows = _rows_for(name, cfg, jobs)
    provenance = {"scenario": name, "version": __version__, "config_hash": config_hash(cfg)}
    return ResultTable(columns, rows, provenance)


def write_csv(table, destination, deterministic=False):
    """Write ``#`` provenance lines, a header and 17-significant-digit rows."""
    lines = [f"# {k}: {v}" for k, v in table.provenance.items()]
    if not deterministic:
        lines.append(f"# generated: {datetime.datetime.now(datetime.timezone.utc).isoformat()}")
    lines.append(",".join(table.columns))
    lines.extend(",".join(f"{v:.17g}" for v in row) for row in table.rows)
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
        return
    try:
        with open(destination, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {destination}: {exc.strerror}") from exc


def _parse_sweep(text):
    try:
        key, _, rng = text.partition("=")
        start, stop, steps = rng.split(":")
        return [("sweep.parameter", key), ("sweep.start", start), ("sweep.stop", stop),
                ("sweep.steps", steps)]
    except ValueError:
        raise ConfigError(f"--sweep expects key=from:to:steps, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="cvfeedback", description=__doc__)
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--config", help="config document path")
    p.add_argument("--output", help="CSV destination (default: stdout)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key, e.g. sample.r=0.2")
    p.add_argument("--sweep", metavar="KEY=FROM:TO:STEPS")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--deterministic", action="store_true", help="omit the timestamp comment")
    return p


def load_config(args):
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    cfg = parse_config(text)
    pairs = []
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        pairs.append((key.strip(), value))
    if args.sweep:
        pairs += _parse_sweep(args.sweep)
    return apply_overrides(cfg, pairs) if pairs else cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigError, OSError, UsageError) as exc:
        print(f"cvfeedback: config error: {exc}", file=sys.stderr)
        return 2
    try:
        table = run_scenario(args.scenario, cfg, jobs=args.jobs)
    except (sc.ContractError, UsageError) as exc:
        print(f"cvfeedback: usage error: {exc}", file=sys.stderr)
        return 2
    except (InstabilityError, sc.CalibrationError, sc.UnphysicalDetectionError,
            ParameterError, NetworkStructureError, ArithmeticError) as exc:
        print(f"cvfeedback: {exc}", file=sys.stderr)
        return 1
    try:
        write_csv(table, args.output or sys.stdout, deterministic=args.deterministic)
    except OSError as exc:
        print(f"cvfeedback: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
