"""Command-line entry point: single runs and parameter sweeps.

Exit codes: 0 when every identity check passes, 2 when a balance threshold
fails, 1 on any error.  Numbers are written in fixed scientific notation with
12 significant digits, so identical configurations give identical CSV bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
import uuid
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import __version__
from .circuit import FLOAT_FMT, write_csv
from .errors import ConfigError, EOPulseError, RegimeWarning
from .model import get_path, read_config_bytes, validate_config
from .optics import spectrum

MODES = ("phenomenological", "microscopic", "both")
OUT_ENV = "EOPULSE_OUT"
DEFAULT_OUT = "eopulse-out"
MAX_SWEEP_POINTS = 1000
SWEEP_COLUMNS = ("value", "delta_omega_extra_probe", "peak_abs_delta_omega_extra", "U_R", "U_ERS", "U_V0",
                 "residual_energy", "residual_battery", "photon_discrepancy", "pass", "error")


def _fmt(x) -> str:
    return FLOAT_FMT.format(float(x))


def _cell(row: dict, column: str) -> str:
    if column == "error":
        return row.get("error", "")
    if column == "pass":
        return str(row.get("pass", 0))
    return _fmt(row[column]) if column in row else "nan"


# --------------------------------------------------------------------------- single runs

def _write_result(result, out: Path, with_spectrum: bool) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "trajectory": out / "trajectory.csv",
        "optical": out / "optical.csv",
        "pulse": out / "pulse.csv",
        "ledger": out / "ledger.json",
    }
    result.charge.to_csv(paths["trajectory"])
    result.response.to_csv(paths["optical"])
    result.pulse.to_csv(paths["pulse"])
    ledger = result.report.to_dict()
    ledger["chi2_dc"] = result.chi2
    paths["ledger"].write_text(json.dumps(ledger, indent=2, sort_keys=True, default=float) + "\n")
    if with_spectrum:
        paths["spectrum"] = out / "spectrum.csv"
        write_csv(paths["spectrum"], ("frequency_offset", "spectral_density"), spectrum(result.response))
    return {k: str(v) for k, v in paths.items()}


def _compare(a, b) -> dict:
    """Largest relative differences between two runs on their own grids."""
    def rel(x_t, x, y_t, y):
        ref = np.max(np.abs(y))
        if ref == 0:
            return 0.0
        order = np.argsort(x_t, kind="stable")
        return float(np.max(np.abs(np.interp(y_t, x_t[order], x[order]) - y)) / ref)

    return {
        "sigma1": rel(a.charge.t, a.charge.sigma1, b.charge.t, b.charge.sigma1),
        "delta_omega": rel(a.response.t, a.response.delta_omega, b.response.t, b.response.delta_omega),
        "U_R": abs(a.joule.numerical - b.joule.numerical) / abs(b.joule.numerical) if b.joule.numerical else 0.0,
    }


def run_single(config_path, mode: str = "phenomenological", out=None, quiet: bool = False,
               with_spectrum: bool = False) -> int:
    from .pipeline import simulate, simulate_microscopic

    start = time.perf_counter()
    data, raw = read_config_bytes(config_path)
    model = validate_config(raw)
    if mode in ("microscopic", "both") and model.microscopic is None:
        raise ConfigError("MISSING_FIELD", f"--mode {mode} needs a [microscopic] section", "microscopic")
    out = Path(out)
    run_id = uuid.uuid4().hex
    outputs: dict = {}
    passed = True
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RegimeWarning)
        results = {}
        if mode in ("phenomenological", "both"):
            results["phenomenological"] = simulate(model, run_id=run_id, warn=True)
        if mode in ("microscopic", "both"):
            micro = simulate_microscopic(model, run_id=run_id, warn=True)
            results["microscopic"] = micro.result
        for name, res in results.items():
            target = out if mode != "both" else out / name
            outputs[name] = _write_result(res, target, with_spectrum)
            passed = passed and res.report.passed
        if mode in ("microscopic", "both"):
            target = out if mode == "microscopic" else out / "microscopic"
            path = target / "exciton.csv"
            micro.exciton.to_csv(path)
            outputs["microscopic"]["exciton"] = str(path)
            fit = micro.fit
            outputs["microscopic"]["chi2_fit"] = {"chi2_dc": fit.chi2_dc, "residual": fit.residual,
                                                  "r_squared": fit.r_squared, "perturbative": fit.analytic}
            outputs["microscopic"]["adiabatic_margin"] = micro.adiabaticity.margin
    if not quiet:
        for msg in dict.fromkeys(str(w.message) for w in caught):
            print(f"warning: {msg}", file=sys.stderr)

    manifest = {
        "run_id": run_id,
        "version": __version__,
        "mode": mode,
        "config_path": str(config_path),
        "config_sha256": hashlib.sha256(data).hexdigest(),
        "config_snapshot": data.decode("utf-8"),
        "outputs": outputs,
        "pass": passed,
        "wall_time_s": time.perf_counter() - start,
    }
    if mode == "both":
        manifest["comparison"] = _compare(results["microscopic"], results["phenomenological"])
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    if not quiet:
        for name, res in results.items():
            status = "pass" if res.report.passed else "FAIL"
            print(f"{name}: U_R={res.joule.numerical:.6e} J  U_ERS={res.optical.numerical:.6e} J  "
                  f"residual_energy={res.report.residuals['energy']:.2e}  {status}")
    return 0 if passed else 2


# --------------------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    scale: str
    points: int
    start: float
    stop: float
    probe_time: float | None = None

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


def load_sweep(path) -> SweepSpec:
    _, raw = read_config_bytes(path)
    sec = raw.get("sweep", raw)
    allowed = {"parameter", "scale", "points", "start", "stop", "probe_time", "max_points"}
    unknown = sorted(set(sec) - allowed)
    if unknown:
        raise ConfigError("UNKNOWN_KEY", f"unknown key(s) {unknown}", f"sweep.{unknown[0]}")
    for key in ("parameter", "points", "start", "stop"):
        if key not in sec:
            raise ConfigError("MISSING_FIELD", "required key is missing", f"sweep.{key}")
    scale = sec.get("scale", "linear")
    if scale not in ("linear", "log"):
        raise ConfigError("BAD_TYPE", "scale must be 'linear' or 'log'", "sweep.scale")
    points = sec["points"]
    cap = int(sec.get("max_points", MAX_SWEEP_POINTS))
    if isinstance(points, bool) or not isinstance(points, int) or points < 2 or points > cap:
        raise ConfigError("OUT_OF_RANGE", f"points must be an integer in [2, {cap}]", "sweep.points")
    start, stop = float(sec["start"]), float(sec["stop"])
    if scale == "log" and (start <= 0 or stop <= 0):
        raise ConfigError("OUT_OF_RANGE", "log sweeps need positive bounds", "sweep.start")
    if "." not in str(sec["parameter"]):
        raise ConfigError("BAD_TYPE", "parameter must be a dotted path such as circuit.R", "sweep.parameter")
    probe = sec.get("probe_time")
    return SweepSpec(str(sec["parameter"]), scale, points, start, stop, None if probe is None else float(probe))


def probe_value(t, y, segments, t0: float) -> float:
    """Value at ``t0`` by cubic interpolation inside the grid segment holding it."""
    for a, b in segments:
        if t[a] <= t0 <= t[b - 1]:
            return float(CubicSpline(t[a:b], y[a:b])(t0))
    return 0.0


def sweep_point(raw: dict, parameter: str, value: float, probe_time: float) -> dict:
    """One sweep row; errors are recorded, never raised."""
    from .pipeline import simulate

    row = {"value": value}
    try:
        model = validate_config(raw).with_values({parameter: value})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            res = simulate(model, run_id=f"sweep-{value!r}")
        dwx = res.response.delta_omega_extra
        row.update({
            "delta_omega_extra_probe": probe_value(res.response.t, dwx, res.response.segments, probe_time),
            "peak_abs_delta_omega_extra": float(np.max(np.abs(dwx))),
            "U_R": res.joule.numerical,
            "U_ERS": res.optical.numerical,
            "U_V0": res.battery.numerical,
            "residual_energy": res.report.residuals["energy"],
            "residual_battery": res.report.residuals["battery"],
            "photon_discrepancy": res.report.residuals["photon_number"],
            "pass": int(res.report.passed),
            "error": "",
        })
    except EOPulseError as exc:
        row["error"] = exc.code
    except Exception as exc:  # keep the sweep going; the row says what broke
        row["error"] = type(exc).__name__
    return row


def run_sweep(config_path, sweep_path, out=None, jobs: int = 1, quiet: bool = False) -> int:
    start = time.perf_counter()
    data, raw = read_config_bytes(config_path)
    base = validate_config(raw)
    spec = load_sweep(sweep_path)
    if get_path(raw, spec.parameter) is None and spec.parameter.split(".")[0] not in raw:
        raise ConfigError("UNKNOWN_KEY", "swept parameter is not in the configuration", spec.parameter)
    probe = spec.probe_time if spec.probe_time is not None else 0.5 * base.pulse.plateau_duration
    values = spec.values()
    args = [(raw, spec.parameter, float(v), probe) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(sweep_point, *zip(*args)))
    else:
        rows = [sweep_point(*a) for a in args]
    order = sorted(range(len(rows)), key=lambda i: (rows[i]["value"], i))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for i in order:
            w.writerow([_cell(rows[i], c) for c in SWEEP_COLUMNS])
    manifest = {
        "run_id": uuid.uuid4().hex,
        "version": __version__,
        "config_path": str(config_path),
        "config_sha256": hashlib.sha256(data).hexdigest(),
        "config_snapshot": data.decode("utf-8"),
        "sweep": spec.__dict__ | {"probe_time": probe},
        "outputs": {"sweep": str(path)},
        "wall_time_s": time.perf_counter() - start,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    failed = sum(1 for r in rows if r["error"])
    unbalanced = sum(1 for r in rows if not r["error"] and not r["pass"])
    if not quiet:
        print(f"sweep of {spec.parameter}: {len(rows)} points, {failed} errors, {unbalanced} balance failures")
    if failed:
        return 1
    return 2 if unbalanced else 0


# --------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eopulse", description="Electrical-pulse generation by virtual photo-excitation.")
    p.add_argument("--config", required=True, help="model configuration (TOML)")
    p.add_argument("--mode", choices=MODES, default="phenomenological")
    p.add_argument("--sweep", help="sweep specification (TOML); runs a parameter sweep instead of a single run")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    p.add_argument("--spectrum", action="store_true", help="also write spectrum.csv")
    p.add_argument("--quiet", action="store_true", help="suppress warnings and the summary")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT
    try:
        if args.sweep:
            return run_sweep(args.config, args.sweep, out, jobs=max(1, args.jobs), quiet=args.quiet)
        return run_single(args.config, args.mode, out, quiet=args.quiet, with_spectrum=args.spectrum)
    except EOPulseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, UnicodeDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
