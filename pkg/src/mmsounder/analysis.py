"""Path loss extraction, close-in model fitting and angular statistics."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array

from .channel import Scenario, fspl
from .codebook import Codebook, beam_gain, nearest_beam
from .errors import (
    DegenerateFitError, IncompleteSweepError, InsufficientSamplesError, MissingGpsError, OutOfSpanError,
    StationaryError, ValidationError,
)
from .geo import fixes_to_trajectory, heading_from_gps, interpolate_position, los_direction

CATEGORIES = ("best", "boresight")
PATHLOSS_HEADER = ["distance_m", "pathloss_db", "los"]
FITS_HEADER = ["category", "los", "n", "sigma_db", "samples"]
HEATMAP_HEADER = ["beam_index", "sector", "azimuth_deg", "elevation_deg", "rx_power_dbm", "below_floor", "radius_deg"]


@dataclass(frozen=True)
class PathLossSample:
    distance: float
    pathloss: float
    los: bool
    category: str
    rx_position: tuple = (0.0, 0.0, 0.0)
    elevation_of_best: float = 0.0
    count: int = 1
    sweep_index: int = -1

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValidationError(f"category must be one of {CATEGORIES}, got {self.category!r}")
        if not self.pathloss > 0:
            raise ValidationError("pathloss must be positive")


@dataclass(frozen=True)
class CiFit:
    n: float
    sigma: float
    fspl_d0: float
    sample_count: int
    d0: float = 1.0

    def predict(self, distance):
        return self.fspl_d0 + 10.0 * self.n * np.log10(np.asarray(distance, dtype=float) / self.d0)


class CloseInPathLoss(RegressorMixin, BaseEstimator):
    """Close-in path loss model with a free-space anchor at ``d0``.

    ``PL(d) = FSPL(f, d0) + 10 n log10(d / d0)``; only the exponent ``n`` is
    fitted (least squares with the intercept fixed). ``sigma_`` is the RMS
    residual in dB.

    Parameters
    ----------
    carrier_freq : float
        Carrier frequency in Hz, used for the anchor ``FSPL(f, d0)``.
    d0 : float
        Reference distance in meters.
    """

    def __init__(self, carrier_freq: float = 28.3e9, d0: float = 1.0):
        self.carrier_freq = carrier_freq
        self.d0 = d0

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=1, y_numeric=True)
        d = X[:, 0]
        if d.size < 2:
            raise InsufficientSamplesError(f"need at least 2 samples, got {d.size}")
        if np.any(d < self.d0):
            raise ValidationError(f"all distances must be >= d0 = {self.d0} m")
        if np.ptp(d) == 0:
            raise DegenerateFitError("all distances are equal")
        self.fspl_d0_ = fspl(self.carrier_freq, self.d0)
        x = 10.0 * np.log10(d / self.d0)
        excess = y - self.fspl_d0_
        self.n_ = float(np.dot(x, excess) / np.dot(x, x))
        residual = excess - self.n_ * x
        self.sigma_ = float(np.sqrt(np.mean(residual**2)))
        self.n_samples_ = int(d.size)
        return self

    def predict(self, X):
        check_is_fitted(self, "n_")
        d = check_array(X)[:, 0]
        return self.fspl_d0_ + 10.0 * self.n_ * np.log10(d / self.d0)

    def to_fit(self) -> CiFit:
        check_is_fitted(self, "n_")
        return CiFit(self.n_, self.sigma_, self.fspl_d0_, self.n_samples_, self.d0)


def fit_ci(samples, carrier_freq: float = 28.3e9) -> CiFit:
    """Fit the close-in model to path loss samples (weighted equally)."""
    samples = list(samples)
    if len(samples) < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {len(samples)}")
    X = np.array([[s.distance] for s in samples])
    y = np.array([s.pathloss for s in samples])
    return CloseInPathLoss(carrier_freq).fit(X, y).to_fit()


def _group_sweeps(records):
    sweeps = defaultdict(list)
    for r in records:
        sweeps[r.sweep_index].append(r)
    return [sweeps[k] for k in sorted(sweeps)]


def extract_pathloss(records, scenario: Scenario, codebook: Codebook, rx_gps, tx_gps=None,
                     run_start: float | None = None, sweep_ns: int | None = None,
                     deembed: str = "boresight") -> list[PathLossSample]:
    """Best-beam and boresight-beam path loss, one sample of each per sweep.

    Path loss is ``tx_power_in + G_tx + G_rx - rx_power``. With
    ``deembed="boresight"`` the gains are the configured beam types'
    boresight gains; with ``deembed="pattern"`` they are the pattern gains
    of the transmit beam and the selected receive beam toward the geometric
    line-of-sight direction. Records under the measurement floor are skipped,
    and so is the boresight sample when the heading is undefined.

    ``records`` carry run-relative timestamps, matching the GPS logs;
    ``run_start`` maps them to scenario time for the line-of-sight label.
    """
    if deembed not in ("boresight", "pattern"):
        raise ValidationError(f"deembed must be 'boresight' or 'pattern', got {deembed!r}")
    if run_start is None:
        run_start = scenario.time_span[0]
    rx_fixes = sorted(rx_gps, key=lambda f: f.timestamp)
    if len(rx_fixes) < 1:
        raise MissingGpsError("receiver GPS log is empty")
    rx_traj = fixes_to_trajectory(rx_fixes) if len(rx_fixes) > 1 else None
    tx_traj = fixes_to_trajectory(tx_gps) if tx_gps is not None and len(tx_gps) > 1 else None
    heading_override = scenario.rx_trajectory.heading_override
    tx_boresight_gain = scenario.tx_beam_type.boresight_gain
    beams = codebook.beams

    samples = []
    for sweep in _group_sweeps(records):
        if len(sweep) != len(beams):
            raise IncompleteSweepError(f"sweep {sweep[0].sweep_index} has {len(sweep)} of {len(beams)} records")
        t0 = min(r.timestamp_ns for r in sweep)
        t_ns = t0 + (sweep_ns // 2 if sweep_ns else 0)
        t = t_ns * 1e-9
        if rx_traj is None:
            rx_pos = np.asarray(rx_fixes[0].position)
        else:
            if not rx_traj.covers(t):
                raise MissingGpsError(f"sweep {sweep[0].sweep_index} at t={t:.6f} s is outside the GPS log")
            rx_pos = interpolate_position(rx_traj, t)
        if tx_traj is not None and tx_traj.covers(t):
            tx_pos = interpolate_position(tx_traj, t)
        else:
            tx_pos = scenario.tx_trajectory.position(run_start + t)
        distance = float(np.linalg.norm(tx_pos - rx_pos))
        los = scenario.is_los(run_start + t)

        valid = [r for r in sweep if not r.below_floor]
        if not valid:
            continue
        best = max(valid, key=lambda r: (r.rx_power, -r.beam_index))
        best_beam = beams[best.beam_index]

        heading = heading_override
        if heading is None:
            try:
                heading = heading_from_gps(rx_fixes, t)
            except (StationaryError, OutOfSpanError, ValidationError):
                heading = None
        los_dir = los_direction(rx_pos, heading, tx_pos) if heading is not None else None

        def pathloss(record):
            beam = beams[record.beam_index]
            if deembed == "boresight" or los_dir is None:
                g_tx, g_rx = tx_boresight_gain, beam.beam_type.boresight_gain
            else:
                aod = los_direction(tx_pos, 0.0, rx_pos)
                g_tx = beam_gain(scenario.tx_beam, aod)
                g_rx = beam_gain(beam, los_dir)
            return scenario.tx_power_in + g_tx + g_rx - record.rx_power

        common = dict(los=los, rx_position=tuple(float(v) for v in rx_pos),
                      elevation_of_best=best_beam.elevation, sweep_index=best.sweep_index)
        samples.append(PathLossSample(distance, pathloss(best), category="best", **common))
        if los_dir is not None:
            target = nearest_beam(codebook, los_dir)
            record = next(r for r in sweep if r.beam_index == target.index)
            if not record.below_floor:
                samples.append(PathLossSample(distance, pathloss(record), category="boresight", **common))
    return samples


@dataclass(frozen=True)
class ElevationHistogram:
    rows: np.ndarray
    counts: np.ndarray
    edges: np.ndarray

    @property
    def fractions(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total else np.zeros(self.counts.size)

    @property
    def mode(self) -> float:
        return float(self.rows[int(np.argmax(self.counts))])


def elevation_histogram(samples, codebook: Codebook) -> ElevationHistogram:
    """Share of sweeps whose strongest beam lies in each codebook elevation row.

    Each bin spans half the distance to the neighboring rows; the outer
    edges are the segment limits.
    """
    rows = codebook.elevation_rows()
    half = codebook.segment_elevation_span / 2.0
    edges = np.concatenate([[-half], (rows[1:] + rows[:-1]) / 2.0, [half]])
    counts = np.zeros(rows.size, dtype=int)
    for s in samples:
        if s.category != "best":
            continue
        counts[int(np.argmin(np.abs(rows - s.elevation_of_best)))] += 1
    return ElevationHistogram(rows, counts, edges)


def heatmap_export(sweep, codebook: Codebook) -> list[dict]:
    """Per-beam received power of one complete sweep, with cell geometry."""
    sweep = sorted(sweep, key=lambda r: r.beam_index)
    if [r.beam_index for r in sweep] != list(range(len(codebook))):
        raise IncompleteSweepError(f"sweep has {len(sweep)} of {len(codebook)} beams")
    radius = codebook.cell_radius()
    return [
        {
            "beam_index": r.beam_index,
            "sector": codebook[r.beam_index].sector,
            "azimuth_deg": codebook[r.beam_index].azimuth,
            "elevation_deg": codebook[r.beam_index].elevation,
            "rx_power_dbm": r.rx_power,
            "below_floor": r.below_floor,
            "radius_deg": radius,
        }
        for r in sweep
    ]


def fit_groups(samples, carrier_freq: float) -> tuple[dict, dict]:
    """CI fit per (category, los); failures are returned separately."""
    groups = defaultdict(list)
    for s in samples:
        groups[(s.category, s.los)].append(s)
    fits, failures = {}, {}
    for key in sorted(groups, key=lambda k: (CATEGORIES.index(k[0]), not k[1])):
        try:
            fits[key] = fit_ci(groups[key], carrier_freq)
        except (InsufficientSamplesError, DegenerateFitError) as exc:
            failures[key] = str(exc)
    return fits, failures


def _los_label(los: bool) -> str:
    return "LOS" if los else "NLOS"


def write_pathloss_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PATHLOSS_HEADER)
        for s in samples:
            writer.writerow([f"{s.distance:.4f}", f"{s.pathloss:.4f}", _los_label(s.los)])


def write_fits_csv(path, fits) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FITS_HEADER)
        for (category, los), fit in fits.items():
            writer.writerow([category, _los_label(los), f"{fit.n:.4f}", f"{fit.sigma:.4f}", fit.sample_count])


def read_fits_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_histogram_csv(path, hist: ElevationHistogram) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["elevation_deg", "bin_low_deg", "bin_high_deg", "count", "fraction"])
        for row, lo, hi, count, frac in zip(hist.rows, hist.edges[:-1], hist.edges[1:], hist.counts, hist.fractions):
            writer.writerow([f"{row:.6f}", f"{lo:.6f}", f"{hi:.6f}", int(count), f"{frac:.6f}"])


def write_heatmap_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEATMAP_HEADER)
        for r in rows:
            writer.writerow([
                r["beam_index"], r["sector"], f"{r['azimuth_deg']:.6f}", f"{r['elevation_deg']:.6f}",
                f"{r['rx_power_dbm']:.6f}", int(r["below_floor"]), f"{r['radius_deg']:.6f}",
            ])


def write_report(out_dir, samples, fits, failures, hist, heatmaps=None, notes=()) -> dict:
    """Write the analysis report directory and return the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "pathloss_best": out / "pathloss_best.csv",
        "pathloss_boresight": out / "pathloss_boresight.csv",
        "ci_fits": out / "ci_fits.csv",
        "elevation_hist": out / "elevation_hist.csv",
        "notes": out / "notes.txt",
    }
    write_pathloss_csv(paths["pathloss_best"], [s for s in samples if s.category == "best"])
    write_pathloss_csv(paths["pathloss_boresight"], [s for s in samples if s.category == "boresight"])
    write_fits_csv(paths["ci_fits"], fits)
    write_histogram_csv(paths["elevation_hist"], hist)
    for k, rows in (heatmaps or {}).items():
        paths[f"heatmap_{k}"] = out / f"heatmap_sweep_{k}.csv"
        write_heatmap_csv(paths[f"heatmap_{k}"], rows)
    lines = list(notes)
    for (category, los), reason in failures.items():
        lines.append(f"{category}/{_los_label(los)}: fit skipped ({reason})")
    for category in CATEGORIES:
        for los in (True, False):
            if (category, los) not in fits and (category, los) not in failures:
                lines.append(f"{category}/{_los_label(los)}: no samples")
    paths["notes"].write_text("".join(f"{line}\n" for line in lines))
    return paths

