"""Receiver beam-sweep loop and capture files.

The four receive arrays sweep their sectors in parallel: during slot ``s`` of
a sweep every array holds its ``s``-th beam for ``averaging_m`` sounding
periods, so a 200-beam codebook is scanned in 50 dwells. Timestamps are
integer nanoseconds since run start and mark the start of each dwell.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .channel import Scenario, add_noise, apply_channel, build_rays, dwell_rng, ray_beam_gains
from .codebook import N_SECTORS, Beam, Codebook, beam_gain
from .errors import LengthMismatchError, OutOfSpanError, ValidationError
from .geo import synthesize_gps, write_gps_csv
from .waveform import ComplexSequence, circular_xcorr, correlate_spectrum, generate_zc, periodic_signal

CAPTURE_HEADER = [
    "sweep_index", "timestamp_ns", "beam_index", "azimuth_deg", "elevation_deg", "rx_power_dbm", "below_floor",
]
PDP_INDEX_HEADER = ["sweep_index", "beam_index", "offset_bytes", "n_bins"]
DEFAULT_FLOOR_DBM = -100.0

# power floor keeps log10 finite on an empty channel
_TINY_MW = 1e-30

# random stream identifiers; dwell streams use (seed, sweep, beam)
_GPS_STREAM = 1 << 40


@dataclass(frozen=True, eq=False)
class Pdp:
    """Power-delay profile in dBm per delay bin."""

    bins: np.ndarray
    bin_period: float

    def __post_init__(self):
        if not self.bin_period > 0:
            raise ValidationError("bin_period must be positive")
        object.__setattr__(self, "bins", np.asarray(self.bins, dtype=float))

    def __len__(self):
        return self.bins.size

    @property
    def delays(self) -> np.ndarray:
        return np.arange(self.bins.size) * self.bin_period


@dataclass(frozen=True)
class SweepRecord:
    sweep_index: int
    beam_index: int
    timestamp_ns: int
    rx_power: float
    below_floor: bool
    azimuth: float = 0.0
    elevation: float = 0.0
    pdp: Pdp | None = field(default=None, compare=False, repr=False)

    @property
    def timestamp(self) -> float:
        return self.timestamp_ns * 1e-9


def pdp_from_capture(rx, ref, m: int, calibration_offset: float = 0.0) -> Pdp:
    """Average the ``m`` per-period correlation powers of a dwell.

    Each period's correlation is scaled to power by ``|c|**2 / N**2``; the
    ``m`` profiles are averaged bin-wise in linear power before conversion
    to dB.
    """
    ref_samples = ref.samples if isinstance(ref, ComplexSequence) else np.asarray(ref)
    rx_samples = rx.samples if isinstance(rx, ComplexSequence) else np.asarray(rx)
    n = ref_samples.size
    if rx_samples.size != m * n:
        raise LengthMismatchError(f"capture has {rx_samples.size} samples, expected m*n_zc = {m * n}")
    corr = circular_xcorr(rx_samples, ref_samples)
    period = ref.sample_period if isinstance(ref, ComplexSequence) else 1.0
    return Pdp(_power_db(corr, n) + calibration_offset, period)


def _power_db(corr: np.ndarray, n: int) -> np.ndarray:
    """Period-averaged correlation power in dB; ``corr`` is (..., m, n)."""
    power = np.mean(corr.real**2 + corr.imag**2, axis=-2) / float(n) ** 2
    return 10.0 * np.log10(np.maximum(power, _TINY_MW))


def peak_power(pdp: Pdp, floor: float = DEFAULT_FLOOR_DBM) -> tuple[float, bool]:
    """Strongest bin and whether it falls under the measurement floor."""
    power = float(np.max(pdp.bins))
    return power, power < floor


def dwell_ns(scenario: Scenario) -> int:
    """Dwell length in nanoseconds (``averaging_m`` sounding periods)."""
    exact = Fraction(scenario.averaging_m * scenario.zc.n_zc * 10**9) / Fraction(scenario.zc.sample_rate)
    return round(exact)


def sweep_ns(scenario: Scenario, codebook: Codebook) -> int:
    return codebook.n_slots * dwell_ns(scenario)


class Sounder:
    """Synthesizes and processes dwells for one scenario and codebook."""

    def __init__(self, scenario: Scenario, codebook: Codebook, run_start: float | None = None):
        self.scenario = scenario
        self.codebook = codebook
        self.run_start = scenario.time_span[0] if run_start is None else float(run_start)
        self.reference = generate_zc(scenario.zc)
        amplitude = math.sqrt(10.0 ** (scenario.tx_power_in / 10.0))
        tx = periodic_signal(self.reference, scenario.averaging_m)
        self._tx = tx.with_samples(amplitude * tx.samples)
        self._ref_spectrum = np.conj(np.fft.fft(self.reference.samples))
        self.dwell_ns = dwell_ns(scenario)
        self.sweep_ns = codebook.n_slots * self.dwell_ns
        # sweeps start back to back unless a longer interval is configured
        interval = 0 if scenario.sweep_interval is None else round(scenario.sweep_interval * 1e9)
        self.stride_ns = max(self.sweep_ns, interval)

    def dwell_start_ns(self, sweep_index: int, slot: int) -> int:
        return sweep_index * self.stride_ns + slot * self.dwell_ns

    def time_of(self, t_ns: int) -> float:
        """Scenario time (s) of a run-relative timestamp."""
        return self.run_start + t_ns * 1e-9

    def capture(self, rays, rx_beam: Beam, rng: np.random.Generator | None,
                tx_gains=None) -> ComplexSequence:
        """Received samples of one dwell: channel output plus receiver noise."""
        if tx_gains is None:
            tx_gains, rx_gains = ray_beam_gains(self.scenario, rays, rx_beam)
        else:
            rx_gains = [beam_gain(rx_beam, r.aoa) for r in rays]
        rx = apply_channel(self._tx, rays, tx_gains, rx_gains)
        if self.scenario.noise_figure is not None:
            rx = add_noise(rx, self.scenario.noise_figure, self.scenario.zc.sample_rate, rng)
        return rx

    def measure(self, rays, rx_beam: Beam, rng: np.random.Generator | None = None) -> Pdp:
        """PDP of a single dwell on an arbitrary receive beam."""
        if rng is None and self.scenario.noise_figure is not None:
            rng = dwell_rng(self.scenario.rng_seed, 0, rx_beam.index)
        rx = self.capture(rays, rx_beam, rng)
        return pdp_from_capture(rx, self.reference, self.scenario.averaging_m, self.scenario.calibration_offset)

    def run_sweep(self, sweep_index: int, keep_pdp: bool = False) -> list[SweepRecord]:
        """All codebook dwells of one sweep, in beam-index order."""
        sc = self.scenario
        m, n = sc.averaging_m, sc.zc.n_zc
        tx_beam = sc.tx_beam
        records = []
        for slot in range(self.codebook.n_slots):
            t_ns = self.dwell_start_ns(sweep_index, slot)
            rays = build_rays(sc, self.time_of(t_ns + self.dwell_ns // 2))
            tx_gains = [beam_gain(tx_beam, r.aod) for r in rays]
            beams = self.codebook.beams[N_SECTORS * slot: N_SECTORS * (slot + 1)]
            stack = np.empty((len(beams), m * n), dtype=np.complex128)
            for row, beam in enumerate(beams):
                rng = dwell_rng(sc.rng_seed, sweep_index, beam.index) if sc.noise_figure is not None else None
                stack[row] = self.capture(rays, beam, rng, tx_gains).samples
            corr = correlate_spectrum(stack.reshape(len(beams), m, n), self._ref_spectrum)
            profiles = _power_db(corr, n) + sc.calibration_offset
            for beam, bins in zip(beams, profiles):
                pdp = Pdp(bins, self.reference.sample_period)
                power, below = peak_power(pdp, sc.measurement_floor)
                records.append(
                    SweepRecord(sweep_index, beam.index, t_ns, power, below, beam.azimuth, beam.elevation,
                                pdp if keep_pdp else None)
                )
        return records

    def n_sweeps(self) -> int:
        lo, hi = self.scenario.time_span
        span_ns = round((hi - self.run_start) * 1e9)
        if span_ns < self.sweep_ns:
            return 0
        return (span_ns - self.sweep_ns) // self.stride_ns + 1

    def check_span(self, sweep_index: int) -> None:
        t_start = self.time_of(self.dwell_start_ns(sweep_index, 0))
        t_end = self.time_of(self.dwell_start_ns(sweep_index, 0) + self.sweep_ns)
        for traj in (self.scenario.tx_trajectory, self.scenario.rx_trajectory):
            if not (traj.covers(t_start) and traj.covers(t_end)):
                raise OutOfSpanError(f"trajectories do not cover sweep {sweep_index} ending at t={t_end:.6f} s")


def run_sweep(scenario: Scenario, codebook: Codebook, sweep_index: int = 0, t0: float | None = None,
              keep_pdp: bool = False) -> list[SweepRecord]:
    """One full codebook sweep starting at scenario time ``t0``.

    Raises :class:`~mmsounder.errors.OutOfSpanError` if the trajectories do
    not cover the sweep.
    """
    sounder = Sounder(scenario, codebook, run_start=None if t0 is None else 0.0)
    if t0 is not None:
        sounder.run_start = t0 - sounder.dwell_start_ns(sweep_index, 0) * 1e-9
    sounder.check_span(sweep_index)
    return sounder.run_sweep(sweep_index, keep_pdp)


@dataclass
class RunCapture:
    records: list
    rx_gps: list
    tx_gps: list
    n_sweeps: int
    run_start: float
    sweep_ns: int
    dwell_ns: int
    stride_ns: int

    def sweeps(self):
        """Records grouped per sweep."""
        per = len(self.records) // self.n_sweeps if self.n_sweeps else 0
        return [self.records[i * per:(i + 1) * per] for i in range(self.n_sweeps)]


def simulate_run(scenario: Scenario, codebook: Codebook, workers: int = 1, keep_pdp: bool = False) -> RunCapture:
    """Back-to-back sweeps over the scenario's time span, plus GPS logs.

    Dwells draw noise from streams keyed by (seed, sweep, beam), so the
    result does not depend on ``workers``.
    """
    sounder = Sounder(scenario, codebook)
    n = sounder.n_sweeps()
    if n == 0:
        raise OutOfSpanError("scenario time span is shorter than one sweep")
    sounder.check_span(n - 1)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sweeps = list(pool.map(lambda k: sounder.run_sweep(k, keep_pdp), range(n)))
    else:
        sweeps = [sounder.run_sweep(k, keep_pdp) for k in range(n)]
    records = [r for sweep in sweeps for r in sweep]

    end_ns = sounder.dwell_start_ns(n - 1, 0) + sounder.sweep_ns
    gps = []
    for which, traj in enumerate((scenario.rx_trajectory, scenario.tx_trajectory)):
        rng = dwell_rng(scenario.rng_seed, _GPS_STREAM, which)
        fixes = synthesize_gps(_shifted(traj, sounder.run_start), 0, end_ns, scenario.gps_noise_sigma, rng)
        gps.append(fixes)
    return RunCapture(records, gps[0], gps[1], n, sounder.run_start, sounder.sweep_ns, sounder.dwell_ns,
                      sounder.stride_ns)


def _shifted(traj, run_start):
    """Trajectory re-timed so that ``t = 0`` is the run start."""
    if traj.is_static or run_start == 0:
        return traj
    return type(traj)(traj.times - run_start, traj.positions, traj.heading_override)


def write_capture_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CAPTURE_HEADER)
        for r in records:
            writer.writerow([
                r.sweep_index, r.timestamp_ns, r.beam_index, f"{r.azimuth:.6f}", f"{r.elevation:.6f}",
                f"{r.rx_power:.6f}", int(r.below_floor),
            ])


def read_capture_csv(path) -> list[SweepRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CAPTURE_HEADER:
            raise ValidationError(f"{path}: expected header {','.join(CAPTURE_HEADER)}")
        return [
            SweepRecord(
                int(row["sweep_index"]), int(row["beam_index"]), int(row["timestamp_ns"]),
                float(row["rx_power_dbm"]), row["below_floor"] == "1",
                float(row["azimuth_deg"]), float(row["elevation_deg"]),
            )
            for row in reader
        ]


def write_pdp_sidecar(bin_path, index_path, records) -> None:
    """PDPs as consecutive little-endian float32 blocks plus a CSV offset table."""
    offset = 0
    with open(bin_path, "wb") as data, open(index_path, "w", newline="") as idx:
        writer = csv.writer(idx, lineterminator="\n")
        writer.writerow(PDP_INDEX_HEADER)
        for r in records:
            if r.pdp is None:
                continue
            block = np.asarray(r.pdp.bins, dtype="<f4").tobytes()
            data.write(block)
            writer.writerow([r.sweep_index, r.beam_index, offset, r.pdp.bins.size])
            offset += len(block)


def read_pdp(bin_path, index_path, sweep_index: int, beam_index: int) -> np.ndarray:
    with open(index_path, newline="") as fh:
        for row in csv.DictReader(fh):
            if int(row["sweep_index"]) == sweep_index and int(row["beam_index"]) == beam_index:
                offset, n = int(row["offset_bytes"]), int(row["n_bins"])
                break
        else:
            raise KeyError((sweep_index, beam_index))
    with open(bin_path, "rb") as fh:
        fh.seek(offset)
        return np.frombuffer(fh.read(4 * n), dtype="<f4").astype(float)


def write_run(out_dir, capture: RunCapture, pdp: bool = False) -> dict:
    """Write capture, GPS logs and (optionally) the PDP sidecar; return file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "capture": out / "capture.csv",
        "gps_rx": out / "gps_rx.csv",
        "gps_tx": out / "gps_tx.csv",
    }
    write_capture_csv(paths["capture"], capture.records)
    write_gps_csv(paths["gps_rx"], capture.rx_gps)
    write_gps_csv(paths["gps_tx"], capture.tx_gps)
    if pdp:
        paths["pdp"] = out / "pdp.bin"
        paths["pdp_index"] = out / "pdp_index.csv"
        write_pdp_sidecar(paths["pdp"], paths["pdp_index"], capture.records)
    return paths
