"""Ray-based multipath channel between a transmitter and the receive arrays.

Signal amplitudes are in sqrt(mW): a sample of magnitude ``a`` carries
``a**2`` mW, so received power in dBm is read directly off the correlation
peak. Rays are frozen for the duration of one dwell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .codebook import Beam, BeamType, TX_BEAM_TYPES, RX_BEAM_TYPES, beam_gain, wrap_azimuth
from .errors import DomainError, OutOfSpanError, ValidationError
from .geo import Trajectory, bearing, los_direction
from .waveform import ComplexSequence, ZcConfig

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_HZ = -174.0
MAX_SAFE_TX_INPUT_DBM = -12.0


def fspl(freq: float, distance) -> float:
    """Free-space path loss in dB, ``20*log10(4*pi*d*f/c)``."""
    distance = np.asarray(distance, dtype=float)
    if not freq > 0 or np.any(distance <= 0):
        raise DomainError(f"fspl needs positive frequency and distance (f={freq!r}, d={distance!r})")
    loss = 20.0 * np.log10(4.0 * math.pi * distance * freq / SPEED_OF_LIGHT)
    return float(loss) if loss.ndim == 0 else loss


@dataclass(frozen=True)
class Ray:
    delay: float
    gain: complex
    aoa: tuple
    aod: tuple
    is_los: bool = False

    def __post_init__(self):
        if self.delay < 0:
            raise ValidationError("ray delay must be non-negative")
        if abs(self.gain) > 1.0:
            raise ValidationError("ray gain magnitude cannot exceed 1")

    @property
    def power_db(self) -> float:
        return 20.0 * math.log10(abs(self.gain)) if self.gain else -math.inf


@dataclass(frozen=True)
class Reflector:
    """Point specular scatterer with a fixed loss.

    Sits at ``position`` (ENU) unless ``trajectory`` is given, in which case
    it moves along it (a vehicle in traffic, say).
    """

    position: tuple = (0.0, 0.0, 0.0)
    loss: float = 0.0
    trajectory: Trajectory | None = None

    def __post_init__(self):
        if self.loss < 0:
            raise ValidationError("reflector loss must be >= 0 dB")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))

    def position_at(self, t: float) -> np.ndarray:
        if self.trajectory is None:
            return np.asarray(self.position)
        return self.trajectory.position(t)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything needed to simulate one measurement run."""

    tx_trajectory: Trajectory
    rx_trajectory: Trajectory
    carrier_freq: float = 28.3e9
    tx_power_in: float = MAX_SAFE_TX_INPUT_DBM
    tx_beam_type: BeamType = TX_BEAM_TYPES[3]
    tx_boresight: tuple = (0.0, 0.0)
    rx_beam_type: BeamType = RX_BEAM_TYPES[2]
    reflectors: tuple = ()
    los_blocked_intervals: tuple = ()
    noise_figure: float | None = 5.0
    averaging_m: int = 1
    calibration_offset: float = 0.0
    rng_seed: int = 0
    zc: ZcConfig = field(default_factory=ZcConfig)
    measurement_floor: float = -100.0
    gps_noise_sigma: float = 0.02
    duration: float | None = None
    sweep_interval: float | None = None
    name: str = "scenario"

    def __post_init__(self):
        if not self.carrier_freq > 0:
            raise ValidationError("carrier_freq must be positive")
        if int(self.averaging_m) != self.averaging_m or self.averaging_m < 1:
            raise ValidationError("averaging_m must be a positive integer")
        if self.tx_power_in > MAX_SAFE_TX_INPUT_DBM:
            raise ValidationError(
                f"tx_power_in {self.tx_power_in} dBm exceeds the safe array input of {MAX_SAFE_TX_INPUT_DBM} dBm"
            )
        if self.tx_beam_type.side != "tx" or self.rx_beam_type.side != "rx":
            raise ValidationError("tx_beam_type / rx_beam_type must come from the tx / rx tables")
        if self.gps_noise_sigma < 0:
            raise ValidationError("gps_noise_sigma must be non-negative")
        if self.duration is not None and not self.duration > 0:
            raise ValidationError("duration must be positive")
        if self.sweep_interval is not None and not self.sweep_interval > 0:
            raise ValidationError("sweep_interval must be positive")
        intervals = tuple((float(a), float(b)) for a, b in self.los_blocked_intervals)
        if any(b < a for a, b in intervals):
            raise ValidationError("blocked interval end precedes its start")
        object.__setattr__(self, "los_blocked_intervals", intervals)
        object.__setattr__(self, "reflectors", tuple(self.reflectors))
        object.__setattr__(self, "tx_boresight", tuple(float(v) for v in self.tx_boresight))

    @property
    def tx_beam(self) -> Beam:
        return Beam(self.tx_boresight[0], self.tx_boresight[1], self.tx_beam_type)

    @property
    def time_span(self) -> tuple[float, float]:
        """Interval covered by both trajectories, clipped by ``duration``."""
        lo = max(self.tx_trajectory.span[0], self.rx_trajectory.span[0])
        hi = min(self.tx_trajectory.span[1], self.rx_trajectory.span[1])
        if not math.isfinite(lo):
            lo = 0.0
        if hi < lo:
            raise OutOfSpanError(f"transmitter and receiver trajectories do not overlap in time ({lo} > {hi})")
        if self.duration is not None:
            if lo + self.duration > hi + 1e-9:
                raise OutOfSpanError(
                    f"duration {self.duration} s runs past the trajectory span [{lo}, {hi}]"
                )
            hi = lo + self.duration
        if not math.isfinite(hi):
            raise ValidationError("static scenario needs an explicit duration")
        return lo, hi

    def is_los(self, t: float) -> bool:
        return not any(a <= t < b for a, b in self.los_blocked_intervals)


def _global_direction(src, dst) -> tuple[float, float]:
    d = np.subtract(dst, src)
    horizontal = math.hypot(d[0], d[1])
    return wrap_azimuth(bearing(d)) if horizontal > 0 else 0.0, math.degrees(math.atan2(d[2], horizontal))


def _ray(freq, length, extra_loss, aoa, aod, is_los) -> Ray:
    delay = length / SPEED_OF_LIGHT
    magnitude = 10.0 ** (-(fspl(freq, length) + extra_loss) / 20.0)
    return Ray(delay, magnitude * np.exp(-2j * math.pi * freq * delay), aoa, aod, is_los)


def build_rays(scenario: Scenario, t: float) -> list[Ray]:
    """Line-of-sight ray (unless blocked) plus one ray per reflector.

    Arrival angles are in the receiver frame, departure angles in the global
    frame.
    """
    for traj in (scenario.tx_trajectory, scenario.rx_trajectory):
        if not traj.covers(t):
            raise OutOfSpanError(f"t={t!r} outside trajectory span {traj.span}")
    tx = scenario.tx_trajectory.position(t)
    rx = scenario.rx_trajectory.position(t)
    heading = scenario.rx_trajectory.heading(t)
    f = scenario.carrier_freq

    rays = []
    if scenario.is_los(t):
        d = float(np.linalg.norm(rx - tx))
        rays.append(_ray(f, d, 0.0, los_direction(rx, heading, tx), _global_direction(tx, rx), True))
    for refl in scenario.reflectors:
        p = refl.position_at(t)
        length = float(np.linalg.norm(p - tx) + np.linalg.norm(rx - p))
        rays.append(_ray(f, length, refl.loss, los_direction(rx, heading, p), _global_direction(tx, p), False))
    return rays


def ray_beam_gains(scenario: Scenario, rays, rx_beam: Beam) -> tuple[list[float], list[float]]:
    """Per-ray transmit and receive beam gains in dB."""
    tx_beam = scenario.tx_beam
    return [beam_gain(tx_beam, r.aod) for r in rays], [beam_gain(rx_beam, r.aoa) for r in rays]


def tap_amplitudes(rays, tx_gains, rx_gains) -> np.ndarray:
    return np.array(
        [r.gain * 10.0 ** ((gt + gr) / 20.0) for r, gt, gr in zip(rays, tx_gains, rx_gains)],
        dtype=np.complex128,
    )


def apply_channel(tx_signal: ComplexSequence, rays, tx_gains, rx_gains) -> ComplexSequence:
    """Pass a cyclic signal through the rays.

    ``r[k] = sum_i a_i * s[(k - round(delay_i / Ts)) mod len]`` with
    ``a_i = gain_i * 10**((tx_gain_i + rx_gain_i) / 20)``.
    """
    s = tx_signal.samples
    out = np.zeros_like(s)
    for a, ray in zip(tap_amplitudes(rays, tx_gains, rx_gains), rays):
        out += a * np.roll(s, int(round(ray.delay / tx_signal.sample_period)))
    return tx_signal.with_samples(out)


def noise_power_dbm(noise_figure: float, sample_rate: float) -> float:
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(sample_rate) + noise_figure


def add_noise(signal: ComplexSequence, noise_figure: float, sample_rate: float, rng: np.random.Generator) -> ComplexSequence:
    """Add circular complex Gaussian receiver noise (kTB plus noise figure)."""
    variance = 10.0 ** (noise_power_dbm(noise_figure, sample_rate) / 10.0)
    n = signal.samples.size
    noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return signal.with_samples(signal.samples + math.sqrt(variance / 2.0) * noise)


def dwell_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent random stream for one dwell (or other keyed unit of work)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, key)]))
