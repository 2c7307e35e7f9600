"""Built-in scenarios used by ``verify``, the examples and the test suite."""

from __future__ import annotations

import numpy as np

from .channel import Reflector, Scenario, fspl
from .codebook import RX_BEAM_TYPES, TX_BEAM_TYPES
from .geo import Trajectory

FEET = 0.3048
ANECHOIC_SEPARATION = 17 * FEET
ANECHOIC_REFERENCE_PATHLOSS = 75.67

# 20 mph
VAN_SPEED = 20 * 1609.344 / 3600.0


def anechoic(separation: float = ANECHOIC_SEPARATION, tx_type: int = 3, rx_type: int = 2,
             noise_figure: float | None = 5.0, seed: int = 0) -> Scenario:
    """Chamber set-up: transmitter and the forward receive array face each other.

    The transmitter sits at the origin pointing north; the receiver sits
    ``separation`` meters north at the same height, heading south.
    """
    height = 1.5
    return Scenario(
        tx_trajectory=Trajectory.static((0.0, 0.0, height)),
        rx_trajectory=Trajectory.static((0.0, separation, height), heading=180.0),
        carrier_freq=28.3e9,
        # lowered drive level to protect the receive array at short range
        tx_power_in=-30.0,
        tx_beam_type=TX_BEAM_TYPES[tx_type],
        tx_boresight=(0.0, 0.0),
        rx_beam_type=RX_BEAM_TYPES[rx_type],
        noise_figure=noise_figure,
        rng_seed=seed,
        gps_noise_sigma=0.0,
        duration=0.00625,
        name="anechoic",
    )


def static_v2i(duration: float = 1.0, distance: float = 50.0, noise_figure: float | None = 5.0,
               seed: int = 0) -> Scenario:
    """Parked receiver van facing a roof-mounted transmitter 15 m up."""
    return Scenario(
        tx_trajectory=Trajectory.static((0.0, 0.0, 15.0)),
        rx_trajectory=Trajectory.static((0.0, distance, 2.4), heading=0.0),
        tx_boresight=(0.0, -10.0),
        noise_figure=noise_figure,
        rng_seed=seed,
        duration=duration,
        name="static_v2i",
    )


def roof_reflector_drive(duration: float = 10.0, start: float = 10.0, speed: float = 20.0,
                         blocked_fraction: float = 0.6, sweep_interval: float | None = 0.25,
                         noise_figure: float | None = 5.0, seed: int = 0) -> Scenario:
    """Van driving away from a mast-mounted transmitter next to a car.

    The car roof (1.5 m high, 3 m behind the receiver array toward the
    transmitter) reflects strongly and arrives below the horizon. The
    direct path is blocked for the last ``blocked_fraction`` of the drive.
    """
    end = start + speed * duration
    tx_height, rx_height, roof_height = 2.9, 2.4, 1.5
    rx = Trajectory.from_waypoints([(0.0, (0.0, start, rx_height)), (duration, (0.0, end, rx_height))])
    car = Trajectory.from_waypoints(
        [(0.0, (0.0, start - 3.0, roof_height)), (duration, (0.0, end - 3.0, roof_height))]
    )
    blocked_from = duration * (1.0 - blocked_fraction)
    return Scenario(
        tx_trajectory=Trajectory.static((0.0, 0.0, tx_height)),
        rx_trajectory=rx,
        tx_boresight=(0.0, 0.0),
        reflectors=(Reflector(tuple(car.positions[0]), 3.0, car),),
        los_blocked_intervals=((blocked_from, duration + 1.0),) if blocked_fraction > 0 else (),
        noise_figure=noise_figure,
        rng_seed=seed,
        sweep_interval=sweep_interval,
        name="roof_reflector_drive",
    )


BUILTIN = {
    "anechoic": anechoic,
    "static_v2i": static_v2i,
    "roof_reflector_drive": roof_reflector_drive,
}


def synthetic_ci_dataset(n: float, sigma: float, count: int = 500, d_min: float = 10.0, d_max: float = 200.0,
                         carrier_freq: float = 28.3e9, rng: np.random.Generator | None = None):
    """Uniform distances and CI-model path loss with Gaussian shadowing (dB)."""
    rng = np.random.default_rng() if rng is None else rng
    d = rng.uniform(d_min, d_max, count)
    pl = fspl(carrier_freq, 1.0) + 10.0 * n * np.log10(d) + rng.normal(0.0, sigma, count)
    return d, pl
