"""Trajectories, GPS fixes, heading estimation and local-square averaging.

Positions are local East-North-Up coordinates in meters with one fixed
origin per run. Headings and bearings are degrees clockwise from north.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, replace

import numpy as np

from .codebook import wrap_azimuth
from .errors import CoincidentPositionsError, OutOfSpanError, StationaryError, ValidationError

GPS_INTERVAL = 0.070
GPS_INTERVAL_NS = 70_000_000
GPS_CSV_HEADER = ["timestamp_ns", "east_m", "north_m", "up_m", "fix_quality"]
RTK_FIXED = 4
HEADING_WINDOW = 2
MIN_HEADING_DISPLACEMENT = 0.1

_SPAN_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Piecewise-linear motion through timestamped ENU waypoints.

    A single waypoint describes a stationary platform valid at any time.
    ``heading_override`` fixes the platform heading (degrees); otherwise the
    heading follows the direction of travel.
    """

    times: np.ndarray
    positions: np.ndarray
    heading_override: float | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if times.size == 0:
            raise ValidationError("trajectory needs at least one waypoint")
        if positions.shape[0] != times.size:
            raise ValidationError("one position per waypoint timestamp is required")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("waypoint timestamps must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)

    @classmethod
    def from_waypoints(cls, waypoints, heading_override=None) -> Trajectory:
        """Build from ``[(t, (east, north, up)), ...]``."""
        times = [w[0] for w in waypoints]
        positions = [w[1] for w in waypoints]
        return cls(np.array(times, dtype=float), np.array(positions, dtype=float), heading_override)

    @classmethod
    def static(cls, position, heading: float | None = None) -> Trajectory:
        return cls(np.zeros(1), np.asarray(position, dtype=float).reshape(1, 3), heading)

    @property
    def is_static(self) -> bool:
        return self.times.size == 1

    @property
    def span(self) -> tuple[float, float]:
        if self.is_static:
            return (-math.inf, math.inf)
        return (float(self.times[0]), float(self.times[-1]))

    def covers(self, t: float) -> bool:
        lo, hi = self.span
        return lo - _SPAN_TOL <= t <= hi + _SPAN_TOL

    def position(self, t: float) -> np.ndarray:
        return interpolate_position(self, t)

    def heading(self, t: float) -> float:
        """Platform heading at ``t``: the override, or the travel direction."""
        if self.heading_override is not None:
            return float(self.heading_override) % 360.0
        if self.is_static:
            return 0.0
        self._check(t)
        seg = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2))
        # nearest segment with horizontal motion, searching backwards first
        for k in list(range(seg, -1, -1)) + list(range(seg + 1, self.times.size - 1)):
            d = self.positions[k + 1] - self.positions[k]
            if math.hypot(d[0], d[1]) > 0:
                return bearing(d)
        return 0.0

    def _check(self, t):
        if not self.covers(t):
            lo, hi = self.span
            raise OutOfSpanError(f"t={t!r} outside trajectory span [{lo}, {hi}]")


def interpolate_position(traj: Trajectory, t: float) -> np.ndarray:
    """Linear interpolation between the waypoints bracketing ``t``."""
    if traj.is_static:
        return traj.positions[0].copy()
    traj._check(t)
    t = min(max(t, traj.times[0]), traj.times[-1])
    return np.array([np.interp(t, traj.times, traj.positions[:, k]) for k in range(3)])


def bearing(vector) -> float:
    """Compass bearing of a horizontal ENU displacement, in ``[0, 360)``."""
    return math.degrees(math.atan2(vector[0], vector[1])) % 360.0


@dataclass(frozen=True)
class GpsFix:
    timestamp: float
    position: tuple
    noise_sigma: float = 0.0
    fix_quality: int = RTK_FIXED

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


def synthesize_gps(traj: Trajectory, start_ns: int, end_ns: int, noise_sigma: float, rng: np.random.Generator,
                   interval_ns: int = GPS_INTERVAL_NS) -> list[GpsFix]:
    """Noisy fixes every ``interval_ns`` nanoseconds from ``start_ns`` until
    the first fix at or after ``end_ns``.

    The log runs past the end of the trajectory by less than one interval so
    that every instant in ``[start_ns, end_ns]`` is bracketed by fixes; the
    platform holds its final position there.
    """
    lo, hi = traj.span
    n_fixes = -(-(int(end_ns) - int(start_ns)) // int(interval_ns)) + 1
    fixes = []
    for k in range(n_fixes):
        t = (int(start_ns) + k * int(interval_ns)) * 1e-9
        pos = interpolate_position(traj, min(max(t, lo), hi))
        if noise_sigma > 0:
            pos = pos + rng.normal(0.0, noise_sigma, 3)
        fixes.append(GpsFix(t, tuple(pos), noise_sigma))
    return fixes


def fixes_to_trajectory(fixes) -> Trajectory:
    fixes = sorted(fixes, key=lambda f: f.timestamp)
    return Trajectory(np.array([f.timestamp for f in fixes]), np.array([f.position for f in fixes]))


def heading_from_gps(fixes, t: float, window: int = HEADING_WINDOW) -> float:
    """Heading at ``t`` from the displacement across ``window`` fixes either side.

    Raises :class:`~mmsounder.errors.StationaryError` when the displacement
    over the window is under 0.1 m.
    """
    fixes = sorted(fixes, key=lambda f: f.timestamp)
    if len(fixes) < 2:
        raise ValidationError("heading needs at least two fixes")
    times = np.array([f.timestamp for f in fixes])
    if not times[0] - _SPAN_TOL <= t <= times[-1] + _SPAN_TOL:
        raise OutOfSpanError(f"t={t!r} outside GPS span [{times[0]}, {times[-1]}]")
    i = int(np.argmin(np.abs(times - t)))
    lo = max(0, i - window)
    hi = min(len(fixes) - 1, i + window)
    d = np.subtract(fixes[hi].position, fixes[lo].position)
    if math.hypot(d[0], d[1]) < MIN_HEADING_DISPLACEMENT:
        raise StationaryError(f"displacement {math.hypot(d[0], d[1]):.3f} m too small for a heading at t={t}")
    return bearing(d)


def los_direction(rx_pos, rx_heading: float, tx_pos) -> tuple[float, float]:
    """(azimuth, elevation) of the transmitter in the receiver frame."""
    d = np.subtract(tx_pos, rx_pos).astype(float)
    horizontal = math.hypot(d[0], d[1])
    if horizontal == 0.0 and d[2] == 0.0:
        raise CoincidentPositionsError("receiver and transmitter positions coincide")
    azimuth = wrap_azimuth(bearing(d) - rx_heading) if horizontal > 0 else 0.0
    elevation = math.degrees(math.atan2(d[2], horizontal))
    return azimuth, elevation


def local_square_average(samples, side: float = 4.0):
    """Merge samples whose receiver positions share a ``side``-meter grid square.

    Samples are grouped by (square, ``los``, ``category``). Path loss is
    averaged in dB; distance, position and elevation are plain means. Each
    output carries the summed ``count`` of its members, and means are
    weighted by member counts so repeated averaging is consistent.
    """
    if not side > 0:
        raise ValidationError("side must be positive")
    groups = defaultdict(list)
    for s in samples:
        e, n = s.rx_position[0], s.rx_position[1]
        key = (math.floor(e / side), math.floor(n / side), s.los, s.category)
        groups[key].append(s)

    out = []
    for key in sorted(groups, key=lambda k: (k[3], not k[2], k[0], k[1])):
        members = groups[key]
        if len(members) == 1:
            out.append(members[0])
            continue
        w = np.array([m.count for m in members], dtype=float)

        def wmean(values):
            return float(np.average(np.asarray(values, dtype=float), axis=0, weights=w))

        position = np.average(np.array([m.rx_position for m in members], dtype=float), axis=0, weights=w)
        out.append(
            replace(
                members[0],
                distance=wmean([m.distance for m in members]),
                pathloss=wmean([m.pathloss for m in members]),
                rx_position=tuple(float(v) for v in position),
                elevation_of_best=wmean([m.elevation_of_best for m in members]),
                count=int(w.sum()),
            )
        )
    return out


def write_gps_csv(path, fixes) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GPS_CSV_HEADER)
        for f in fixes:
            e, n, u = f.position
            writer.writerow([round(f.timestamp * 1e9), f"{e:.4f}", f"{n:.4f}", f"{u:.4f}", f.fix_quality])


def read_gps_csv(path, noise_sigma: float = 0.0) -> list[GpsFix]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != GPS_CSV_HEADER:
            raise ValidationError(f"{path}: expected header {','.join(GPS_CSV_HEADER)}")
        return [
            GpsFix(
                int(row["timestamp_ns"]) * 1e-9,
                (float(row["east_m"]), float(row["north_m"]), float(row["up_m"])),
                noise_sigma,
                int(row["fix_quality"]),
            )
            for row in reader
        ]
