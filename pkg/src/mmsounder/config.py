"""Scenario configuration files (YAML).

Example::

    name: v2i_street
    carrier_freq_hz: 28.3e9
    tx_power_dbm: -12
    tx_beam_type: 3
    tx_boresight_deg: [0, 0]      # azimuth (clockwise from north), elevation
    rx_beam_type: 2
    noise_figure_db: 5            # null disables receiver noise
    averaging_m: 1
    calibration_offset_db: 0
    measurement_floor_dbm: -100
    gps_noise_sigma_m: 0.02
    rng_seed: 7
    duration_s: 1.0               # optional; required if both ends are static
    zc: {n_zc: 8192, u: 1729, sample_rate_hz: 65.536e6}
    tx:
      position_m: [0, 0, 2.9]     # static platform
    rx:
      waypoints:                  # [t_s, east_m, north_m, up_m]
        - [0.0, 0, 10, 2.4]
        - [20.0, 0, 200, 2.4]
      heading_deg: null           # null follows the direction of travel
    reflectors:
      - {position_m: [3, 40, 1.5], loss_db: 3}
    los_blocked_intervals_s: [[12.0, 20.0]]

Units are SI, with dB/dBm where the key says so. Unknown keys are rejected;
errors name the offending field path (``rx.waypoints.1``).
"""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, model_validator

from .channel import Reflector, Scenario
from .codebook import get_beam_type
from .errors import InvalidConfigError, SounderError
from .geo import Trajectory
from .waveform import ZcConfig


# [t_s, east_m, north_m, up_m]
Waypoint = Annotated[list[float], Field(min_length=4, max_length=4)]
Vector3 = Annotated[list[float], Field(min_length=3, max_length=3)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ZcModel(_Strict):
    n_zc: int = Field(8192, gt=0)
    u: int = Field(1729, gt=0)
    sample_rate_hz: float = Field(65.536e6, gt=0)


class PlatformModel(_Strict):
    position_m: Optional[Vector3] = None
    waypoints: Optional[Annotated[list[Waypoint], Field(min_length=1)]] = None
    heading_deg: Optional[float] = None

    @model_validator(mode="after")
    def _one_form(self):
        if (self.position_m is None) == (self.waypoints is None):
            raise ValueError("give exactly one of position_m or waypoints")
        return self


class ReflectorModel(_Strict):
    position_m: Optional[Vector3] = None
    waypoints: Optional[Annotated[list[Waypoint], Field(min_length=1)]] = None
    loss_db: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _one_form(self):
        if (self.position_m is None) == (self.waypoints is None):
            raise ValueError("give exactly one of position_m or waypoints")
        return self


class ScenarioModel(_Strict):
    name: str = "scenario"
    carrier_freq_hz: float = Field(28.3e9, gt=0)
    tx_power_dbm: float = Field(-12.0, le=-12.0)
    tx_beam_type: int = Field(3, ge=1, le=4)
    tx_boresight_deg: list[float] = Field([0.0, 0.0], min_length=2, max_length=2)
    rx_beam_type: int = Field(2, ge=1, le=4)
    noise_figure_db: Optional[float] = 5.0
    averaging_m: int = Field(1, ge=1)
    calibration_offset_db: float = 0.0
    measurement_floor_dbm: float = -100.0
    gps_noise_sigma_m: float = Field(0.02, ge=0)
    rng_seed: int = Field(0, ge=0)
    duration_s: Optional[float] = Field(None, gt=0)
    sweep_interval_s: Optional[float] = Field(None, gt=0)
    zc: ZcModel = ZcModel()
    tx: PlatformModel
    rx: PlatformModel
    reflectors: list[ReflectorModel] = []
    los_blocked_intervals_s: list[Annotated[list[float], Field(min_length=2, max_length=2)]] = []


def _trajectory(model: PlatformModel) -> Trajectory:
    if model.position_m is not None:
        return Trajectory.static(model.position_m, model.heading_deg)
    return Trajectory.from_waypoints([(w[0], w[1:]) for w in model.waypoints], model.heading_deg)


def _reflector(model: ReflectorModel) -> Reflector:
    if model.position_m is not None:
        return Reflector(tuple(model.position_m), model.loss_db)
    traj = Trajectory.from_waypoints([(w[0], w[1:]) for w in model.waypoints])
    return Reflector(tuple(traj.positions[0]), model.loss_db, traj)


def _format_error(exc: PydanticValidationError, source: str) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{source}: {path}: {err['msg']}")
    return "\n".join(lines)


def scenario_from_dict(data: dict, source: str = "<scenario>", seed: int | None = None) -> Scenario:
    """Validate a configuration mapping and build a :class:`Scenario`.

    ``seed`` overrides ``rng_seed`` when given.
    """
    try:
        model = ScenarioModel.model_validate(data)
    except PydanticValidationError as exc:
        raise InvalidConfigError(_format_error(exc, source)) from None
    try:
        return Scenario(
            tx_trajectory=_trajectory(model.tx),
            rx_trajectory=_trajectory(model.rx),
            carrier_freq=model.carrier_freq_hz,
            tx_power_in=model.tx_power_dbm,
            tx_beam_type=get_beam_type("tx", model.tx_beam_type),
            tx_boresight=tuple(model.tx_boresight_deg),
            rx_beam_type=get_beam_type("rx", model.rx_beam_type),
            reflectors=tuple(_reflector(r) for r in model.reflectors),
            los_blocked_intervals=tuple(tuple(iv) for iv in model.los_blocked_intervals_s),
            noise_figure=model.noise_figure_db,
            averaging_m=model.averaging_m,
            calibration_offset=model.calibration_offset_db,
            rng_seed=model.rng_seed if seed is None else seed,
            zc=ZcConfig(model.zc.n_zc, model.zc.u, model.zc.sample_rate_hz),
            measurement_floor=model.measurement_floor_dbm,
            gps_noise_sigma=model.gps_noise_sigma_m,
            duration=model.duration_s,
            sweep_interval=model.sweep_interval_s,
            name=model.name,
        )
    except SounderError as exc:
        raise InvalidConfigError(f"{source}: {exc}") from None


def load_scenario(path, seed: int | None = None) -> Scenario:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise InvalidConfigError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(data, dict):
        raise InvalidConfigError(f"{path}: top level must be a mapping")
    return scenario_from_dict(data, str(path), seed)


def scenario_to_dict(scenario: Scenario) -> dict:
    """Inverse of :func:`scenario_from_dict` (used for manifests and built-ins)."""

    def platform(traj: Trajectory):
        out = _placement(traj)
        out["heading_deg"] = traj.heading_override
        return out

    return {
        "name": scenario.name,
        "carrier_freq_hz": scenario.carrier_freq,
        "tx_power_dbm": scenario.tx_power_in,
        "tx_beam_type": scenario.tx_beam_type.id,
        "tx_boresight_deg": list(scenario.tx_boresight),
        "rx_beam_type": scenario.rx_beam_type.id,
        "noise_figure_db": scenario.noise_figure,
        "averaging_m": scenario.averaging_m,
        "calibration_offset_db": scenario.calibration_offset,
        "measurement_floor_dbm": scenario.measurement_floor,
        "gps_noise_sigma_m": scenario.gps_noise_sigma,
        "rng_seed": scenario.rng_seed,
        "duration_s": scenario.duration,
        "sweep_interval_s": scenario.sweep_interval,
        "zc": {"n_zc": scenario.zc.n_zc, "u": scenario.zc.u, "sample_rate_hz": scenario.zc.sample_rate},
        "tx": platform(scenario.tx_trajectory),
        "rx": platform(scenario.rx_trajectory),
        "reflectors": [_reflector_dict(r) for r in scenario.reflectors],
        "los_blocked_intervals_s": [list(iv) for iv in scenario.los_blocked_intervals],
    }


def _placement(traj: Trajectory) -> dict:
    if traj.is_static:
        return {"position_m": [float(v) for v in traj.positions[0]]}
    return {"waypoints": [[float(t), *map(float, p)] for t, p in zip(traj.times, traj.positions)]}


def _reflector_dict(refl: Reflector) -> dict:
    if refl.trajectory is None:
        out = {"position_m": list(refl.position)}
    else:
        out = _placement(refl.trajectory)
    out["loss_db"] = refl.loss
    return out


def dump_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False))
