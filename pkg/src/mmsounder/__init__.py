"""Software twin of a 28 GHz omnidirectional beam-sweeping channel sounder."""

from .analysis import CiFit, CloseInPathLoss, PathLossSample, extract_pathloss, fit_ci
from .channel import Ray, Reflector, Scenario, fspl
from .codebook import Beam, Codebook, build_codebook, nearest_beam
from .geo import GpsFix, Trajectory
from .sounder import RunCapture, SweepRecord, simulate_run
from .waveform import ZcConfig, generate_zc

__version__ = "0.1.0"

__all__ = [
    "Beam", "CiFit", "CloseInPathLoss", "Codebook", "GpsFix", "PathLossSample", "Ray", "Reflector", "RunCapture",
    "Scenario", "SweepRecord", "Trajectory", "ZcConfig", "build_codebook", "extract_pathloss", "fit_ci", "fspl",
    "generate_zc", "nearest_beam", "simulate_run",
]
