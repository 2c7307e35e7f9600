"""Over-the-air verification twin: the chamber checks run end to end."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import scenarios
from .analysis import extract_pathloss, heatmap_export
from .channel import MAX_SAFE_TX_INPUT_DBM, build_rays, fspl
from .codebook import Beam, build_codebook, nearest_beam
from .geo import los_direction
from .sounder import Sounder, peak_power, simulate_run
from .waveform import ZcConfig, circular_xcorr, generate_zc

FSPL_REFERENCE_TOL = 0.2
CLOSED_FORM_TOL = 0.01
LINK_BUDGET_TOL = 0.01


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def check_zc(config: ZcConfig | None = None) -> Check:
    config = config or ZcConfig()
    x = generate_zc(config).samples
    c = np.abs(circular_xcorr(x, x)[0])
    n = config.n_zc
    off_peak = float(c[1:].max()) if n > 1 else 0.0
    unit = float(np.max(np.abs(np.abs(x) - 1.0)))
    ok = abs(c[0] - n) < 1e-9 * n and off_peak < 1e-6 * n and unit < 1e-12
    return Check("zc_autocorrelation", ok,
                 f"N={n} u={config.u}: peak={c[0]:.6f}, max off-peak={off_peak:.3e}, max |1-|x||={unit:.1e}")


def check_link_budget(tx_type: int = 3, rx_type: int = 2, tx_power: float = MAX_SAFE_TX_INPUT_DBM) -> Check:
    """Noiseless dwell on a receive beam pointed exactly at the transmitter."""
    sc = replace(scenarios.anechoic(tx_type=tx_type, rx_type=rx_type, noise_figure=None), tx_power_in=tx_power)
    sounder = Sounder(sc, build_codebook(beam_type=rx_type))
    rays = build_rays(sc, 0.0)
    beam = Beam(*rays[0].aoa, sc.rx_beam_type)
    power, _ = peak_power(sounder.measure(rays, beam), sc.measurement_floor)
    expected = sc.tx_power_in + sc.tx_beam_type.boresight_gain + sc.rx_beam_type.boresight_gain \
        - fspl(sc.carrier_freq, scenarios.ANECHOIC_SEPARATION)
    err = power - expected
    return Check(f"link_budget_tx{tx_type}_rx{rx_type}", abs(err) <= LINK_BUDGET_TOL,
                 f"rx_power={power:.4f} dBm, budget={expected:.4f} dBm, error={err:+.2e} dB")


def run_verification(seed: int = 0) -> list[Check]:
    checks = [check_zc(), check_link_budget()]

    sc = scenarios.anechoic(seed=seed)
    codebook = build_codebook()
    capture = simulate_run(sc, codebook)
    sweep = capture.records[: len(codebook)]

    closed_form = fspl(sc.carrier_freq, scenarios.ANECHOIC_SEPARATION)
    samples = extract_pathloss(sweep, sc, codebook, capture.rx_gps, capture.tx_gps,
                               sweep_ns=capture.sweep_ns, deembed="pattern")
    measured = next(s.pathloss for s in samples if s.category == "best")
    ok = abs(measured - scenarios.ANECHOIC_REFERENCE_PATHLOSS) <= FSPL_REFERENCE_TOL \
        and abs(measured - closed_form) <= CLOSED_FORM_TOL
    checks.append(Check(
        "ota_pathloss", ok,
        f"measured {measured:.3f} dB vs reference {scenarios.ANECHOIC_REFERENCE_PATHLOSS} dB "
        f"(tol {FSPL_REFERENCE_TOL}) and closed form {closed_form:.3f} dB (tol {CLOSED_FORM_TOL})",
    ))

    stamps = sorted({r.timestamp_ns for r in sweep})
    spacing = set(np.diff(stamps).tolist())
    total = stamps[-1] - stamps[0] + capture.dwell_ns
    ok = len(sweep) == 200 and spacing == {125_000} and total == 6_250_000
    checks.append(Check("scan_timing", ok,
                        f"{len(sweep)} records, dwell spacing {sorted(spacing)} ns, scan {total / 1e6:.3f} ms"))

    heatmap = heatmap_export(sweep, codebook)
    hottest = max(heatmap, key=lambda r: r["rx_power_dbm"])["beam_index"]
    rx_pos = sc.rx_trajectory.position(0.0)
    tx_pos = sc.tx_trajectory.position(0.0)
    target = nearest_beam(codebook, los_direction(rx_pos, sc.rx_trajectory.heading(0.0), tx_pos)).index
    checks.append(Check("heatmap_hotspot", hottest == target,
                        f"strongest beam {hottest}, beam nearest the transmitter {target}"))
    return checks
