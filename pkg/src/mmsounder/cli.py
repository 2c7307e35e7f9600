"""Command-line front end: ``mmsounder [--seed S] [--out DIR] <command> ...``.

Exit codes: 0 success, 1 verification failure, 2 invalid input,
3 runtime failure (trajectory span, GPS, degenerate data).
"""

from __future__ import annotations

import dataclasses
import hashlib
import inspect
import json
import sys
from pathlib import Path

import click

from . import __version__, scenarios
from .analysis import (
    elevation_histogram, extract_pathloss, fit_groups, heatmap_export, write_report,
)
from .codebook import Codebook, build_codebook
from .config import dump_scenario, load_scenario
from .errors import InvalidConfigError, MissingGpsError, RuntimeSounderError, ValidationError
from .geo import local_square_average, read_gps_csv
from .sounder import read_capture_csv, simulate_run, sweep_ns, write_run
from .verify import run_verification

EXIT_VERIFY_FAILED = 1
EXIT_INVALID = 2
EXIT_RUNTIME = 3

MANIFEST_NAME = "manifest.json"
U64 = click.IntRange(0, 2**64 - 1)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, command: str, seed, inputs: dict, scenario_path=None, codebook_path=None) -> None:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "seed": seed,
        "scenario_path": None if scenario_path is None else str(scenario_path),
        "codebook_path": None if codebook_path is None else str(codebook_path),
        "output_dir": str(out),
        "input_sha256": {name: _sha256(Path(p)) for name, p in sorted(inputs.items())},
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _out_dir(ctx, local_out) -> Path:
    out = Path(local_out or ctx.obj["out"] or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
@click.option("--seed", type=U64, default=None, help="Master RNG seed (overrides the scenario's rng_seed).")
@click.option("--out", "out", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.version_option(__version__, prog_name="mmsounder")
@click.pass_context
def cli(ctx, seed, out):
    """Beam-sweeping channel sounder simulation and path loss analysis."""
    ctx.obj = {"seed": seed, "out": out}


@cli.command("codebook")
@click.option("--cells", type=int, default=200, show_default=True, help="Number of beams (multiple of 4).")
@click.option("--elevation-span", type=float, default=60.0, show_default=True, help="Segment height in degrees.")
@click.option("--beam-type", type=click.IntRange(1, 4), default=2, show_default=True, help="Receive beam type.")
@click.option("--rows", type=int, default=None, help="Force the number of elevation rows.")
@click.option("--out", "out", type=click.Path(), default=None,
              help="CSV file, or a directory that receives codebook.csv.")
@click.pass_context
def codebook_cmd(ctx, cells, elevation_span, beam_type, rows, out):
    """Tessellate the segment and write the beam codebook."""
    cb = build_codebook(elevation_span, cells, beam_type, rows)
    target = Path(out or ctx.obj["out"] or ".")
    if target.suffix.lower() != ".csv":
        target.mkdir(parents=True, exist_ok=True)
        target = target / "codebook.csv"
    else:
        target.parent.mkdir(parents=True, exist_ok=True)
    cb.to_csv(target)
    counts = cb.sector_counts()
    click.echo(f"wrote {len(cb)} beams to {target}")
    for sector, count in enumerate(counts):
        click.echo(f"sector {sector}: {count} beams")


def _resolve_scenario(name: str, seed, duration):
    if name in scenarios.BUILTIN:
        factory = scenarios.BUILTIN[name]
        kwargs = {} if seed is None else {"seed": seed}
        # built-ins that take a duration scale their geometry to it
        if duration is not None and "duration" in inspect.signature(factory).parameters:
            kwargs["duration"], duration = duration, None
        sc = factory(**kwargs)
        path = None
    else:
        path = Path(name)
        if not path.is_file():
            raise InvalidConfigError(
                f"{name}: no such scenario file (built-ins: {', '.join(sorted(scenarios.BUILTIN))})"
            )
        sc = load_scenario(path, seed)
    if duration is not None:
        sc = dataclasses.replace(sc, duration=duration)
    return sc, path


@cli.command("simulate")
@click.argument("scenario")
@click.option("--codebook", "codebook_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Codebook CSV (default: 200 cells over 60 degrees with the scenario's receive beam type).")
@click.option("--duration", type=click.FloatRange(min=0, min_open=True), default=None,
              help="Override the scenario duration in seconds.")
@click.option("--pdp", is_flag=True, help="Also write the float32 PDP sidecar.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--out", "out", type=click.Path(file_okay=False), default=None)
@click.pass_context
def simulate_cmd(ctx, scenario, codebook_path, duration, pdp, workers, out):
    """Simulate a run from SCENARIO (YAML file or built-in name)."""
    sc, scenario_path = _resolve_scenario(scenario, ctx.obj["seed"], duration)
    cb = Codebook.from_csv(codebook_path) if codebook_path else build_codebook(beam_type=sc.rx_beam_type.id)
    capture = simulate_run(sc, cb, workers=workers, keep_pdp=pdp)

    out_dir = _out_dir(ctx, out)
    write_run(out_dir, capture, pdp=pdp)
    dump_scenario(sc, out_dir / "scenario.yaml")
    cb.to_csv(out_dir / "codebook.csv")
    inputs = {}
    if scenario_path is not None:
        inputs["scenario"] = scenario_path
    if codebook_path is not None:
        inputs["codebook"] = codebook_path
    _write_manifest(out_dir, "simulate", sc.rng_seed, inputs, scenario_path or f"builtin:{scenario}",
                    codebook_path)
    click.echo(f"{capture.n_sweeps} sweeps, {len(capture.records)} records -> {out_dir}")


@cli.command("analyze")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--square", type=click.FloatRange(min=0, min_open=True), default=4.0, show_default=True,
              help="Local-square side in meters.")
@click.option("--deembed", type=click.Choice(["boresight", "pattern"]), default="boresight", show_default=True)
@click.option("--heatmap-sweep", "heatmap_sweeps", type=int, multiple=True, default=(0,), show_default=True,
              help="Sweep index to export as a heatmap (repeatable).")
@click.option("--out", "out", type=click.Path(file_okay=False), default=None,
              help="Report directory (default: RUN_DIR/report).")
@click.pass_context
def analyze_cmd(ctx, run_dir, square, deembed, heatmap_sweeps, out):
    """Extract path loss from a simulated run, fit the close-in model, write a report."""
    run = Path(run_dir)
    scenario_path, codebook_path, capture_path = run / "scenario.yaml", run / "codebook.csv", run / "capture.csv"
    for p in (scenario_path, codebook_path, capture_path):
        if not p.is_file():
            raise InvalidConfigError(f"{run}: missing {p.name}")
    sc = load_scenario(scenario_path)
    cb = Codebook.from_csv(codebook_path)
    records = read_capture_csv(capture_path)
    gps_paths = {"gps_rx": run / "gps_rx.csv", "gps_tx": run / "gps_tx.csv"}
    if not gps_paths["gps_rx"].is_file():
        raise MissingGpsError(f"{run}: missing gps_rx.csv")
    rx_gps = read_gps_csv(gps_paths["gps_rx"])
    tx_gps = read_gps_csv(gps_paths["gps_tx"]) if gps_paths["gps_tx"].is_file() else None

    raw = extract_pathloss(records, sc, cb, rx_gps, tx_gps, sweep_ns=sweep_ns(sc, cb), deembed=deembed)
    averaged = local_square_average(raw, square)
    fits, failures = fit_groups(averaged, sc.carrier_freq)
    hist = elevation_histogram(raw, cb)

    by_sweep = {}
    for r in records:
        by_sweep.setdefault(r.sweep_index, []).append(r)
    heatmaps = {k: heatmap_export(by_sweep[k], cb) for k in heatmap_sweeps if k in by_sweep}
    notes = [
        f"{len(raw)} raw samples, {len(averaged)} after {square:g} m local-square averaging",
        f"de-embedding: {deembed}",
    ]
    notes += [f"heatmap sweep {k}: not in capture" for k in heatmap_sweeps if k not in by_sweep]

    out_dir = Path(out) if out else (Path(ctx.obj["out"]) if ctx.obj["out"] else run / "report")
    write_report(out_dir, averaged, fits, failures, hist, heatmaps, notes)
    inputs = {"capture": capture_path, "codebook": codebook_path, "scenario": scenario_path}
    inputs.update({k: p for k, p in gps_paths.items() if p.is_file()})
    _write_manifest(out_dir, "analyze", sc.rng_seed, inputs, scenario_path, codebook_path)
    for (category, los), fit in fits.items():
        click.echo(f"{category:9s} {'LOS' if los else 'NLOS':4s} n={fit.n:.3f} sigma={fit.sigma:.2f} dB "
                   f"({fit.sample_count} samples)")
    for (category, los), reason in failures.items():
        click.echo(f"{category:9s} {'LOS' if los else 'NLOS':4s} fit skipped: {reason}")
    click.echo(f"report -> {out_dir}")


@cli.command("verify")
@click.option("--out", "out", type=click.Path(file_okay=False), default=None,
              help="Also write verify.txt into this directory.")
@click.pass_context
def verify_cmd(ctx, out):
    """Run the anechoic-chamber verification checks."""
    seed = ctx.obj["seed"] or 0
    checks = run_verification(seed)
    lines = [c.line() for c in checks]
    for line in lines:
        click.echo(line)
    target = out or ctx.obj["out"]
    if target:
        out_dir = _out_dir(ctx, target)
        (out_dir / "verify.txt").write_text("".join(f"{line}\n" for line in lines))
    failed = sum(not c.passed for c in checks)
    click.echo(f"{len(checks) - failed}/{len(checks)} checks passed")
    if failed:
        ctx.exit(EXIT_VERIFY_FAILED)


def main(argv=None) -> int:
    """Console entry point; maps library errors onto exit codes."""
    try:
        code = cli.main(args=argv, prog_name="mmsounder", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INVALID
    except RuntimeSounderError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_RUNTIME
    return code if isinstance(code, int) else 0


if __name__ == "__main__":
    sys.exit(main())
