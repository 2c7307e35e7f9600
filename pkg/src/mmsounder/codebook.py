"""Receive beam codebook: hexagonal tessellation, sector assignment, patterns.

Angles are degrees. Azimuth is measured clockwise from the receiver's
forward axis (sector 0 boresight) and lies in ``[-180, 180)``; elevation is
positive above the horizon. The four arrays face 0, 90, 180 and 270 degrees
and sweep their sectors in parallel, one slot per dwell, so beam ``index``
is ``4 * slot + sector``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidCellCountError, UnbalancedAssignmentError, ValidationError

N_SECTORS = 4
SECTOR_WIDTH = 90.0
SIDELOBE_FLOOR_DB = 30.0
CSV_HEADER = ["index", "sector", "azimuth_deg", "elevation_deg", "beam_type"]

# ``rel_azimuth`` values are rounded to this many decimals so that the four
# sectors hold bit-identical relative directions
_REL_DECIMALS = 9


@dataclass(frozen=True)
class BeamType:
    """One selectable beam width of a phased-array module."""

    id: int
    beamwidth_3db: float
    boresight_gain: float
    side: str

    def __post_init__(self):
        if not self.beamwidth_3db > 0:
            raise ValidationError("beamwidth_3db must be positive")
        if self.side not in ("tx", "rx"):
            raise ValidationError(f"side must be 'tx' or 'rx', got {self.side!r}")


# 256-element transmit module
TX_BEAM_TYPES = {
    1: BeamType(1, 7.0, 59.1, "tx"),
    2: BeamType(2, 25.0, 41.3, "tx"),
    3: BeamType(3, 54.1, 36.8, "tx"),
    4: BeamType(4, 80.0, 33.4, "tx"),
}

# 64-element receive module
RX_BEAM_TYPES = {
    1: BeamType(1, 14.2, 47.0, "rx"),
    2: BeamType(2, 16.8, 43.3, "rx"),
    3: BeamType(3, 18.7, 34.3, "rx"),
    4: BeamType(4, 16.5, 30.3, "rx"),
}


def get_beam_type(side: str, type_id: int) -> BeamType:
    table = {"tx": TX_BEAM_TYPES, "rx": RX_BEAM_TYPES}.get(side)
    if table is None:
        raise ValidationError(f"side must be 'tx' or 'rx', got {side!r}")
    try:
        return table[int(type_id)]
    except (KeyError, ValueError):
        raise ValidationError(f"unknown {side} beam type {type_id!r}; expected 1-4") from None


@dataclass(frozen=True)
class Beam:
    azimuth: float
    elevation: float
    beam_type: BeamType
    sector: int = 0
    index: int = 0

    @property
    def direction(self) -> tuple[float, float]:
        return (self.azimuth, self.elevation)

    @property
    def rel_azimuth(self) -> float:
        """Azimuth relative to the owning sector's boresight."""
        return round(wrap_azimuth(self.azimuth - SECTOR_WIDTH * self.sector), _REL_DECIMALS)


def wrap_azimuth(az):
    """Wrap degrees into ``[-180, 180)``."""
    wrapped = np.mod(np.asarray(az, dtype=float) + 180.0, 360.0) - 180.0
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


def unit_vectors(azimuth, elevation) -> np.ndarray:
    """(east, north, up) unit vectors for clockwise-from-north azimuths."""
    az = np.radians(np.asarray(azimuth, dtype=float))
    el = np.radians(np.asarray(elevation, dtype=float))
    cos_el = np.cos(el)
    return np.stack([cos_el * np.sin(az), cos_el * np.cos(az), np.sin(el)], axis=-1)


def great_circle_angle(az1, el1, az2, el2):
    """Angle in degrees between two directions (broadcasts)."""
    if all(isinstance(v, (int, float)) for v in (az1, el1, az2, el2)):
        return _angle_scalar(az1, el1, az2, el2)
    v1 = unit_vectors(az1, el1)
    v2 = unit_vectors(az2, el2)
    cross = np.linalg.norm(np.cross(v1, v2), axis=-1)
    dot = np.sum(v1 * v2, axis=-1)
    angle = np.degrees(np.arctan2(cross, dot))
    return float(angle) if np.ndim(angle) == 0 else angle


def _angle_scalar(az1, el1, az2, el2) -> float:
    a1, e1, a2, e2 = map(math.radians, (az1, el1, az2, el2))
    v1 = (math.cos(e1) * math.sin(a1), math.cos(e1) * math.cos(a1), math.sin(e1))
    v2 = (math.cos(e2) * math.sin(a2), math.cos(e2) * math.cos(a2), math.sin(e2))
    cx = v1[1] * v2[2] - v1[2] * v2[1]
    cy = v1[2] * v2[0] - v1[0] * v2[2]
    cz = v1[0] * v2[1] - v1[1] * v2[0]
    dot = v1[0] * v2[0] + v1[1] * v2[1] + v1[2] * v2[2]
    return math.degrees(math.atan2(math.sqrt(cx * cx + cy * cy + cz * cz), dot))


def lattice_rows(elevation_span: float, cells: int) -> int:
    """Number of elevation rows for a uniform staggered lattice.

    Candidates are row counts ``R`` dividing ``cells`` with ``cells / R``
    divisible by four (sector symmetry). The one whose row spacing to
    azimuth pitch ratio is closest to that of regular hexagons wins, with
    odd ``R`` (a row on the horizon) preferred on ties.
    """
    target = math.sqrt(3.0) / 2.0
    best = None
    for rows in range(1, cells + 1):
        if cells % rows or (cells // rows) % N_SECTORS:
            continue
        pitch = 360.0 / (cells // rows)
        spacing = elevation_span / rows
        score = abs(math.log(spacing / pitch / target))
        key = (round(score, 12), rows % 2 == 0, rows)
        if best is None or key < best[0]:
            best = (key, rows)
    if best is None:
        raise InvalidCellCountError(f"no lattice with {cells} cells is sector-symmetric")
    return best[1]


def _row_phases(per_row: int, rows: int) -> tuple[float, float]:
    """Azimuth phase of even and odd rows (relative to sector 0 boresight).

    Alternate rows are offset by half a pitch. The phase is picked so that no
    cell center lands on a sector boundary, which would make assignment
    ambiguous: 0 (or half a pitch) for a single row, a quarter pitch when
    rows alternate.
    """
    pitch = 360.0 / per_row
    half_sector = SECTOR_WIDTH / 2.0

    def clear(phase):
        offset = (half_sector - phase) / pitch
        return not math.isclose(offset, round(offset), abs_tol=1e-9)

    if rows == 1:
        base = 0.0 if clear(0.0) else pitch / 2.0
        return base, base
    base = pitch / 4.0
    return base, base + pitch / 2.0


def tessellate_segment(elevation_span: float = 60.0, cells: int = 200, rows: int | None = None):
    """Hexagonal cell centers covering a full-azimuth spherical segment.

    Parameters
    ----------
    elevation_span : float
        Total elevation extent in degrees, centered on the horizon.
    cells : int
        Number of cells; must be divisible by 4.
    rows : int, optional
        Number of elevation rows. Chosen by :func:`lattice_rows` if omitted.

    Returns
    -------
    list of (azimuth, elevation)
        Ordered by row (bottom to top), then by azimuth.
    """
    if int(cells) != cells or cells <= 0 or cells % N_SECTORS:
        raise InvalidCellCountError(f"cells must be a positive multiple of 4, got {cells!r}")
    if not 0.0 < elevation_span <= 90.0:
        raise ValidationError(f"elevation_span must lie in (0, 90], got {elevation_span!r}")
    cells = int(cells)
    if rows is None:
        rows = lattice_rows(elevation_span, cells)
    if cells % rows or (cells // rows) % N_SECTORS:
        raise InvalidCellCountError(f"{rows} rows cannot hold {cells} cells symmetrically")

    per_row = cells // rows
    per_sector = per_row // N_SECTORS
    pitch = 360.0 / per_row
    spacing = elevation_span / rows
    phases = _row_phases(per_row, rows)
    centre = rows // 2

    directions = []
    for i in range(rows):
        elevation = round(-elevation_span / 2.0 + (i + 0.5) * spacing, _REL_DECIMALS) + 0.0
        phase = phases[(i - centre) % 2]
        rel = [
            round((phase + j * pitch + SECTOR_WIDTH / 2.0) % SECTOR_WIDTH - SECTOR_WIDTH / 2.0, _REL_DECIMALS)
            for j in range(per_sector)
        ]
        row = [
            (wrap_azimuth(SECTOR_WIDTH * k + r), elevation)
            for k in range(N_SECTORS)
            for r in rel
        ]
        directions.extend(sorted(row))
    return directions


def sector_of(azimuth: float) -> int:
    """Sector whose boresight is within 45 degrees; ties go to the lower index."""
    distances = [abs(wrap_azimuth(azimuth - SECTOR_WIDTH * k)) for k in range(N_SECTORS)]
    best = min(distances)
    return next(k for k, d in enumerate(distances) if math.isclose(d, best, abs_tol=1e-9))


@dataclass(frozen=True)
class Codebook:
    """Immutable ordered list of receive beams."""

    beams: tuple
    segment_elevation_span: float
    cells_total: int

    def __post_init__(self):
        object.__setattr__(self, "beams", tuple(self.beams))
        if len(self.beams) != self.cells_total:
            raise ValidationError("cells_total does not match the number of beams")
        if [b.index for b in self.beams] != list(range(self.cells_total)):
            raise ValidationError("beam indices must be 0..cells_total-1 in order")

    def __len__(self):
        return len(self.beams)

    def __getitem__(self, i):
        return self.beams[i]

    def __iter__(self):
        return iter(self.beams)

    @property
    def azimuths(self) -> np.ndarray:
        return np.array([b.azimuth for b in self.beams])

    @property
    def elevations(self) -> np.ndarray:
        return np.array([b.elevation for b in self.beams])

    @property
    def sectors(self) -> np.ndarray:
        return np.array([b.sector for b in self.beams])

    @property
    def beams_per_sector(self) -> int:
        return self.cells_total // N_SECTORS

    @property
    def n_slots(self) -> int:
        """Dwells needed for one full sweep with the four arrays in parallel."""
        return self.beams_per_sector

    def slot_of(self, index: int) -> int:
        return index // N_SECTORS

    def sector_counts(self) -> list[int]:
        return np.bincount(self.sectors, minlength=N_SECTORS).tolist()

    def elevation_rows(self) -> np.ndarray:
        """Distinct elevation-row values, ascending."""
        return np.unique(np.round(self.elevations, 6))

    def cell_radius(self) -> float:
        """Circumradius of a lattice cell in (azimuth, elevation) degrees."""
        rows = self.elevation_rows()
        per_row = self.cells_total // rows.size
        pitch = 360.0 / per_row
        if rows.size == 1:
            return math.hypot(pitch / 2.0, self.segment_elevation_span / 2.0)
        spacing = float(np.mean(np.diff(rows)))
        return (pitch**2 / 4.0 + spacing**2) / max(pitch, 2.0 * spacing)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for b in self.beams:
                writer.writerow(
                    [b.index, b.sector, f"{b.azimuth:.6f}", f"{b.elevation:.6f}", b.beam_type.id]
                )

    @classmethod
    def from_csv(cls, path, elevation_span: float | None = None) -> Codebook:
        path = Path(path)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CSV_HEADER:
                raise ValidationError(f"{path}: expected header {','.join(CSV_HEADER)}")
            beams = []
            for line, row in enumerate(reader, start=2):
                try:
                    beams.append(
                        Beam(
                            azimuth=float(row["azimuth_deg"]),
                            elevation=float(row["elevation_deg"]),
                            beam_type=get_beam_type("rx", int(row["beam_type"])),
                            sector=int(row["sector"]),
                            index=int(row["index"]),
                        )
                    )
                except (TypeError, ValueError) as exc:
                    raise ValidationError(f"{path}:{line}: {exc}") from None
        beams.sort(key=lambda b: b.index)
        if elevation_span is None:
            rows = np.unique([b.elevation for b in beams])
            elevation_span = 60.0 if rows.size < 2 else float(rows.size * np.mean(np.diff(rows)))
        return cls(tuple(beams), elevation_span, len(beams))


def assign_sectors(directions, beam_type: BeamType | None = None, elevation_span: float | None = None) -> Codebook:
    """Assign each direction to an array sector and build the codebook.

    Within a sector, beams are ordered by elevation then relative azimuth;
    that order is the sweep slot. Raises
    :class:`~mmsounder.errors.UnbalancedAssignmentError` unless every sector
    receives the same number of directions.
    """
    if beam_type is None:
        beam_type = RX_BEAM_TYPES[2]
    if beam_type.side != "rx":
        raise ValidationError("codebook beams must use a receive beam type")
    directions = [(float(az), float(el)) for az, el in directions]
    if not directions:
        raise ValidationError("no directions to assign")
    if len(set(directions)) != len(directions):
        raise ValidationError("duplicate beam directions")

    by_sector = {k: [] for k in range(N_SECTORS)}
    for az, el in directions:
        k = sector_of(az)
        rel = round(wrap_azimuth(az - SECTOR_WIDTH * k), _REL_DECIMALS)
        by_sector[k].append((el, rel, az))
    counts = [len(v) for v in by_sector.values()]
    if len(set(counts)) != 1:
        raise UnbalancedAssignmentError(f"sector counts {counts} are not equal")

    beams = []
    ordered = {k: sorted(v) for k, v in by_sector.items()}
    for slot in range(counts[0]):
        for k in range(N_SECTORS):
            el, _, az = ordered[k][slot]
            beams.append(Beam(az, el, beam_type, sector=k, index=len(beams)))
    if elevation_span is None:
        elevation_span = 2.0 * max(abs(el) for _, el in directions) or 60.0
    return Codebook(tuple(beams), float(elevation_span), len(beams))


def build_codebook(elevation_span: float = 60.0, cells: int = 200, beam_type: int = 2, rows: int | None = None) -> Codebook:
    """Tessellate the segment and assign sectors in one call."""
    directions = tessellate_segment(elevation_span, cells, rows)
    return assign_sectors(directions, get_beam_type("rx", beam_type), elevation_span)


def pattern_gain(beam_type: BeamType, offset):
    """Gain in dB at great-circle ``offset`` degrees from the beam center."""
    if isinstance(offset, float):
        loss = min(12.0 * (offset / beam_type.beamwidth_3db) ** 2, SIDELOBE_FLOOR_DB)
        return beam_type.boresight_gain - loss
    offset = np.asarray(offset, dtype=float)
    loss = np.minimum(12.0 * (offset / beam_type.beamwidth_3db) ** 2, SIDELOBE_FLOOR_DB)
    gain = beam_type.boresight_gain - loss
    return float(gain) if gain.ndim == 0 else gain


def beam_gain(beam: Beam, direction) -> float:
    """Gain of ``beam`` (dB) toward ``direction = (azimuth, elevation)``."""
    psi = great_circle_angle(beam.azimuth, beam.elevation, direction[0], direction[1])
    return pattern_gain(beam.beam_type, psi)


def codebook_gains(codebook: Codebook, direction) -> np.ndarray:
    """Gain of every codebook beam toward one direction."""
    psi = great_circle_angle(codebook.azimuths, codebook.elevations, direction[0], direction[1])
    return np.array([pattern_gain(b.beam_type, p) for b, p in zip(codebook.beams, psi)])


def nearest_beam(codebook: Codebook, direction) -> Beam:
    """Beam whose center is closest to ``direction``; ties go to the lowest index."""
    psi = great_circle_angle(codebook.azimuths, codebook.elevations, direction[0], direction[1])
    candidates = np.flatnonzero(psi <= psi.min() + 1e-9)
    return codebook.beams[int(candidates[0])]
