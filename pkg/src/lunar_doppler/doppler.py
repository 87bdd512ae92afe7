"""
Doppler shift of inter-satellite and satellite-to-ground links.

Shifts are expressed in parts per million of the carrier so they do not
depend on the carrier frequency. Positive ppm means the two ends are
approaching, negative means they are receding.

Two link models are available:

``signed-speed`` (default)
    magnitude is the relative speed |v_b - v_a|, sign taken from the range
    rate. This is the convention that reproduces the published ground
    station extremes (about +/-5.45 ppm at 100 km altitude).
``range-rate``
    the line-of-sight component d|r_b - r_a|/dt only.

For co-altitude circular orbits sharing a node line (the default
constellation) the relative velocity is parallel to the line of sight and
both models coincide.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import MOON_RADIUS, PPM, SPEED_OF_LIGHT
from .io import atomic_write_text
from .orbit import Ephemeris, StateVector

DOPPLER_MODELS = ("signed-speed", "range-rate")
DEFAULT_MODEL = "signed-speed"

# Separations below this are treated as a coincident pair (undefined line of sight).
COINCIDENT_KM = 1e-9


@dataclass(frozen=True)
class GroundStation:
    latitude: float
    longitude: float
    radius: float = MOON_RADIUS
    label: str = "GS"

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude < 360.0:
            raise ValueError(f"longitude {self.longitude} outside [-180, 360)")
        if not self.radius > 0:
            raise ValueError("ground station radius must be positive")


@dataclass
class DopplerSeries:
    link_id: str
    t: np.ndarray
    ppm: np.ndarray
    visible: np.ndarray = field(default=None)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.ppm = np.asarray(self.ppm, dtype=float)
        if self.visible is None:
            self.visible = np.ones(self.t.shape, dtype=bool)
        self.visible = np.asarray(self.visible, dtype=bool)
        if not (self.t.shape == self.ppm.shape == self.visible.shape) or self.t.ndim != 1:
            raise ValueError("t, ppm and visible must be 1-D arrays of equal length")
        if self.t.size > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("sample times must be strictly increasing")
        if not np.all(np.isfinite(self.ppm[self.visible])):
            raise ValueError("ppm must be finite at every visible sample")

    def __len__(self) -> int:
        return self.t.size

    def visible_ppm(self) -> np.ndarray:
        return self.ppm[self.visible]

    def hz(self, carrier_frequency: float) -> np.ndarray:
        return doppler_hz(self.ppm, carrier_frequency)


def range_rate(a: StateVector, b: StateVector) -> float:
    """d|r_b - r_a|/dt in km/s; positive when separating."""
    if a.t != b.t:
        raise ValueError(f"states refer to different epochs ({a.t} vs {b.t})")
    dr = np.asarray(b.position, float) - np.asarray(a.position, float)
    dist = float(np.linalg.norm(dr))
    if dist < COINCIDENT_KM:
        raise ValueError("coincident positions: line of sight is undefined")
    dv = np.asarray(b.velocity, float) - np.asarray(a.velocity, float)
    return float(np.dot(dv, dr) / dist)


def relative_speed(a: StateVector, b: StateVector) -> float:
    return float(np.linalg.norm(np.asarray(b.velocity, float) - np.asarray(a.velocity, float)))


def _scalar_or_array(x: np.ndarray):
    return float(x) if x.ndim == 0 else x


def ppm_from_range_rate(rr):
    """Approach (negative range rate) maps to a positive shift."""
    return _scalar_or_array(-np.asarray(rr, dtype=float) / SPEED_OF_LIGHT * PPM)


def doppler_hz(ppm, f_c: float):
    if not f_c > 0:
        raise ValueError("carrier frequency must be positive")
    return _scalar_or_array(np.asarray(ppm, dtype=float) / PPM * f_c)


def _pairwise_range_rate(dr: np.ndarray, dv: np.ndarray) -> np.ndarray:
    dist = np.linalg.norm(dr, axis=-1)
    speed = np.linalg.norm(dv, axis=-1)
    coincident = dist < COINCIDENT_KM
    safe = np.where(coincident, 1.0, dist)
    rr = np.sum(dv * dr, axis=-1) / safe
    # At a coincident sample use the forward limit: the pair separates along dv.
    return np.where(coincident, speed, rr)


def link_ppm(pos_a, vel_a, pos_b, vel_b, model: str = DEFAULT_MODEL) -> np.ndarray:
    """Vectorised ppm shift for matched (N, 3) state arrays."""
    if model not in DOPPLER_MODELS:
        raise ValueError(f"unknown Doppler model {model!r}; expected one of {DOPPLER_MODELS}")
    dr = np.asarray(pos_b, float) - np.asarray(pos_a, float)
    dv = np.asarray(vel_b, float) - np.asarray(vel_a, float)
    rr = _pairwise_range_rate(dr, dv)
    if model == "range-rate":
        return ppm_from_range_rate(rr)
    return np.sign(-rr) * np.linalg.norm(dv, axis=-1) / SPEED_OF_LIGHT * PPM


def gs_state(gs: GroundStation, t: float = 0.0) -> StateVector:
    lat = math.radians(gs.latitude)
    lon = math.radians(gs.longitude)
    pos = gs.radius * np.array([math.cos(lat) * math.cos(lon),
                                math.cos(lat) * math.sin(lon),
                                math.sin(lat)])
    return StateVector(float(t), pos, np.zeros(3))


def elevation_deg(gs: GroundStation, sat_pos) -> np.ndarray | float:
    """Elevation of ``sat_pos`` (shape (3,) or (N, 3)) above the local horizon."""
    sat_pos = np.asarray(sat_pos, dtype=float)
    if np.any(np.linalg.norm(sat_pos, axis=-1) <= gs.radius):
        raise ValueError("satellite position is not above the ground station radius")
    gs_pos = gs_state(gs).position
    up = gs_pos / np.linalg.norm(gs_pos)
    los = sat_pos - gs_pos
    sin_el = np.clip(np.sum(los * up, axis=-1) / np.linalg.norm(los, axis=-1), -1.0, 1.0)
    return _scalar_or_array(np.degrees(np.arcsin(sin_el)))


def _check_same_grid(eph_a: Ephemeris, eph_b: Ephemeris) -> None:
    if eph_a.t.shape != eph_b.t.shape or not np.array_equal(eph_a.t, eph_b.t):
        raise ValueError("ephemerides are sampled on different time grids")


def isl_doppler_series(eph_a: Ephemeris, eph_b: Ephemeris, link_id: str = "ISL",
                       model: str = DEFAULT_MODEL) -> DopplerSeries:
    _check_same_grid(eph_a, eph_b)
    ppm = link_ppm(eph_a.positions, eph_a.velocities, eph_b.positions, eph_b.velocities, model)
    return DopplerSeries(link_id, eph_a.t.copy(), ppm, np.ones(len(eph_a), dtype=bool))


def gs_doppler_series(eph: Ephemeris, gs: GroundStation, min_elevation: float = 0.0,
                      link_id: str = "GS", model: str = DEFAULT_MODEL) -> DopplerSeries:
    station = gs_state(gs)
    n = len(eph)
    gs_pos = np.broadcast_to(station.position, (n, 3))
    gs_vel = np.zeros((n, 3))
    ppm = link_ppm(gs_pos, gs_vel, eph.positions, eph.velocities, model)
    visible = elevation_deg(gs, eph.positions) >= min_elevation
    return DopplerSeries(link_id, eph.t.copy(), ppm, visible)


def visibility_windows(series: DopplerSeries) -> list[tuple[float, float]]:
    """(first, last) sample times of each contiguous run of visible samples."""
    vis = series.visible.astype(np.int8)
    edges = np.diff(np.concatenate([[0], vis, [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    return [(float(series.t[s]), float(series.t[e])) for s, e in zip(starts, stops)]


def write_series_csv(series: DopplerSeries, path) -> None:
    lines = ["t_s,ppm,visible"]
    lines += [f"{t!r},{p!r},{int(v)}" for t, p, v in
              zip(series.t.tolist(), series.ppm.tolist(), series.visible.tolist())]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_series_csv(path, link_id: str | None = None) -> DopplerSeries:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["t_s", "ppm", "visible"]:
            raise ValueError(f"{path}: expected columns t_s,ppm,visible, got {reader.fieldnames}")
        rows = list(reader)
    t = np.array([float(r["t_s"]) for r in rows])
    ppm = np.array([float(r["ppm"]) for r in rows])
    visible = np.array([r["visible"].strip() in ("1", "true", "True") for r in rows])
    return DopplerSeries(link_id or path.stem, t, ppm, visible)
