"""
Simulation scenarios: constellation, ground stations, sampling and fit settings.

Scenarios are stored as YAML. Every key is optional; anything left out takes
the value of :func:`default_scenario` (21 satellites at 100 km altitude,
inclinations 80..100 deg, one station at the lunar south pole, one day at
10 s sampling, 20 GHz carrier). See ``scenarios/default.yaml`` for the full
schema written out.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import yaml

from .constants import GM_MOON, MOON_RADIUS
from .doppler import DEFAULT_MODEL, DOPPLER_MODELS, DopplerSeries, GroundStation, \
    gs_doppler_series, isl_doppler_series
from .gmm import EmConfig
from .metrics import DEFAULT_BINS
from .orbit import Ephemeris, OrbitalElements, make_ephemeris

LLO_SEMI_MAJOR_AXIS = 1837.4
TOPOLOGIES = ("star", "all-pairs")

_ELEMENT_DEFAULTS = {
    "semi_major_axis": LLO_SEMI_MAJOR_AXIS,
    "eccentricity": 0.0,
    "raan": 90.0,
    "arg_perigee": 0.0,
    "true_anomaly": 0.0,
}


class ScenarioError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class Satellite:
    label: str
    elements: OrbitalElements


@dataclass(frozen=True)
class Scenario:
    satellites: tuple[Satellite, ...]
    ground_stations: tuple[GroundStation, ...]
    duration: float = 86400.0
    dt: float = 10.0
    carrier_frequency: float = 20e9
    reference_satellite: str = "LLO-1"
    gm: float = GM_MOON
    min_elevation: float = 0.0
    doppler_model: str = DEFAULT_MODEL
    isl_topology: str = "star"
    gmm_k: int = 5
    fit: EmConfig = field(default_factory=EmConfig)
    bins: int = DEFAULT_BINS

    def __post_init__(self):
        labels = [s.label for s in self.satellites]
        dupes = sorted({x for x in labels if labels.count(x) > 1})
        if dupes:
            raise ScenarioError("satellites", f"duplicate labels {dupes}")
        gs_labels = [g.label for g in self.ground_stations]
        if len(set(gs_labels)) != len(gs_labels):
            raise ScenarioError("ground_stations", "duplicate labels")
        if self.reference_satellite not in labels:
            raise ScenarioError("reference_satellite",
                                f"{self.reference_satellite!r} is not a satellite label")
        for name in ("duration", "dt", "carrier_frequency", "gm"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ScenarioError(name, f"must be positive, got {value}")
        if self.dt > self.duration:
            raise ScenarioError("dt", "must not exceed duration")
        if self.doppler_model not in DOPPLER_MODELS:
            raise ScenarioError("doppler_model", f"must be one of {DOPPLER_MODELS}")
        if self.isl_topology not in TOPOLOGIES:
            raise ScenarioError("isl_topology", f"must be one of {TOPOLOGIES}")
        if self.gmm_k < 1:
            raise ScenarioError("gmm.k", "must be >= 1")
        if self.bins < 1:
            raise ScenarioError("metrics.bins", "must be >= 1")

    def satellite(self, label: str) -> Satellite:
        for s in self.satellites:
            if s.label == label:
                return s
        raise KeyError(label)


def default_scenario() -> Scenario:
    satellites = tuple(
        Satellite(f"LLO-{n}", OrbitalElements(inclination=80.0 + (n - 1), **_ELEMENT_DEFAULTS))
        for n in range(1, 22)
    )
    station = GroundStation(latitude=-90.0, longitude=0.0, radius=MOON_RADIUS, label="LSP")
    return Scenario(satellites, (station,))


# -- parsing -----------------------------------------------------------------

def _number(value, path: str, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    if integer:
        if float(value) != int(value):
            raise ScenarioError(path, f"expected an integer, got {value!r}")
        return int(value)
    if not math.isfinite(value):
        raise ScenarioError(path, "must be finite")
    return float(value)


def _mapping(value, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ScenarioError(path, f"expected a mapping, got {type(value).__name__}")
    return value


def _reject_unknown(d: dict, allowed, path: str) -> None:
    extra = sorted(set(d) - set(allowed))
    if extra:
        prefix = f"{path}." if path else ""
        raise ScenarioError(f"{prefix}{extra[0]}", "unknown field")


def _parse_satellite(d, path: str) -> Satellite:
    d = _mapping(d, path)
    _reject_unknown(d, ["label", "inclination", *_ELEMENT_DEFAULTS], path)
    if "label" not in d or not isinstance(d["label"], str) or not d["label"]:
        raise ScenarioError(f"{path}.label", "a non-empty string label is required")
    if "inclination" not in d:
        raise ScenarioError(f"{path}.inclination", "required")
    values = {k: _number(d.get(k, v), f"{path}.{k}") for k, v in _ELEMENT_DEFAULTS.items()}
    values["inclination"] = _number(d["inclination"], f"{path}.inclination")
    try:
        elements = OrbitalElements(**values)
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from None
    return Satellite(d["label"], elements)


def _parse_station(d, path: str) -> GroundStation:
    d = _mapping(d, path)
    _reject_unknown(d, ["label", "latitude", "longitude", "radius"], path)
    for key in ("label", "latitude", "longitude"):
        if key not in d:
            raise ScenarioError(f"{path}.{key}", "required")
    try:
        return GroundStation(
            latitude=_number(d["latitude"], f"{path}.latitude"),
            longitude=_number(d["longitude"], f"{path}.longitude"),
            radius=_number(d.get("radius", MOON_RADIUS), f"{path}.radius"),
            label=str(d["label"]),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from None


_TOP_LEVEL = ("satellites", "ground_stations", "duration", "dt", "carrier_frequency",
              "reference_satellite", "gm", "min_elevation", "doppler_model",
              "isl_topology", "gmm", "metrics")


def scenario_from_dict(doc: dict | None) -> Scenario:
    doc = _mapping(doc, "<root>")
    _reject_unknown(doc, _TOP_LEVEL, "")
    base = default_scenario()
    kw: dict[str, Any] = {}

    if "satellites" in doc:
        sats = doc["satellites"]
        if not isinstance(sats, list) or not sats:
            raise ScenarioError("satellites", "expected a non-empty list")
        kw["satellites"] = tuple(_parse_satellite(s, f"satellites[{i}]") for i, s in enumerate(sats))
    if "ground_stations" in doc:
        gss = doc["ground_stations"] or []
        if not isinstance(gss, list):
            raise ScenarioError("ground_stations", "expected a list")
        kw["ground_stations"] = tuple(_parse_station(g, f"ground_stations[{i}]")
                                      for i, g in enumerate(gss))
    for key in ("duration", "dt", "carrier_frequency", "gm", "min_elevation"):
        if key in doc:
            kw[key] = _number(doc[key], key)
    for key in ("reference_satellite", "doppler_model", "isl_topology"):
        if key in doc:
            if not isinstance(doc[key], str):
                raise ScenarioError(key, "expected a string")
            kw[key] = doc[key]

    gmm = _mapping(doc.get("gmm"), "gmm")
    _reject_unknown(gmm, ["k", "max_iter", "tol", "seed", "restarts"], "gmm")
    if "k" in gmm:
        kw["gmm_k"] = _number(gmm["k"], "gmm.k", integer=True)
    fit_kw = {}
    for key in ("max_iter", "seed", "restarts"):
        if key in gmm:
            fit_kw[key] = _number(gmm[key], f"gmm.{key}", integer=True)
    if "tol" in gmm:
        fit_kw["tol"] = _number(gmm["tol"], "gmm.tol")
    if fit_kw:
        try:
            kw["fit"] = replace(base.fit, **fit_kw)
        except ValueError as exc:
            raise ScenarioError("gmm", str(exc)) from None

    metrics = _mapping(doc.get("metrics"), "metrics")
    _reject_unknown(metrics, ["bins"], "metrics")
    if "bins" in metrics:
        kw["bins"] = _number(metrics["bins"], "metrics.bins", integer=True)

    if "satellites" in kw and "reference_satellite" not in kw:
        kw["reference_satellite"] = kw["satellites"][0].label
    return replace(base, **kw)


def load_scenario(text: str) -> Scenario:
    """Parse a YAML scenario document; an empty document yields the default."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError("<document>", f"invalid YAML: {exc}") from None
    return scenario_from_dict(doc)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "duration": s.duration,
        "dt": s.dt,
        "carrier_frequency": s.carrier_frequency,
        "gm": s.gm,
        "reference_satellite": s.reference_satellite,
        "isl_topology": s.isl_topology,
        "doppler_model": s.doppler_model,
        "min_elevation": s.min_elevation,
        "satellites": [
            {"label": sat.label,
             "semi_major_axis": sat.elements.semi_major_axis,
             "eccentricity": sat.elements.eccentricity,
             "inclination": sat.elements.inclination,
             "raan": sat.elements.raan,
             "arg_perigee": sat.elements.arg_perigee,
             "true_anomaly": sat.elements.true_anomaly}
            for sat in s.satellites
        ],
        "ground_stations": [
            {"label": g.label, "latitude": g.latitude, "longitude": g.longitude, "radius": g.radius}
            for g in s.ground_stations
        ],
        "gmm": {"k": s.gmm_k, "max_iter": s.fit.max_iter, "tol": s.fit.tol,
                "seed": s.fit.seed, "restarts": s.fit.restarts},
        "metrics": {"bins": s.bins},
    }


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False)


def scenario_hash(s: Scenario) -> str:
    return hashlib.sha256(dump_scenario(s).encode()).hexdigest()


# -- links -------------------------------------------------------------------

@dataclass(frozen=True)
class Link:
    link_id: str
    kind: str  # "isl" or "gs"
    a: str
    b: str


def build_links(s: Scenario) -> tuple[list[Link], list[Link]]:
    """ISL pairs (star around the reference, or all pairs) and satellite x station pairs."""
    labels = [sat.label for sat in s.satellites]
    if s.isl_topology == "star":
        pairs = [(s.reference_satellite, other) for other in labels if other != s.reference_satellite]
    else:
        pairs = [(a, b) for i, a in enumerate(labels) for b in labels[i + 1:]]
    isl = [Link(f"{a}_{b}", "isl", a, b) for a, b in pairs]
    gs = [Link(f"{sat}_{g.label}", "gs", sat, g.label)
          for sat in labels for g in s.ground_stations]
    return isl, gs


def ephemerides(s: Scenario) -> dict[str, Ephemeris]:
    return {sat.label: make_ephemeris(sat.elements, s.gm, s.duration, s.dt) for sat in s.satellites}


def simulate_links(s: Scenario) -> tuple[list[DopplerSeries], list[DopplerSeries]]:
    """Doppler series for every ISL and ground link of the scenario."""
    eph = ephemerides(s)
    stations = {g.label: g for g in s.ground_stations}
    isl_links, gs_links = build_links(s)
    isl = [isl_doppler_series(eph[l.a], eph[l.b], l.link_id, s.doppler_model) for l in isl_links]
    gs = [gs_doppler_series(eph[l.a], stations[l.b], s.min_elevation, l.link_id, s.doppler_model)
          for l in gs_links]
    return isl, gs


def sample_count(s: Scenario) -> int:
    return int(np.floor(s.duration / s.dt + 1e-9)) + 1
