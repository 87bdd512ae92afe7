"""
Two-body Keplerian propagation around the Moon.

Elements are converted to Cartesian states in a single non-rotating
Moon-centred inertial frame. Propagation is analytic: the mean anomaly is
advanced linearly and Kepler's equation is solved by Newton iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import GM_MOON, MOON_RADIUS

KEPLER_TOL = 1e-12
KEPLER_MAX_ITER = 50


class KeplerConvergenceError(RuntimeError):
    """Newton iteration on Kepler's equation did not converge."""


@dataclass(frozen=True)
class OrbitalElements:
    """Classical element set. Lengths in km, angles in degrees."""

    semi_major_axis: float
    eccentricity: float = 0.0
    inclination: float = 0.0
    raan: float = 0.0
    arg_perigee: float = 0.0
    true_anomaly: float = 0.0

    def __post_init__(self):
        validate_elements(self)

    def with_changes(self, **kwargs) -> "OrbitalElements":
        fields = {name: getattr(self, name) for name in self.__dataclass_fields__}
        fields.update(kwargs)
        return OrbitalElements(**fields)


def validate_elements(el: OrbitalElements, body_radius: float = MOON_RADIUS) -> None:
    values = (el.semi_major_axis, el.eccentricity, el.inclination,
              el.raan, el.arg_perigee, el.true_anomaly)
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"orbital elements must be finite: {el}")
    if not 0.0 <= el.eccentricity < 1.0:
        raise ValueError(
            f"eccentricity {el.eccentricity} outside [0, 1); only closed orbits are supported"
        )
    if el.semi_major_axis <= body_radius:
        raise ValueError(
            f"semi-major axis {el.semi_major_axis} km does not clear body radius {body_radius} km"
        )
    if not 0.0 <= el.inclination <= 180.0:
        raise ValueError(f"inclination {el.inclination} deg outside [0, 180]")


@dataclass(frozen=True)
class StateVector:
    """Inertial position (km) and velocity (km/s) at ``t`` seconds past epoch."""

    t: float
    position: np.ndarray
    velocity: np.ndarray

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.position))

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))


@dataclass(frozen=True)
class Ephemeris:
    """Uniformly sampled trajectory stored as stacked arrays.

    ``positions`` and ``velocities`` have shape (N, 3); ``t`` has shape (N,).
    """

    sample_interval: float
    t: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        if self.t.ndim != 1 or self.t.size == 0:
            raise ValueError("ephemeris must contain at least one sample")
        if self.positions.shape != (self.t.size, 3) or self.velocities.shape != (self.t.size, 3):
            raise ValueError("positions/velocities must have shape (N, 3)")

    def __len__(self) -> int:
        return self.t.size

    def __getitem__(self, i: int) -> StateVector:
        return StateVector(float(self.t[i]), self.positions[i].copy(), self.velocities[i].copy())

    @property
    def states(self) -> list[StateVector]:
        return [self[i] for i in range(len(self))]


def orbital_period(a: float, gm: float = GM_MOON) -> float:
    return 2.0 * math.pi * math.sqrt(a**3 / gm)


def _perifocal_to_inertial(el: OrbitalElements) -> np.ndarray:
    O = math.radians(el.raan)
    w = math.radians(el.arg_perigee)
    i = math.radians(el.inclination)
    cO, sO = math.cos(O), math.sin(O)
    cw, sw = math.cos(w), math.sin(w)
    ci, si = math.cos(i), math.sin(i)
    return np.array([
        [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
        [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
        [sw * si, cw * si, ci],
    ])


def true_to_eccentric(nu: float, e: float) -> float:
    return 2.0 * math.atan2(math.sqrt(1.0 - e) * math.sin(nu / 2.0),
                            math.sqrt(1.0 + e) * math.cos(nu / 2.0))


def solve_kepler(M, e: float, tol: float = KEPLER_TOL, max_iter: int = KEPLER_MAX_ITER):
    """Solve ``M = E - e sin E`` for E by Newton's method, starting at E = M.

    Works element-wise on arrays. Raises KeplerConvergenceError if any element
    still moves by more than ``tol`` after ``max_iter`` updates.
    """
    M = np.asarray(M, dtype=float)
    E = M.copy()
    if e == 0.0:
        return E
    for _ in range(max_iter):
        dE = (E - e * np.sin(E) - M) / (1.0 - e * np.cos(E))
        E = E - dE
        if np.all(np.abs(dE) < tol):
            return E
    raise KeplerConvergenceError(
        f"Kepler solver did not converge in {max_iter} iterations (e={e})"
    )


def _states_at(el: OrbitalElements, gm: float, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    validate_elements(el)
    if gm <= 0:
        raise ValueError("gm must be positive")
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("propagation times must be finite")

    a, e = el.semi_major_axis, el.eccentricity
    n = math.sqrt(gm / a**3)
    E0 = true_to_eccentric(math.radians(el.true_anomaly), e)
    M0 = E0 - e * math.sin(E0)
    M = np.mod(M0 + n * t, 2.0 * math.pi)
    E = solve_kepler(M, e)
    nu = 2.0 * np.arctan2(np.sqrt(1.0 + e) * np.sin(E / 2.0),
                          np.sqrt(1.0 - e) * np.cos(E / 2.0))

    p = a * (1.0 - e**2)
    r = p / (1.0 + e * np.cos(nu))
    h_factor = math.sqrt(gm / p)
    zeros = np.zeros_like(nu)
    pos_pqw = np.stack([r * np.cos(nu), r * np.sin(nu), zeros], axis=-1)
    vel_pqw = np.stack([-h_factor * np.sin(nu), h_factor * (e + np.cos(nu)), zeros], axis=-1)

    rot = _perifocal_to_inertial(el)
    return pos_pqw @ rot.T, vel_pqw @ rot.T


def elements_to_state(el: OrbitalElements, gm: float = GM_MOON) -> StateVector:
    """State at epoch (t = 0) for the given elements."""
    return propagate(el, gm, 0.0)


def propagate(el: OrbitalElements, gm: float = GM_MOON, t: float = 0.0) -> StateVector:
    """Two-body state ``t`` seconds after epoch."""
    pos, vel = _states_at(el, gm, np.array([t], dtype=float))
    return StateVector(float(t), pos[0], vel[0])


def make_ephemeris(el: OrbitalElements, gm: float = GM_MOON,
                   duration: float = 86400.0, dt: float = 10.0) -> Ephemeris:
    """Sample the orbit at t = 0, dt, 2 dt, ... up to ``duration`` inclusive."""
    if not (duration > 0 and dt > 0):
        raise ValueError("duration and dt must be positive")
    if dt > duration:
        raise ValueError("dt must not exceed duration")
    count = int(math.floor(duration / dt + 1e-9)) + 1
    t = np.arange(count, dtype=float) * dt
    pos, vel = _states_at(el, gm, t)
    return Ephemeris(float(dt), t, pos, vel)


def specific_energy(position, velocity, gm: float = GM_MOON):
    """v^2/2 - gm/r, element-wise over the leading axes."""
    position = np.asarray(position)
    velocity = np.asarray(velocity)
    return 0.5 * np.sum(velocity**2, axis=-1) - gm / np.linalg.norm(position, axis=-1)
