"""Circle-segment bed geometry of a partially filled rotating cylinder."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class KilnDimensions:
    length: float = 50.0  # m
    radius: float = 2.0  # m
    inclination: float = 0.02  # rad
    n_segments: int = 10

    def validate(self) -> list[str]:
        errors = []
        if not self.length > 0:
            errors.append("kiln.length_m must be positive")
        if not self.radius > 0:
            errors.append("kiln.radius_m must be positive")
        if not 0 <= self.inclination < np.pi / 2:
            errors.append("kiln.inclination_rad must lie in [0, pi/2)")
        if int(self.n_segments) != self.n_segments or self.n_segments < 2:
            errors.append("kiln.n_segments must be an integer >= 2")
        return errors

    @property
    def dz(self) -> float:
        return self.length / self.n_segments

    @property
    def cross_section(self) -> float:
        return np.pi * self.radius**2

    @property
    def segment_volume(self) -> float:
        return self.cross_section * self.dz

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_segments) + 0.5) * self.dz

    @property
    def faces(self) -> np.ndarray:
        return np.arange(self.n_segments + 1) * self.dz


def segment_area(theta, r):
    theta = np.asarray(theta, dtype=float)
    return 0.5 * r * r * (theta - np.sin(theta))


def fill_angle_from_area(A_s, r, tol: float = 1e-12):
    """Invert A = r^2/2 (theta - sin theta) for theta in [0, 2 pi].

    Safeguarded Newton on the bracket [0, 2 pi]; a bisection step is taken
    whenever the Newton update leaves the current bracket.
    """
    A_s = np.asarray(A_s, dtype=float)
    full = np.pi * r * r
    if np.any(A_s < -1e-9 * full) or np.any(A_s > full * (1 + 1e-12)):
        raise ValueError("bed cross-section outside [0, pi r^2]")
    a = np.clip(2.0 * A_s / (r * r), 0.0, TWO_PI)
    # beyond half full solve for the empty sector: (2pi - t) - sin(2pi - t) = 2pi - a
    upper = a > np.pi
    a = np.where(upper, TWO_PI - a, a)
    lo = np.zeros_like(a)
    hi = np.full_like(a, TWO_PI)
    # small-angle series theta - sin theta ~ theta^3/6
    th = np.minimum(np.cbrt(6.0 * a), TWO_PI)
    for _ in range(100):
        res = th - np.sin(th) - a
        done = np.abs(res) <= tol
        if np.all(done):
            break
        lo = np.where(res < 0, th, lo)
        hi = np.where(res > 0, th, hi)
        d = 1.0 - np.cos(th)
        step = np.where(d > 0, res / np.where(d > 0, d, 1.0), np.inf)
        new = th - step
        bad = ~np.isfinite(new) | (new <= lo) | (new >= hi)
        th = np.where(done, th, np.where(bad, 0.5 * (lo + hi), new))
    th = np.where(a <= 0, 0.0, th)
    return np.where(upper, TWO_PI - th, th)


def chord_height_slope(theta, r, dz):
    """Chord length, bed height and bed slope angle phi = atan(-dh/dz).

    ``theta`` has the segment axis last; the slope uses central differences
    with one-sided differences at the two ends.
    """
    theta = np.asarray(theta, dtype=float)
    L_c = 2.0 * r * np.sin(0.5 * theta)
    h = r * (1.0 - np.cos(0.5 * theta))
    if theta.shape[-1] >= 2:
        dh = np.gradient(h, dz, axis=-1)
    else:
        dh = np.zeros_like(h)
    return L_c, h, np.arctan(-dh)


def surface_areas(theta, r, dz):
    """Midpoint-rule segment areas (A_gs, A_ws, A_gw, A_g)."""
    theta = np.asarray(theta, dtype=float)
    A_gs = 2.0 * r * np.sin(0.5 * theta) * dz
    A_ws = r * theta * dz
    A_gw = TWO_PI * r * dz - A_ws
    A_g = np.pi * r * r - segment_area(theta, r)
    return A_gs, A_ws, A_gw, A_g


def hydraulic_and_effective_diameters(theta, r, dz):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta >= TWO_PI):
        raise ValueError("full kiln has no gas channel")
    A_gs, _, A_gw, A_g = surface_areas(theta, r, dz)
    D_H = 4.0 * A_g * dz / (A_gw + A_gs)
    num = np.pi - 0.5 * theta + 0.5 * np.sin(theta)
    den = np.pi - 0.5 * theta + np.sin(0.5 * theta)
    D_e = 2.0 * r * num / den
    return D_H, D_e


def fill_fraction(theta):
    theta = np.asarray(theta, dtype=float)
    return (theta - np.sin(theta)) / TWO_PI


def interface_cross_sections(V_s, dz, inlet_area: float | None = None, scheme: str = "integral"):
    """Bed cross-sections at the n + 1 segment faces.

    ``integral`` marches V_k = (A_{k-1/2} + A_{k+1/2}) dz / 2 from the solid
    inlet face. Its area is ``inlet_area`` when given, otherwise it is
    extrapolated as (3 V_1 - V_2) / (2 dz), which is exact for linear beds.
    ``difference`` is the literal (V_{k+1} - V_k) / dz rule for interior
    faces with 2 V / dz - A extrapolation at the two ends.
    Negative values are clamped to zero and logged.
    """
    V = np.asarray(V_s, dtype=float)
    n = V.shape[-1]
    A = np.zeros(V.shape[:-1] + (n + 1,))
    if scheme == "integral":
        if inlet_area is None:
            A[..., 0] = (3.0 * V[..., 0] - V[..., 1]) / (2.0 * dz)
        else:
            A[..., 0] = inlet_area
        for k in range(n):
            A[..., k + 1] = 2.0 * V[..., k] / dz - A[..., k]
    elif scheme == "difference":
        A[..., 1:n] = (V[..., 1:] - V[..., :-1]) / dz
        A[..., 0] = 2.0 * V[..., 0] / dz - A[..., 1]
        A[..., n] = 2.0 * V[..., -1] / dz - A[..., n - 1]
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if np.any(A < 0):
        log.debug("clamped %d negative interface areas", int(np.sum(A < 0)))
        A = np.maximum(A, 0.0)
    return A


@dataclass
class GeometryProfile:
    theta: np.ndarray
    A_s: np.ndarray
    A_g: np.ndarray
    h: np.ndarray
    L_c: np.ndarray
    phi: np.ndarray
    A_gs: np.ndarray
    A_ws: np.ndarray
    A_gw: np.ndarray
    D_H: np.ndarray
    D_e: np.ndarray
    eta: np.ndarray


def geometry_profile(theta, dims: KilnDimensions) -> GeometryProfile:
    """All per-segment geometric quantities for fill angles ``theta``."""
    r, dz = dims.radius, dims.dz
    theta = np.asarray(theta, dtype=float)
    L_c, h, phi = chord_height_slope(theta, r, dz)
    A_gs, A_ws, A_gw, A_g = surface_areas(theta, r, dz)
    D_H, D_e = hydraulic_and_effective_diameters(theta, r, dz)
    return GeometryProfile(
        theta=theta, A_s=segment_area(theta, r), A_g=A_g, h=h, L_c=L_c, phi=phi,
        A_gs=A_gs, A_ws=A_ws, A_gw=A_gw, D_H=D_H, D_e=D_e, eta=fill_fraction(theta),
    )
