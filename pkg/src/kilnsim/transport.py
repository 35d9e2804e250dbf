"""Flux and exchange laws together with the mixture property rules they need."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .thermo import GASES, SpeciesSet, default_species

SIGMA = 5.670374419e-8  # W/(m2 K4)
ATM = 101325.0
BAR = 1.0e5
T_MIN_PROPS = 300.0  # K


# -- velocities ---------------------------------------------------------------

def repose_angle(omega, a_omega: float = 0.0, b_omega: float = 0.30909):
    xi = a_omega * np.asarray(omega, dtype=float) + b_omega
    if np.any(xi <= 0) or np.any(xi >= np.pi / 2):
        raise ValueError("repose angle outside (0, pi/2)")
    return xi


def solid_velocity(omega, psi, phi, L_c, r, xi):
    """Saeman bed velocity in m/s.

    ``omega`` is in rad/s and enters as revolutions per second. The chord
    ratio pi L_c / asin(L_c / 2r) takes its limit 2 pi r for an empty bed.
    """
    if np.any(np.asarray(xi) <= 0):
        raise ValueError("repose angle must be positive")
    L_c = np.asarray(L_c, dtype=float)
    s = np.clip(L_c / (2.0 * r), 0.0, 1.0)
    asn = np.arcsin(s)
    small = asn < 1e-8
    ratio = np.where(small, 2.0 * np.pi * r, np.pi * L_c / np.where(small, 1.0, asn))
    rev = np.asarray(omega, dtype=float) / (2.0 * np.pi)
    return rev * (psi + phi * np.cos(xi)) / np.sin(xi) * ratio


def gas_velocity(dP, dz, D_H, mu, rho, laminar: bool = True):
    """Darcy-Weisbach gas speed with the Blasius friction factor.

    The sign function is smoothed as tanh(30 x). With ``laminar`` the speed is
    capped by the Hagen-Poiseuille value, i.e. the larger friction factor wins.
    """
    grad = np.asarray(dP, dtype=float) / dz
    g = np.abs(grad)
    v = (2.0 / 0.316 * (D_H**5 / (mu * rho**3)) ** 0.25 * g) ** (4.0 / 7.0)
    if laminar:
        v = np.minimum(v, g * D_H * D_H / (32.0 * mu))
    return v * np.tanh(30.0 * grad)


# -- gas mixture properties -----------------------------------------------------

def sutherland_constant(anchors):
    (t0, q0), (t1, q1) = anchors
    a = (t1 / t0) ** 1.5
    q = q1 / q0
    return (a * t0 - q * t1) / (q - a)


def sutherland(T, anchors):
    """Sutherland-form law through two (T, value) anchors."""
    (t0, q0), _ = anchors
    S = sutherland_constant(anchors)
    T = np.asarray(T, dtype=float)
    return q0 * (T / t0) ** 1.5 * (t0 + S) / (T + S)


@dataclass(frozen=True)
class _GasTables:
    include: np.ndarray  # indices of gases with property data
    M: np.ndarray  # kg/mol, included gases
    mu_ref: np.ndarray
    mu_T0: np.ndarray
    mu_S: np.ndarray
    k_ref: np.ndarray
    k_T0: np.ndarray
    k_S: np.ndarray
    fuller: np.ndarray  # T-independent factor of D_ij, all gases
    m_ratio: np.ndarray  # (M_j / M_i)^(1/4)
    phi_den: np.ndarray


@lru_cache(maxsize=8)
def _gas_tables(db: SpeciesSet) -> _GasTables:
    inc = [i for i, g in enumerate(db.gases) if g.viscosity_anchors is not None]
    gases = [db.gases[i] for i in inc]
    M = np.array([g.molar_mass for g in gases])

    def fit(attr):
        anchors = [getattr(g, attr) for g in gases]
        return (np.array([a[0][1] for a in anchors]), np.array([a[0][0] for a in anchors]),
                np.array([sutherland_constant(a) for a in anchors]))

    mu_ref, mu_T0, mu_S = fit("viscosity_anchors")
    k_ref, k_T0, k_S = fit("conductivity")
    Mg = np.array([g.molar_mass for g in db.gases]) * 1e3  # g/mol
    Mij = 2.0 / (1.0 / Mg[:, None] + 1.0 / Mg[None, :])
    vol = db.diffusion_volume ** (1.0 / 3.0)
    fuller = 0.00143 / (np.sqrt(Mij) * (vol[:, None] + vol[None, :]) ** 2) * 1e-4  # m2/s
    return _GasTables(
        include=np.array(inc), M=M, mu_ref=mu_ref, mu_T0=mu_T0, mu_S=mu_S,
        k_ref=k_ref, k_T0=k_T0, k_S=k_S, fuller=fuller,
        m_ratio=(M[None, :] / M[:, None]) ** 0.25,
        phi_den=np.sqrt(8.0 * (1.0 + M[:, None] / M[None, :])),
    )


def sutherland_viscosity(species: str, T, db: SpeciesSet | None = None):
    db = default_species() if db is None else db
    anchors = db[species].viscosity_anchors
    if anchors is None:
        raise ValueError(f"{species} has no viscosity data and is excluded from mixture rules")
    return sutherland(T, anchors)


def gas_conductivity(species: str, T, db: SpeciesSet | None = None):
    db = default_species() if db is None else db
    anchors = db[species].conductivity
    if anchors is None:
        raise ValueError(f"{species} has no conductivity data and is excluded from mixture rules")
    return sutherland(T, anchors)


def wilke_phi(mu, M):
    """phi_ij for species viscosities ``mu`` (last axis) and molar masses ``M``."""
    ratio = np.sqrt(mu[..., :, None] / mu[..., None, :])
    m4 = (M[None, :] / M[:, None]) ** 0.25
    return (1.0 + ratio * m4) ** 2 / np.sqrt(8.0 * (1.0 + M[:, None] / M[None, :]))


def mixture_viscosity_conductivity(T, C_g, db: SpeciesSet | None = None):
    """Wilke viscosity and Wassiljewa conductivity (same phi_ij) of the gas.

    ``C_g`` holds all gas concentrations (or mole fractions); species without
    property data are dropped and the rest renormalised.
    """
    db = default_species() if db is None else db
    tb = _gas_tables(db)
    # anchors sit at 300 K; keep trial states of a Newton solve inside the fit's pole-free range
    T = np.maximum(np.asarray(T, dtype=float), T_MIN_PROPS)[..., None]
    c = np.asarray(C_g, dtype=float)[..., tb.include]
    tot = np.sum(c, axis=-1, keepdims=True)
    x = c / np.where(tot > 0, tot, 1.0)
    mu_i = tb.mu_ref * (T / tb.mu_T0) ** 1.5 * (tb.mu_T0 + tb.mu_S) / (T + tb.mu_S)
    k_i = tb.k_ref * (T / tb.k_T0) ** 1.5 * (tb.k_T0 + tb.k_S) / (T + tb.k_S)
    ratio = np.sqrt(mu_i[..., :, None] / mu_i[..., None, :])
    phi = (1.0 + ratio * tb.m_ratio) ** 2 / tb.phi_den
    den = np.einsum("...ij,...j->...i", phi, x)
    w = x / den
    return np.sum(w * mu_i, axis=-1), np.sum(w * k_i, axis=-1)


def fuller_binary(T, P, db: SpeciesSet | None = None):
    """Binary diffusion coefficients D_ij in m2/s, shape ``T.shape + (8, 8)``."""
    db = default_species() if db is None else db
    tb = _gas_tables(db)
    T = np.asarray(T, dtype=float)[..., None, None]
    P_bar = np.asarray(P, dtype=float)[..., None, None] / BAR
    return tb.fuller * T**1.75 / P_bar


def gas_diffusion_coefficients(T, P, C_g, db: SpeciesSet | None = None, return_pure: bool = False):
    """Mixture-averaged diffusivity of each gas species in m2/s.

    Blanc's rule normalised by the counter-species fraction,
    D_i = (1 - x_i) / sum_{j != i} x_j / D_ij, so a binary mixture gives D_12.
    A species with no counter-species gets 0 and is flagged.
    """
    C_g = np.asarray(C_g, dtype=float)
    c = np.sum(C_g, axis=-1, keepdims=True)
    if np.any(c <= 0):
        raise ValueError("gas diffusion needs a non-empty gas phase")
    x = C_g / c
    Dij = fuller_binary(T, P, db)
    n = len(GASES)
    off = ~np.eye(n, dtype=bool)
    s = np.sum(np.where(off, x[..., None, :] / Dij, 0.0), axis=-1)
    pure = s <= 0
    D = np.where(pure, 0.0, (1.0 - x) / np.where(pure, 1.0, s))
    return (D, pure) if return_pure else D


def solid_conductivity(C_s, density_tuning: float = 1.0, db: SpeciesSet | None = None):
    """Volume-fraction weighted harmonic mean of the solid conductivities."""
    db = default_species() if db is None else db
    v = np.asarray(C_s, dtype=float) * (db.molar_mass[: db.n_solids] / (db.density * density_tuning))
    tot = np.sum(v, axis=-1)
    inv = np.sum(v / db.solid_conductivity, axis=-1)
    return np.where(tot > 0, tot / np.where(inv > 0, inv, 1.0), 0.0)


# -- fluxes ------------------------------------------------------------------------

def species_fluxes(C, v_face, dz, D_face=None, inflow_left=None, inflow_right=None):
    """Upwind advective plus central Fickian fluxes at the n + 1 faces.

    ``C`` has shape (..., n, s) and ``v_face`` (..., n + 1). A boundary face
    with a prescribed inflow uses it verbatim; otherwise it passes outflow
    from the adjacent segment and blocks inflow.
    """
    C = np.asarray(C, dtype=float)
    v = np.asarray(v_face, dtype=float)[..., None]
    n = C.shape[-2]
    N = np.zeros(C.shape[:-2] + (n + 1, C.shape[-1]))
    vi = v[..., 1:n, :]
    N[..., 1:n, :] = np.where(vi > 0, vi * C[..., :-1, :], vi * C[..., 1:, :])
    if D_face is not None:
        N[..., 1:n, :] -= D_face[..., 1:n, :] * (C[..., 1:, :] - C[..., :-1, :]) / dz
    if inflow_left is None:
        N[..., 0, :] = np.minimum(v[..., 0, :], 0.0) * C[..., 0, :]
    else:
        N[..., 0, :] = inflow_left
    if inflow_right is None:
        N[..., n, :] = np.maximum(v[..., n, :], 0.0) * C[..., -1, :]
    else:
        N[..., n, :] = inflow_right
    return N


def conduction_fluxes(T, k, dz, T_left=None, T_right=None):
    """Fourier fluxes at faces with harmonic-mean face conductivity.

    A ghost temperature at an end sits half a segment outside the adjacent
    centre; an end without one is adiabatic.
    """
    T = np.asarray(T, dtype=float)
    k = np.asarray(k, dtype=float)
    n = T.shape[-1]
    Q = np.zeros(T.shape[:-1] + (n + 1,))
    ks = k[..., :-1] + k[..., 1:]
    kh = np.where(ks > 0, 2.0 * k[..., :-1] * k[..., 1:] / np.where(ks > 0, ks, 1.0), 0.0)
    Q[..., 1:n] = -kh * (T[..., 1:] - T[..., :-1]) / dz
    if T_left is not None:
        Q[..., 0] = -k[..., 0] * (T[..., 0] - T_left) / (0.5 * dz)
    if T_right is not None:
        Q[..., n] = -k[..., -1] * (T_right - T[..., -1]) / (0.5 * dz)
    return Q


# -- convection ----------------------------------------------------------------------

def convection_heat(T_s, T_g, T_w, A_gs, A_gw, A_ws, beta_gs, beta_gw, beta_ws):
    """Signed convective flows (gas->solid, gas->wall, wall->solid) in W."""
    return (A_gs * beta_gs * (T_g - T_s), A_gw * beta_gw * (T_g - T_w), A_ws * beta_ws * (T_w - T_s))


def tscheng_coefficients(theta, eta, D_e, r, omega, v_g, rho_g, mu_g, k_g, k_s, alpha_B):
    """Tscheng heat transfer coefficients (beta_gs, beta_gw, beta_ws) in W/(m2 K).

    ``omega`` is in rad/s. The bed terms vanish for an empty bed.
    """
    Re_D = rho_g * np.abs(v_g) * D_e / mu_g
    Re_w = rho_g * omega * D_e * D_e / mu_g
    bed = theta > 0
    eta_safe = np.where(bed, eta, 1.0)
    beta_gs = np.where(bed, k_g / D_e * 0.46 * Re_D**0.535 * Re_w**0.104 * eta_safe**-0.341, 0.0)
    beta_gw = k_g / D_e * 1.54 * Re_D**0.575 * Re_w**-0.292
    th = np.where(bed, theta, 1.0)
    aB = np.where(bed & (alpha_B > 0), alpha_B, 1.0)
    beta_ws = np.where(bed & (alpha_B > 0),
                       11.6 * k_s / (r * th) * (omega * r * r * th / aB) ** 0.3, 0.0)
    return beta_gs, beta_gw, beta_ws


# -- radiation -------------------------------------------------------------------------

@dataclass(frozen=True)
class WSGGTable:
    t_ref: float
    K1: np.ndarray
    K2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    C3: np.ndarray
    ratio_range: tuple[float, float]
    pressure_unit: float  # Pa per unit of the table's pressure


@lru_cache(maxsize=None)
def default_wsgg() -> WSGGTable:
    data = json.loads(resources.files("kilnsim").joinpath("data/wsgg.json").read_text())
    unit = {"atm": ATM, "bar": BAR}[data["pressure_unit"]]
    return WSGGTable(
        t_ref=float(data["t_ref"]), K1=np.array(data["K1"]), K2=np.array(data["K2"]),
        C1=np.array(data["C1"]), C2=np.array(data["C2"]), C3=np.array(data["C3"]),
        ratio_range=tuple(data["ratio_range"]), pressure_unit=unit,
    )


def wsgg_weights(T, ratio, table: WSGGTable | None = None):
    """Grey-gas weights a_1..a_4 and absorption coefficients k_1..k_4."""
    tb = default_wsgg() if table is None else table
    mr = np.asarray(ratio, dtype=float)[..., None, None]
    c = tb.C1 + tb.C2 * mr + tb.C3 * mr * mr  # (..., 4, 3)
    tau = np.asarray(T, dtype=float)[..., None, None] / tb.t_ref
    a = np.sum(c * tau ** np.arange(3), axis=-1)
    k = tb.K1 + tb.K2 * np.asarray(ratio, dtype=float)[..., None]
    return a, k


def gas_emissivity(T, P, x_H2O, x_CO2, S_m, table: WSGGTable | None = None):
    """WSGG total emissivity; the H2O/CO2 ratio is clamped to the fit range."""
    tb = default_wsgg() if table is None else table
    x_H2O = np.asarray(x_H2O, dtype=float)
    x_CO2 = np.asarray(x_CO2, dtype=float)
    lo, hi = tb.ratio_range
    ratio = np.clip(x_H2O / np.where(x_CO2 > 0, x_CO2, 1.0), lo, hi)
    ratio = np.where(x_CO2 > 0, ratio, hi)
    a, k = wsgg_weights(T, ratio, tb)
    pl = (np.asarray(P, dtype=float) / tb.pressure_unit * (x_H2O + x_CO2) * S_m)[..., None]
    return np.sum(a * (1.0 - np.exp(-k * pl)), axis=-1)


def mean_beam_length(r, h):
    return 0.95 * (2.0 * r - h)


def gas_absorptivity(T_s, T_g, P, x_H2O, x_CO2, S_m, table: WSGGTable | None = None):
    """alpha_g = eps_g(T_s) P_m S_m sqrt(T_s / T_g), P_m in bar, capped at 1."""
    eps_s = gas_emissivity(T_s, P, x_H2O, x_CO2, S_m, table)
    P_m = np.asarray(P, dtype=float) / BAR * (x_H2O + x_CO2)
    return np.clip(eps_s * P_m * S_m * np.sqrt(T_s / T_g), 0.0, 1.0)


def view_factor(L_c, r, psi):
    return L_c / (2.0 * (np.pi - psi) * r)


def radiation_heat(T_s, T_g, T_w, A_gs, A_gw, A_ws, eps_g, alpha_g, Omega,
                   eps_w: float = 0.85, eps_s: float = 0.9):
    """Signed radiative flows (gas->solid, gas->wall, wall->solid) in W."""
    Q_gs = SIGMA * A_gs * (1.0 + eps_s) * 0.5 * (eps_g * T_g**4 - alpha_g * T_s**4)
    Q_gw = SIGMA * A_gw * (1.0 + eps_w) * 0.5 * (eps_g * T_g**4 - alpha_g * T_w**4)
    Q_ws = SIGMA * A_ws * eps_w * eps_s * Omega * (T_w**4 - T_s**4)
    return Q_gs, Q_gw, Q_ws


def thermal_diffusivity(k_s, V_s, Cp_s):
    """Bed diffusivity k_s / (rho c_p) with the heat capacity over the bed's own volume."""
    ok = Cp_s > 0
    return np.where(ok, k_s * V_s / np.where(ok, Cp_s, 1.0), 0.0)
