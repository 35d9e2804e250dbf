"""Finite-volume mass and energy balances and the algebraic constraints.

Layout: segments k = 0..n-1 along z, faces 0..n with face 0 at z = 0.
Solids enter at face 0 and leave at face n; gas enters at face n and leaves
at face 0, where the exterior pressure is prescribed.

Per segment the differential state holds [C_s (9), C_g (8), U_s, U_g, U_w]
and the algebraic state [T_s, T_g, T_w, P, theta].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import transport as tr
from .kinetics import ReactionNetwork
from .thermo import R, SpeciesSet, WallMaterial, default_species

N_SOLIDS = 9
N_GASES = 8
NX = N_SOLIDS + N_GASES + 3
NY = 5
IS = slice(0, N_SOLIDS)
IG = slice(N_SOLIDS, N_SOLIDS + N_GASES)
IUS, IUG, IUW = NX - 3, NX - 2, NX - 1
ITS, ITG, ITW, IP, ITH = range(NY)

ENERGY_SCALE = 1.0e6  # J/m3, divides the energy residuals


@dataclass(frozen=True)
class Stream:
    """Inflow stream: mole fractions, concentration (mol/m3) and speed (m/s)."""

    composition: dict
    concentration: float
    velocity: float

    def flux(self, names) -> np.ndarray:
        x = np.array([self.composition.get(n, 0.0) for n in names], dtype=float)
        unknown = set(self.composition) - set(names)
        if unknown:
            raise KeyError(f"unknown species in stream: {sorted(unknown)}")
        tot = x.sum()
        if tot <= 0:
            return np.zeros_like(x)
        return x / tot * self.concentration * self.velocity


@dataclass(frozen=True)
class BoundaryConditions:
    solid_feed: Stream
    solid_temperature: float  # K
    gas_streams: tuple
    gas_temperature: float  # K
    pressure_anchor: float  # Pa, exterior pressure at the gas outlet (z = 0)

    def solid_inflow(self, db: SpeciesSet) -> np.ndarray:
        return self.solid_feed.flux(db.names[: db.n_solids])

    def gas_inflow(self, db: SpeciesSet) -> np.ndarray:
        """Molar flux through face n; negative because gas moves toward z = 0."""
        names = db.names[db.n_solids:]
        return -sum((s.flux(names) for s in self.gas_streams), np.zeros(len(names)))

    def validate(self) -> list[str]:
        errs = []
        streams = [("solid_feed", self.solid_feed)] + [
            (f"gas_streams[{i}]", s) for i, s in enumerate(self.gas_streams)]
        for name, s in streams:
            if s.concentration < 0 or s.velocity < 0:
                errs.append(f"{name}: concentration and velocity must be >= 0")
            if any(v < 0 for v in s.composition.values()):
                errs.append(f"{name}: negative mole fraction")
            if s.composition and abs(sum(s.composition.values()) - 1.0) > 1e-6:
                errs.append(f"{name}: composition must sum to 1")
        if self.solid_temperature <= 0 or self.gas_temperature <= 0:
            errs.append("inlet temperatures must be positive")
        if self.pressure_anchor <= 0:
            errs.append("pressure anchor must be positive")
        return errs


@dataclass(frozen=True)
class ModelParameters:
    dims: geo.KilnDimensions
    bc: BoundaryConditions
    omega: float = 4.0 * 2.0 * np.pi / 60.0  # rad/s
    a_omega: float = 0.0
    b_omega: float = 0.30909
    density_tuning: float = 1.0 / 9.0
    wall: WallMaterial = field(default_factory=WallMaterial)
    eps_wall: float = 0.85
    eps_solid: float = 0.9
    laminar_fallback: bool = True


@dataclass
class KilnState:
    """Snapshot of the per-segment state, arrays of shape (n, ...)."""

    C_s: np.ndarray
    C_g: np.ndarray
    U_s: np.ndarray
    U_g: np.ndarray
    U_w: np.ndarray
    T_s: np.ndarray
    T_g: np.ndarray
    T_w: np.ndarray
    P: np.ndarray
    theta: np.ndarray

    @classmethod
    def from_arrays(cls, x, y) -> "KilnState":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return cls(x[..., IS].copy(), x[..., IG].copy(), x[..., IUS].copy(), x[..., IUG].copy(),
                   x[..., IUW].copy(), y[..., ITS].copy(), y[..., ITG].copy(), y[..., ITW].copy(),
                   y[..., IP].copy(), y[..., ITH].copy())

    def to_arrays(self):
        x = np.concatenate([self.C_s, self.C_g, self.U_s[..., None], self.U_g[..., None],
                            self.U_w[..., None]], axis=-1)
        y = np.stack([self.T_s, self.T_g, self.T_w, self.P, self.theta], axis=-1)
        return x, y


class KilnModel:
    """Right-hand side f(x, y) and algebraic residual g(x, y) of the kiln DAE.

    ``evaluate`` accepts a leading batch axis, so a whole finite-difference
    Jacobian is one call.
    """

    def __init__(self, params: ModelParameters, reactions=None, db: SpeciesSet | None = None):
        self.p = params
        self.db = default_species() if db is None else db
        self.net = ReactionNetwork(reactions, self.db)
        d = params.dims
        self.n = d.n_segments
        self.dz = d.dz
        self.r = d.radius
        self.V = d.segment_volume
        self.A_cross = d.cross_section
        self.V_wall = np.pi * ((d.radius + params.wall.thickness) ** 2 - d.radius**2) * d.dz
        self.xi = tr.repose_angle(params.omega, params.a_omega, params.b_omega)
        ns = self.db.n_solids
        self.M_s = self.db.molar_mass[:ns]
        self.M_g = self.db.molar_mass[ns:]
        self.v_molar = self.M_s / (self.db.density * params.density_tuning)
        self.N_s_in = params.bc.solid_inflow(self.db)
        self.N_g_in = params.bc.gas_inflow(self.db)
        self.h_s_in = self._h("solid", params.bc.solid_temperature)
        self.h_g_in = self._h("gas", params.bc.gas_temperature)
        self.i_CO2 = self.db.index("CO2") - ns
        self.i_H2O = self.db.index("H2O") - ns
        self.i_r1 = [r.id for r in self.net.reactions].index("r1") if any(
            r.id == "r1" for r in self.net.reactions) else None
        self.x_scale, self.y_scale, self.y_offset = self.scales()

    # -- helpers -----------------------------------------------------------------

    def _h(self, phase, T):
        sl = self.db.phase_slice(phase)
        cp = self.db.cp_coeffs[sl]
        hf = self.db.enthalpy_formation[sl]
        T = np.asarray(T, dtype=float)[..., None]
        T0 = 298.15
        return hf + cp[:, 0] * (T - T0) + cp[:, 1] / 2 * (T**2 - T0**2) + cp[:, 2] / 3 * (T**3 - T0**3)

    def _cp(self, phase, T):
        cp = self.db.cp_coeffs[self.db.phase_slice(phase)]
        T = np.asarray(T, dtype=float)[..., None]
        return cp[:, 0] + cp[:, 1] * T + cp[:, 2] * T * T

    def scales(self):
        xs = np.empty(NX)
        xs[: N_SOLIDS + N_GASES] = 1.0e3
        xs[NX - 3:] = 1.0e9
        ys = np.array([1.0e3, 1.0e3, 1.0e3, 1.0, 1.0])
        yo = np.array([0.0, 0.0, 0.0, self.p.bc.pressure_anchor, 0.0])
        return np.tile(xs, (self.n, 1)), np.tile(ys, (self.n, 1)), np.tile(yo, (self.n, 1))

    def solid_volume_fraction(self, C_s):
        return np.asarray(C_s, dtype=float) @ self.v_molar

    def gas_volume_fraction(self, T_g, P, C_g):
        return R * T_g * np.sum(C_g, axis=-1) / P

    def energies(self, T_s, T_g, T_w, C_s, C_g):
        U_s = np.sum(self._h("solid", T_s) * C_s, axis=-1)
        U_g = np.sum(self._h("gas", T_g) * C_g, axis=-1) - R * T_g * np.sum(C_g, axis=-1)
        return U_s, U_g, self.p.wall.energy_density(T_w)

    # -- algebraic state solves --------------------------------------------------------

    def temperatures(self, x, T_guess=None, tol=1e-10, max_iter=50):
        """Invert the energy densities for (T_s, T_g, T_w) by vectorised Newton."""
        x = np.asarray(x, dtype=float)
        C_s, C_g = x[..., IS], x[..., IG]
        out = []
        for k, (phase, C, U) in enumerate((("solid", C_s, x[..., IUS]), ("gas", C_g, x[..., IUG]))):
            T = np.full(U.shape, 1200.0) if T_guess is None else np.array(T_guess[..., k], dtype=float)
            ctot = np.sum(C, axis=-1)
            for _ in range(max_iter):
                h = np.sum(self._h(phase, T) * C, axis=-1)
                cp = np.sum(self._cp(phase, T) * C, axis=-1)
                if phase == "gas":
                    h = h - R * T * ctot
                    cp = cp - R * ctot
                ok = cp > 0
                dT = np.where(ok, (h - U) / np.where(ok, cp, 1.0), 0.0)
                dT = np.clip(dT, -500.0, 500.0)
                T = np.maximum(T - dT, 50.0)
                if np.all(np.abs(dT) <= tol * T):
                    break
            out.append(T)
        out.append(self.p.wall.temperature(x[..., IUW]))
        return out

    def fill_angle(self, C_s):
        A_s = np.clip(self.solid_volume_fraction(np.maximum(C_s, 0.0)), 0.0, 1.0) * self.A_cross
        return geo.fill_angle_from_area(A_s, self.r)

    def polish(self, x, y):
        """Return y with temperatures and fill angles solved exactly for x."""
        y = np.array(y, dtype=float)
        T_s, T_g, T_w = self.temperatures(x, y[..., [ITS, ITG]])
        y[..., ITS], y[..., ITG], y[..., ITW] = T_s, T_g, T_w
        y[..., ITH] = self.fill_angle(np.asarray(x)[..., IS])
        return y

    def consistent_pressure(self, x, y):
        C_s, C_g = x[..., IS], x[..., IG]
        free = 1.0 - self.solid_volume_fraction(C_s)
        return R * y[..., ITG] * np.sum(C_g, axis=-1) / free

    # -- the model ---------------------------------------------------------------------

    def evaluate(self, x, y, details: bool = False):
        """f and g for states x (..., n, 20) and y (..., n, 5).

        g holds per segment: solid, gas and wall energy residuals scaled by
        1e6 J/m3, the volume constraint, and theta - Theta(A_s).
        """
        p, db = self.p, self.db
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        C_s, C_g = x[..., IS], x[..., IG]
        T_s, T_g, T_w, P, theta = (y[..., i] for i in range(NY))
        Cs_p = np.maximum(C_s, 0.0)
        Cg_p = np.maximum(C_g, 0.0)
        dz, r, n = self.dz, self.r, self.n

        Vs = self.solid_volume_fraction(C_s)
        Vg = self.gas_volume_fraction(T_g, P, C_g)

        th = np.clip(theta, 0.0, 2.0 * np.pi - 1e-9)
        L_c, hb, phi = geo.chord_height_slope(th, r, dz)
        A_gs, A_ws, A_gw, A_g = geo.surface_areas(th, r, dz)
        D_H, D_e = geo.hydraulic_and_effective_diameters(th, r, dz)
        eta = geo.fill_fraction(th)

        # gas properties
        ctot = np.sum(Cg_p, axis=-1)
        mu, k_g = tr.mixture_viscosity_conductivity(T_g, Cg_p, db)
        Vg_safe = np.maximum(Vg, 1e-12)
        rho_g = (Cg_p @ self.M_g) / Vg_safe
        D_gas = tr.gas_diffusion_coefficients(T_g, P, np.maximum(Cg_p, 1e-300), db)

        # solid properties
        k_s = tr.solid_conductivity(Cs_p, p.density_tuning, db)
        Cp_s = np.sum(self._cp("solid", T_s) * Cs_p, axis=-1)
        alpha_B = tr.thermal_diffusivity(k_s, np.maximum(Vs, 0.0), Cp_s)

        # solid transport
        v_s = tr.solid_velocity(p.omega, p.dims.inclination, phi, L_c, r, self.xi)
        vs_face = np.zeros(v_s.shape[:-1] + (n + 1,))
        vs_face[..., 1:n] = 0.5 * (v_s[..., :-1] + v_s[..., 1:])
        vs_face[..., n] = v_s[..., -1]
        vs_face[..., 0] = p.bc.solid_feed.velocity
        N_s = tr.species_fluxes(C_s, vs_face, dz, None, inflow_left=self.N_s_in)

        # gas transport: faces driven by pressure differences
        vg_face = np.zeros_like(vs_face)
        dP_int = P[..., :-1] - P[..., 1:]
        vg_face[..., 1:n] = tr.gas_velocity(
            dP_int, dz, 0.5 * (D_H[..., :-1] + D_H[..., 1:]), 0.5 * (mu[..., :-1] + mu[..., 1:]),
            0.5 * (rho_g[..., :-1] + rho_g[..., 1:]), p.laminar_fallback)
        vg_face[..., 0] = tr.gas_velocity(p.bc.pressure_anchor - P[..., 0], 0.5 * dz, D_H[..., 0],
                                          mu[..., 0], rho_g[..., 0], p.laminar_fallback)
        ctot_last = np.maximum(ctot[..., -1], 1e-12)
        vg_face[..., n] = self.N_g_in.sum() / ctot_last
        D_face = np.zeros(D_gas.shape[:-2] + (n + 1, N_GASES))
        D_face[..., 1:n, :] = 0.5 * (D_gas[..., :-1, :] + D_gas[..., 1:, :])
        N_g = tr.species_fluxes(C_g, vg_face, dz, D_face, inflow_right=self.N_g_in)

        # enthalpy fluxes with donor temperatures
        h_s = self._h("solid", T_s)
        h_g = self._h("gas", T_g)
        H_s = np.zeros(vs_face.shape)
        H_g = np.zeros(vs_face.shape)
        up_s = vs_face[..., 1:n] > 0
        hs_face = np.where(up_s[..., None], h_s[..., :-1, :], h_s[..., 1:, :])
        H_s[..., 1:n] = np.sum(hs_face * N_s[..., 1:n, :], axis=-1)
        H_s[..., 0] = self.N_s_in @ self.h_s_in
        H_s[..., n] = np.sum(h_s[..., -1, :] * N_s[..., n, :], axis=-1)
        up_g = vg_face[..., 1:n] > 0
        hg_face = np.where(up_g[..., None], h_g[..., :-1, :], h_g[..., 1:, :])
        H_g[..., 1:n] = np.sum(hg_face * N_g[..., 1:n, :], axis=-1)
        H_g[..., 0] = np.sum(h_g[..., 0, :] * N_g[..., 0, :], axis=-1)
        H_g[..., n] = self.N_g_in @ self.h_g_in

        # conduction
        Q_s = tr.conduction_fluxes(T_s, k_s, dz, T_left=p.bc.solid_temperature)
        Q_g = tr.conduction_fluxes(T_g, k_g, dz, T_right=p.bc.gas_temperature)
        Q_w = tr.conduction_fluxes(T_w, np.full_like(T_w, p.wall.conductivity), dz)

        # convection
        v_center = 0.5 * (np.abs(vg_face[..., :-1]) + np.abs(vg_face[..., 1:]))
        b_gs, b_gw, b_ws = tr.tscheng_coefficients(th, eta, D_e, r, p.omega, v_center,
                                                   rho_g, mu, k_g, k_s, alpha_B)
        Qcv_gs, Qcv_gw, Qcv_ws = tr.convection_heat(T_s, T_g, T_w, A_gs, A_gw, A_ws, b_gs, b_gw, b_ws)

        # radiation
        x_g = Cg_p / np.maximum(ctot, 1e-300)[..., None]
        xH2O, xCO2 = x_g[..., self.i_H2O], x_g[..., self.i_CO2]
        S_m = tr.mean_beam_length(r, hb)
        eps_g = tr.gas_emissivity(T_g, P, xH2O, xCO2, S_m)
        alpha_g = tr.gas_absorptivity(T_s, T_g, P, xH2O, xCO2, S_m)
        Omega = tr.view_factor(L_c, r, p.dims.inclination)
        Qr_gs, Qr_gw, Qr_ws = tr.radiation_heat(T_s, T_g, T_w, A_gs, A_gw, A_ws, eps_g, alpha_g,
                                                Omega, p.eps_wall, p.eps_solid)

        # reactions
        rates = self.net.rates(T_s, T_g, P, Cs_p, Cg_p, clamp=True)
        R_s, R_g = self.net.production(rates)
        if self.i_r1 is not None:
            J_sg = rates[..., self.i_r1] * self._h("gas", T_s)[..., self.i_CO2]
        else:
            J_sg = np.zeros_like(T_s)

        f = np.empty(x.shape)
        f[..., IS] = -(N_s[..., 1:, :] - N_s[..., :-1, :]) / dz + R_s
        f[..., IG] = -(N_g[..., 1:, :] - N_g[..., :-1, :]) / dz + R_g
        div_s = (H_s[..., 1:] - H_s[..., :-1] + Q_s[..., 1:] - Q_s[..., :-1]) / dz
        div_g = (H_g[..., 1:] - H_g[..., :-1] + Q_g[..., 1:] - Q_g[..., :-1]) / dz
        div_w = (Q_w[..., 1:] - Q_w[..., :-1]) / dz
        f[..., IUS] = -div_s + (Qr_gs + Qr_ws + Qcv_gs + Qcv_ws) / self.V - J_sg
        f[..., IUG] = -div_g - (Qr_gs + Qr_gw + Qcv_gs + Qcv_gw) / self.V + J_sg
        f[..., IUW] = -div_w + (Qr_gw - Qr_ws + Qcv_gw - Qcv_ws) / self.V_wall

        U_s, U_g, U_w = self.energies(T_s, T_g, T_w, C_s, C_g)
        g = np.empty(y.shape)
        g[..., ITS] = (x[..., IUS] - U_s) / ENERGY_SCALE
        g[..., ITG] = (x[..., IUG] - U_g) / ENERGY_SCALE
        g[..., ITW] = (x[..., IUW] - U_w) / ENERGY_SCALE
        g[..., IP] = Vs + Vg - 1.0
        g[..., ITH] = theta - self.fill_angle(C_s)
        if not details:
            return f, g
        info = dict(
            v_s=v_s, v_s_face=vs_face, v_g_face=vg_face, N_s=N_s, N_g=N_g, H_s=H_s, H_g=H_g,
            Q_s=Q_s, Q_g=Q_g, Q_w=Q_w, V_s=Vs, V_g=Vg, rates=rates, R_s=R_s, R_g=R_g,
            mu_g=mu, k_g=k_g, k_s=k_s, rho_g=rho_g, D_g=D_gas, D_H=D_H, D_e=D_e, eta=eta,
            L_c=L_c, h=hb, phi=phi, A_gs=A_gs, A_ws=A_ws, A_gw=A_gw, beta_gs=b_gs,
            beta_gw=b_gw, beta_ws=b_ws, eps_g=eps_g, alpha_g=alpha_g,
            Q_cv=(Qcv_gs, Qcv_gw, Qcv_ws), Q_rad=(Qr_gs, Qr_gw, Qr_ws), J_sg=J_sg,
        )
        return f, g, info

    # -- diagnostics ---------------------------------------------------------------------

    def mass_balance_rhs(self, x, y):
        f, _ = self.evaluate(x, y)
        return f[..., IS], f[..., IG]

    def energy_balance_rhs(self, x, y):
        f, _ = self.evaluate(x, y)
        return f[..., IUS], f[..., IUG], f[..., IUW]

    def algebraic_residuals(self, x, y):
        return self.evaluate(x, y)[1]

    def pressure_anchor_residual(self, y):
        """Linearly extrapolated face-0 pressure minus the anchor, in Pa."""
        P = np.asarray(y, dtype=float)[..., IP]
        return 1.5 * P[..., 0] - 0.5 * P[..., 1] - self.p.bc.pressure_anchor

    def boundary_flows(self, x, y):
        """Net inflow rates through the two kiln ends.

        Returns (element_in, element_out) in mol/s per element and
        (energy_in, energy_out) in W.
        """
        _, _, info = self.evaluate(x, y, details=True)
        E = self.db.element_matrix
        ns = self.db.n_solids
        A = self.A_cross
        N_s, N_g = info["N_s"], info["N_g"]
        el_in = A * (N_s[..., 0, :] @ E[:, :ns].T - N_g[..., -1, :] @ E[:, ns:].T)
        el_out = A * (N_s[..., -1, :] @ E[:, :ns].T - N_g[..., 0, :] @ E[:, ns:].T)
        H_s, H_g, Q_s, Q_g = info["H_s"], info["H_g"], info["Q_s"], info["Q_g"]
        e_in = A * ((H_s[..., 0] + Q_s[..., 0]) - (H_g[..., -1] + Q_g[..., -1]))
        e_out = A * ((H_s[..., -1] + Q_s[..., -1]) - (H_g[..., 0] + Q_g[..., 0]))
        return el_in, el_out, e_in, e_out

    def inventory(self, x):
        """Element moles (per element) and total internal energy in the kiln."""
        x = np.asarray(x, dtype=float)
        C = np.concatenate([x[..., IS], x[..., IG]], axis=-1)
        el = np.sum(C, axis=-2) @ self.db.element_matrix.T * self.V
        U = np.sum(x[..., IUS] + x[..., IUG], axis=-1) * self.V + np.sum(x[..., IUW], axis=-1) * self.V_wall
        return el, U
