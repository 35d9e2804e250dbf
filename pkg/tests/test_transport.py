import json
import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kilnsim import transport as tr
from kilnsim.thermo import GASES, SOLIDS, default_species

DB = default_species()


def _gas(**x):
    c = np.zeros(len(GASES))
    for k, v in x.items():
        c[GASES.index(k)] = v
    return c


# -- velocities ---------------------------------------------------------------------

def test_gas_velocity_zero_gradient():
    assert tr.gas_velocity(0.0, 5.0, 3.0, 4e-5, 0.25) == 0.0


def test_gas_velocity_darcy_weisbach_blasius():
    # hand evaluation of the Blasius form for D_H = 3 m, mu = 4e-5, rho = 0.25, 27 Pa over 50 m
    ref = (2 / 0.316 * (3**5 / (4e-5 * 0.25**3)) ** 0.25 * 27 / 50) ** (4 / 7)
    assert ref == pytest.approx(34.048355, rel=1e-6)
    assert tr.gas_velocity(27.0, 50.0, 3.0, 4e-5, 0.25, laminar=False) == pytest.approx(ref, rel=1e-12)
    # flow runs from high to low pressure, i.e. against the gradient sign convention of dP
    assert tr.gas_velocity(-27.0, 50.0, 3.0, 4e-5, 0.25) == pytest.approx(-ref, rel=1e-12)


def test_gas_velocity_laminar_cap():
    g = 1e-6
    v = tr.gas_velocity(g, 1.0, 3.0, 4e-5, 0.25)
    assert v == pytest.approx(g * 9 / (32 * 4e-5) * math.tanh(30 * g), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-100, 100), st.floats(0.5, 4.0))
def test_gas_velocity_odd(dP, D_H):
    a = tr.gas_velocity(dP, 5.0, D_H, 4e-5, 0.3)
    b = tr.gas_velocity(-dP, 5.0, D_H, 4e-5, 0.3)
    assert a == pytest.approx(-b, abs=1e-15)


def test_solid_velocity_reference_point():
    from kilnsim.scenario import DEFAULT_REPOSE, RPM
    th = 1.7923674658342588
    L_c = 2 * 2 * math.sin(th / 2)
    v = tr.solid_velocity(4 * RPM, 0.02, 0.0, L_c, 2.0, DEFAULT_REPOSE)
    assert v == pytest.approx(0.048, rel=1e-9)


def test_solid_velocity_empty_bed_limit():
    v0 = tr.solid_velocity(0.4, 0.02, 0.0, 0.0, 2.0, 0.3)
    v1 = tr.solid_velocity(0.4, 0.02, 0.0, 1e-7, 2.0, 0.3)
    assert v0 == pytest.approx(v1, rel=1e-6)
    assert v0 == pytest.approx(0.4 / (2 * math.pi) * 0.02 / math.sin(0.3) * 2 * math.pi * 2.0)


def test_repose_angle_bounds():
    assert tr.repose_angle(0.4, 0.0, 0.6109) == pytest.approx(0.6109)
    with pytest.raises(ValueError):
        tr.repose_angle(0.4, 0.0, -0.1)


# -- gas properties ---------------------------------------------------------------------

def test_sutherland_reproduces_anchors():
    assert tr.sutherland_viscosity("N2", 300.0) == pytest.approx(17.89e-6, rel=1e-14)
    assert tr.sutherland_viscosity("N2", 1000.0) == pytest.approx(41.54e-6, rel=1e-14)
    for g in GASES:
        sp = DB[g]
        if sp.viscosity_anchors is None:
            continue
        for T, mu in sp.viscosity_anchors:
            assert tr.sutherland_viscosity(g, T) == pytest.approx(mu, rel=1e-13)
        for T, k in sp.conductivity:
            assert tr.gas_conductivity(g, T) == pytest.approx(k, rel=1e-13)


def test_sutherland_constant_closed_form():
    # 41.54/17.89 = (1000/300)^1.5 (300 + S)/(1000 + S)
    q, a = 41.54 / 17.89, (1000 / 300) ** 1.5
    S = (a * 300 - q * 1000) / (q - a)
    assert S == pytest.approx(131.84, abs=0.01)
    assert tr.sutherland_constant(DB["N2"].viscosity_anchors) == pytest.approx(S, rel=1e-12)


def test_excluded_species():
    with pytest.raises(ValueError):
        tr.sutherland_viscosity("C_sus", 1000.0)


@pytest.mark.parametrize("name", ["N2", "O2", "CO2", "H2O", "Ar", "CO", "H2"])
@pytest.mark.parametrize("T", [300.0, 1000.0, 1700.0])
def test_pure_gas_mixture_equals_species(name, T):
    mu, k = tr.mixture_viscosity_conductivity(T, _gas(**{name: 5.0}))
    assert mu == pytest.approx(tr.sutherland_viscosity(name, T), rel=1e-15)
    assert k == pytest.approx(tr.gas_conductivity(name, T), rel=1e-15)


def test_suspended_carbon_is_ignored_by_mixture_rule():
    a = tr.mixture_viscosity_conductivity(1200.0, _gas(N2=8.0, O2=2.0))
    b = tr.mixture_viscosity_conductivity(1200.0, _gas(N2=8.0, O2=2.0, C_sus=3.0))
    assert a == b


def test_wilke_phi_symmetry_relation():
    M = np.array([DB["CO2"].molar_mass, DB["H2"].molar_mass])
    mu = np.array([tr.sutherland_viscosity("CO2", 900.0), tr.sutherland_viscosity("H2", 900.0)])
    phi = tr.wilke_phi(mu, M)
    direct = lambda i, j: (1 + (mu[i] / mu[j]) ** 0.5 * (M[j] / M[i]) ** 0.25) ** 2 / (8 * (1 + M[i] / M[j])) ** 0.5
    assert phi[0, 1] == pytest.approx(direct(0, 1), rel=1e-14)
    assert phi[1, 0] == pytest.approx(direct(1, 0), rel=1e-14)
    assert phi[1, 0] == pytest.approx(phi[0, 1] * mu[1] / mu[0] * M[0] / M[1], rel=1e-12)
    assert phi[0, 0] == pytest.approx(1.0)


def test_equimolar_air_bracket():
    mu, _ = tr.mixture_viscosity_conductivity(300.0, _gas(N2=1.0, O2=1.0))
    assert 17.89e-6 <= mu <= 20.65e-6


def test_fuller_co2_n2():
    Mij = 2 / (1 / 44.01 + 1 / 28.014)
    ref = 0.00143 * 1000**1.75 / (math.sqrt(Mij) * (16.3 ** (1 / 3) + 18.5 ** (1 / 3)) ** 2) * 1e-4
    assert ref == pytest.approx(1.6195e-4, rel=1e-4)
    D = tr.fuller_binary(1000.0, 1e5)
    i, j = GASES.index("CO2"), GASES.index("N2")
    assert D[i, j] == pytest.approx(ref, rel=1e-3)
    assert D[i, j] == D[j, i]


def test_blanc_binary_limit():
    D = tr.gas_diffusion_coefficients(1000.0, 1e5, _gas(CO2=1.0, N2=3.0))
    Dij = tr.fuller_binary(1000.0, 1e5)
    i, j = GASES.index("CO2"), GASES.index("N2")
    assert D[i] == pytest.approx(Dij[i, j], rel=1e-12)
    assert D[j] == pytest.approx(Dij[i, j], rel=1e-12)


def test_blanc_pure_species_flagged():
    D, pure = tr.gas_diffusion_coefficients(1000.0, 1e5, _gas(N2=1.0), return_pure=True)
    assert pure[GASES.index("N2")]
    assert D[GASES.index("N2")] == 0.0
    with pytest.raises(ValueError):
        tr.gas_diffusion_coefficients(1000.0, 1e5, _gas())


def test_solid_conductivity_pure_and_layered():
    c = np.zeros(len(SOLIDS))
    c[SOLIDS.index("CaO")] = 100.0
    assert tr.solid_conductivity(c) == pytest.approx(DB["CaO"].conductivity)


# -- fluxes ---------------------------------------------------------------------------

def test_solid_diffusion_absent_and_upwinding():
    C = np.array([[1.0], [2.0], [4.0]])
    v = np.array([0.5, 0.5, -0.5, 0.5])
    N = tr.species_fluxes(C, v, 1.0, inflow_left=np.array([0.7]))
    np.testing.assert_allclose(N[:, 0], [0.7, 0.5, -2.0, 2.0])


def test_harmonic_interface_conductivity():
    Q = tr.conduction_fluxes(np.array([1.0, 0.0]), np.array([1.0, 3.0]), 1.0)
    assert Q[1] == pytest.approx(1.5)
    assert Q[0] == 0.0 and Q[2] == 0.0


def test_convection_product():
    Q_gs, _, _ = tr.convection_heat(1000.0, 1400.0, 1200.0, 15.6, 0.0, 0.0, 120.0, 0.0, 0.0)
    assert Q_gs == pytest.approx(15.6 * 120 * 400)
    assert Q_gs == pytest.approx(0.75e6, rel=0.01)


def test_tscheng_gas_solid_oracle():
    # Re_D = 1e4 and Re_w = 1e3 by construction: rho = 1, mu = 1, D_e = 3
    D_e, mu, rho = 3.0, 1.0, 1.0
    v = 1e4 * mu / (rho * D_e)
    omega = 1e3 * mu / (rho * D_e**2)
    b_gs, _, _ = tr.tscheng_coefficients(1.8, 0.13, D_e, 2.0, omega, v, rho, mu, 0.07, 1.0, 1e-6)
    ref = 0.07 / 3 * 0.46 * 1e4**0.535 * 1e3**0.104 * 0.13**-0.341
    assert ref == pytest.approx(6.0937, rel=1e-4)
    assert b_gs == pytest.approx(ref, rel=1e-12)


def test_tscheng_empty_bed():
    b_gs, b_gw, b_ws = tr.tscheng_coefficients(0.0, 0.0, 4.0, 2.0, 0.4, 5.0, 0.3, 5e-5, 0.1, 1.0, 0.0)
    assert b_gs == 0.0 and b_ws == 0.0 and b_gw > 0


# -- radiation ----------------------------------------------------------------------------

def _wsgg_oracle(T, P_atm, x_h2o, x_co2, L):
    """Plain-loop evaluation of the embedded four-grey-gas table."""
    d = json.loads(resources.files("kilnsim").joinpath("data/wsgg.json").read_text())
    mr = min(max(x_h2o / x_co2, d["ratio_range"][0]), d["ratio_range"][1])
    tau = T / d["t_ref"]
    eps = 0.0
    for j in range(4):
        k = d["K1"][j] + d["K2"][j] * mr
        a = 0.0
        for i in range(3):
            c = d["C1"][j][i] + d["C2"][j][i] * mr + d["C3"][j][i] * mr * mr
            a += c * tau**i
        eps += a * (1.0 - math.exp(-k * P_atm * (x_h2o + x_co2) * L))
    return eps


@pytest.mark.parametrize("T,xh,xc", [(1400.0, 0.01, 0.17), (1000.0, 0.1, 0.1), (1800.0, 0.15, 0.1)])
def test_wsgg_against_loop_oracle(T, xh, xc):
    h = 2.0 * (1 - math.cos(1.7923674658342588 / 2))
    S_m = 0.95 * (4.0 - h)
    eps = tr.gas_emissivity(T, 101325.0, xh, xc, S_m)
    assert eps == pytest.approx(_wsgg_oracle(T, 1.0, xh, xc, S_m), rel=1e-12)
    assert 0.0 <= eps < 1.0


def test_wsgg_reference_conditions_range():
    h = 2.0 * (1 - math.cos(1.7923674658342588 / 2))
    eps = tr.gas_emissivity(1400.0, 1e5, 0.01, 0.17, 0.95 * (4.0 - h))
    assert 0.1 < eps < 0.5


def test_transparent_gas():
    assert tr.gas_emissivity(1400.0, 1e5, 0.0, 0.0, 3.0) == 0.0
    Q_gs, Q_gw, Q_ws = tr.radiation_heat(1200.0, 1500.0, 1300.0, 15.6, 40.0, 20.0, 0.0, 0.0, 0.25)
    assert Q_gs == 0.0 and Q_gw == 0.0 and Q_ws > 0


def test_equal_wall_solid_temperature_no_exchange():
    _, _, Q_ws = tr.radiation_heat(1200.0, 1500.0, 1200.0, 15.6, 40.0, 20.0, 0.2, 0.1, 0.25)
    assert Q_ws == 0.0


def test_view_factor_oracle():
    th = 1.793
    L_c = 2 * 2 * math.sin(th / 2)
    assert tr.view_factor(L_c, 2.0, 0.02) == pytest.approx(L_c / (2 * (math.pi - 0.02) * 2), rel=1e-14)
    assert tr.view_factor(L_c, 2.0, 0.02) == pytest.approx(0.250, abs=5e-4)


def test_absorptivity_literal_product():
    S_m = 3.0
    a = tr.gas_absorptivity(1200.0, 1600.0, 1e5, 0.02, 0.18, S_m)
    eps_s = tr.gas_emissivity(1200.0, 1e5, 0.02, 0.18, S_m)
    assert a == pytest.approx(eps_s * 0.2 * S_m * math.sqrt(1200 / 1600), rel=1e-12)


def test_sigma():
    assert tr.SIGMA == 5.670374419e-8
