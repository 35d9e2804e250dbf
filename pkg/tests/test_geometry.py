import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from kilnsim.geometry import (KilnDimensions, chord_height_slope, fill_angle_from_area, fill_fraction,
                              geometry_profile, hydraulic_and_effective_diameters,
                              interface_cross_sections, segment_area, surface_areas)

R_C = 2.0
# theta - sin(theta) = 0.26 pi, solved by bracketing
THETA_13 = 1.7923674658342588


def test_fill_angle_oracle_13_percent():
    ref = brentq(lambda t: t - math.sin(t) - 0.26 * math.pi, 0.0, 2 * math.pi, xtol=1e-15)
    assert ref == pytest.approx(THETA_13, abs=1e-14)
    th = fill_angle_from_area(0.13 * math.pi * R_C**2, R_C)
    assert th == pytest.approx(THETA_13, abs=1e-11)
    assert fill_fraction(th) == pytest.approx(0.13, rel=1e-11)


def test_fill_angle_round_trip_sweep():
    A = np.linspace(0.0, math.pi * R_C**2, 1000)
    th = fill_angle_from_area(A, R_C)
    assert np.max(np.abs(segment_area(th, R_C) - A)) < 1e-10 * R_C**2


def test_fill_angle_limits_and_errors():
    assert fill_angle_from_area(0.0, R_C) == 0.0
    assert fill_angle_from_area(math.pi * R_C**2, R_C) == pytest.approx(2 * math.pi, abs=1e-10)
    assert fill_angle_from_area(-1e-15, R_C) == 0.0
    with pytest.raises(ValueError):
        fill_angle_from_area(-1.0, R_C)
    with pytest.raises(ValueError):
        fill_angle_from_area(1.01 * math.pi * R_C**2, R_C)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 2 * math.pi), st.floats(0.1, 5.0))
def test_fill_angle_inverse_property(theta, r):
    th = fill_angle_from_area(segment_area(theta, r), r)
    assert segment_area(th, r) == pytest.approx(segment_area(theta, r), abs=1e-10 * r * r)


def test_surface_areas_oracle():
    A_gs, A_ws, A_gw, A_g = surface_areas(1.793, R_C, 5.0)
    assert A_gs == pytest.approx(2 * 2 * math.sin(0.8965) * 5, rel=1e-12)
    assert A_gs == pytest.approx(15.62, abs=0.01)
    assert A_ws + A_gw == pytest.approx(2 * math.pi * R_C * 5.0, rel=1e-12)
    assert A_g == pytest.approx(math.pi * 4 - 0.5 * 4 * (1.793 - math.sin(1.793)), rel=1e-12)


def test_effective_diameter_half_full():
    _, D_e = hydraulic_and_effective_diameters(math.pi, R_C, 5.0)
    expected = 2 * R_C * (math.pi / 2) / (math.pi / 2 + 1)
    assert D_e == pytest.approx(expected, rel=1e-12)
    assert D_e / R_C == pytest.approx(1.222, abs=1e-3)


def test_empty_bed_hydraulic_diameter_is_pipe():
    D_H, D_e = hydraulic_and_effective_diameters(0.0, R_C, 5.0)
    assert D_H == pytest.approx(2 * R_C)
    assert D_e == pytest.approx(2 * R_C)


def test_flat_bed_has_zero_slope():
    L_c, h, phi = chord_height_slope(np.full(10, THETA_13), R_C, 5.0)
    assert np.all(phi == 0.0)
    assert h[0] == pytest.approx(R_C * (1 - math.cos(THETA_13 / 2)))


def test_bed_deepening_downstream_gives_negative_slope():
    _, _, phi = chord_height_slope(np.linspace(1.0, 2.0, 6), R_C, 5.0)
    assert np.all(phi < 0)


@pytest.mark.parametrize("slope", [0.0, 0.01, -0.005, 0.03])
def test_interface_reconstruction_exact_for_linear_beds(slope):
    n, dz = 8, 5.0
    faces = 0.4 + slope * np.arange(n + 1) * dz
    V = 0.5 * (faces[:-1] + faces[1:]) * dz
    A = interface_cross_sections(V, dz)
    np.testing.assert_allclose(A, faces, rtol=0, atol=1e-14)
    np.testing.assert_allclose(0.5 * (A[:-1] + A[1:]) * dz, V, rtol=1e-15, atol=0)
    A2 = interface_cross_sections(V, dz, scheme="difference")
    assert A2.shape == (n + 1,)
    with pytest.raises(ValueError):
        interface_cross_sections(V, dz, scheme="bogus")


def test_interface_reconstruction_clamps_negative():
    A = interface_cross_sections(np.array([1.0, 0.0, 1.0]), 1.0, inlet_area=2.0)
    assert np.all(A >= 0)


def test_dimensions_and_profile():
    d = KilnDimensions()
    assert d.validate() == []
    assert d.dz == 5.0
    assert d.segment_volume == pytest.approx(math.pi * 4 * 5)
    np.testing.assert_allclose(d.centers, np.arange(10) * 5 + 2.5)
    assert KilnDimensions(n_segments=1).validate()
    p = geometry_profile(np.full(10, THETA_13), d)
    np.testing.assert_allclose(p.eta, 0.13, rtol=1e-11)
