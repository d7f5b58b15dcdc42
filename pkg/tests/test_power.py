import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from flexarray.errors import ConvergenceError, InvalidExcitationError, InvalidImpedanceError
from flexarray.fields import pattern_factor
from flexarray.geometry import ETA0, ArraySpec, FoldSpec, fold_layout, rotation_matrix_inv
from flexarray.power import (REACTANCE_BOUND, calibrate, chi, directivity, impedance_report, input_impedance,
                             power_report, radiated_power_closed, radiated_power_quadrature,
                             radiation_resistance, sphere_nodes)

angle = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


@pytest.fixture(scope="module")
def spec():
    return ArraySpec.default()


@pytest.fixture(scope="module")
def flat(spec):
    return fold_layout(spec, FoldSpec())


# ---------------------------------------------------------------- chi

@pytest.mark.parametrize("alphas,expected", [((0, 0, 0), 80.0), ((math.pi / 2, 0, 0), 64.0),
                                             ((0, 0, math.pi / 2), 72.0)])
def test_chi_examples(alphas, expected):
    assert chi(*alphas) == pytest.approx(expected, abs=1e-12)


def test_chi_at_zero_is_exactly_80():
    assert chi(0.0, 0.0, 0.0) == 80.0


@given(angle, angle, angle)
def test_chi_matches_rotation_matrix_form(ax, ay, az):
    # each chi term is an entry of the local-to-global rotation; the cross terms sum to its cofactor R22
    r = rotation_matrix_inv(ax, ay, az)
    expected = (64 * r[0, 0] ** 2 + 64 * r[0, 1] ** 2 + 32 * r[0, 2] ** 2 + 24 * r[2, 0] ** 2
                + 16 * r[2, 1] ** 2 + 16 * r[1, 1])
    assert chi(ax, ay, az) == pytest.approx(expected, abs=1e-12)


@given(angle, angle, angle, st.integers(0, 2))
def test_chi_is_2pi_periodic(ax, ay, az, axis):
    shifted = [ax, ay, az]
    shifted[axis] += 2 * math.pi
    assert chi(*shifted) == pytest.approx(chi(ax, ay, az), abs=1e-12)


def test_chi_broadcasts():
    out = chi(np.zeros(5), np.linspace(0, 1, 5), 0.0)
    assert out.shape == (5,)


# ---------------------------------------------------------------- closed form

def test_closed_form_unfolded(spec, flat):
    expected = 16 * math.pi ** 2 * spec.field_scale ** 2 * 80 / (60 * ETA0)
    assert radiated_power_closed(spec, flat) == pytest.approx(expected, rel=1e-14)


def test_zero_currents_give_zero_power(spec, flat):
    zero = spec.with_excitations(0.0)
    assert radiated_power_closed(zero, flat) == 0.0
    assert radiated_power_quadrature(zero, flat) == 0.0
    assert radiated_power_quadrature(zero, flat, "physical", order=8, n_phi=16) == 0.0


@pytest.mark.parametrize("mode,approx", [("paper", True), ("paper", False), ("physical", False)])
def test_power_scales_with_field_squared(spec, mode, approx):
    frames = fold_layout(spec, FoldSpec.from_degrees(30, 60))
    double = ArraySpec.default(field_scale=2 * spec.field_scale)
    p1 = radiated_power_quadrature(spec, frames, mode, approx, order=32, n_phi=64)
    p2 = radiated_power_quadrature(double, frames, mode, approx, order=32, n_phi=64)
    assert p2 == pytest.approx(4 * p1, rel=1e-12)
    assert radiated_power_closed(double, frames) == pytest.approx(4 * radiated_power_closed(spec, frames), rel=1e-14)


# ---------------------------------------------------------------- quadrature

def test_sphere_nodes_integrate_constants_and_moments():
    tt, pp, w = sphere_nodes(16, 32)
    assert w.sum() == pytest.approx(4 * math.pi, rel=1e-14)
    assert np.sum(w * np.cos(tt) ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-13)
    assert np.sum(w * np.sin(tt) ** 2 * np.cos(pp) ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-13)


def test_unfolded_quadrature_to_closed_ratio_is_analytic(spec, flat):
    # with sinc = cos = 1 each element integrates to 6.4 pi E0^2 / (2 eta): ratio 2.4 / pi
    rep = power_report(spec, flat)
    assert rep.ratio == pytest.approx(2.4 / math.pi, rel=1e-10)
    assert rep.p_quadrature == pytest.approx(16 * 6.4 * math.pi / (2 * ETA0), rel=1e-10)


def test_quadrature_converges_to_requested_tolerance(spec):
    frames = fold_layout(spec, FoldSpec.from_degrees(45, 45))
    coarse = radiated_power_quadrature(spec, frames, "paper", False)
    fine = radiated_power_quadrature(spec, frames, "paper", False, order=256, n_phi=512, max_order=512)
    assert coarse == pytest.approx(fine, rel=1e-6)


def test_quadrature_reports_nonconvergence(spec):
    frames = fold_layout(spec, FoldSpec.from_degrees(45, 45))
    with pytest.raises(ConvergenceError) as info:
        radiated_power_quadrature(spec, frames, "physical", order=2, n_phi=2, tol=1e-15, max_order=8)
    diag = info.value.diagnostics
    assert [h[0] for h in diag["history"]] == [2, 4, 8]
    assert len(diag["relative_changes"]) == 2


def test_physical_single_element_power_matches_scipy():
    one = ArraySpec.default(rows=1, cols=1)
    frames = fold_layout(one, FoldSpec())

    def integrand(theta, phi):
        f = float(pattern_factor(theta, phi, one))
        e2 = f * f * (math.cos(phi) ** 2 + math.cos(theta) ** 2 * math.sin(phi) ** 2)
        return e2 * math.sin(theta) / (2 * ETA0)

    oracle, _ = integrate.dblquad(integrand, 0, 2 * math.pi, 0, math.pi, epsabs=1e-13, epsrel=1e-11)
    got = radiated_power_quadrature(one, frames, "physical", order=32, n_phi=64)
    assert got == pytest.approx(oracle, rel=1e-8)


def test_power_report_serializes(spec, flat):
    d = power_report(spec, flat).to_dict()
    assert set(d) == {"p_quadrature_w", "p_closed_w", "quadrature_to_closed_ratio", "chi_per_element", "eta_ohm"}
    assert np.allclose(d["chi_per_element"], 80.0)


# ---------------------------------------------------------------- directivity

def test_unfolded_directivity(spec, flat):
    d = float(directivity(spec, flat, 0.0, 0.0))
    # 4x4 half-wave array of patches: between 13 and 16 dBi
    assert 13.0 < 10 * math.log10(d) < 16.0
    p = radiated_power_quadrature(spec, flat, "physical", order=32, n_phi=64)
    assert d == pytest.approx(4 * math.pi * 256 / (2 * ETA0) / p, rel=1e-9)


# ---------------------------------------------------------------- radiation resistance

def test_calibrated_unfolded_is_50_ohm(spec, flat):
    cal = calibrate(spec)
    assert radiation_resistance(cal, flat) == pytest.approx(50.0, rel=1e-12)
    assert cal.port_voltage == pytest.approx(1.3215, rel=1e-4)


def test_radiation_resistance_formula(spec, flat):
    expected = 60 * 16 * spec.port_voltage ** 2 * ETA0 / (16 * math.pi ** 2 * 80)
    assert radiation_resistance(spec, flat) == pytest.approx(expected, rel=1e-14)


def test_doubling_currents_quarters_resistance(spec, flat):
    r1 = radiation_resistance(spec, flat)
    r2 = radiation_resistance(spec.with_excitations(2.0), flat)
    assert r2 == pytest.approx(r1 / 4, rel=1e-14)


@given(st.floats(0.01, 100.0))
@settings(deadline=None)
def test_resistance_times_current_power_is_scale_invariant(k):
    spec = ArraySpec.default()
    frames = fold_layout(spec, FoldSpec.from_degrees(20, 70))
    base = radiation_resistance(spec, frames) * 16
    scaled = radiation_resistance(spec.with_excitations(k), frames) * 16 * k ** 2
    assert scaled == pytest.approx(base, rel=1e-12)


def test_zero_excitation_is_rejected(spec, flat):
    with pytest.raises(InvalidExcitationError):
        radiation_resistance(spec.with_excitations(0.0), flat)


# ---------------------------------------------------------------- input impedance

def test_lossless_input_impedance():
    assert input_impedance(50.0, 1.0, 1.0) == 50.0 + 0j


def test_input_impedance_linear_in_input_power():
    assert input_impedance(50.0, 2.0, 1.0).real == pytest.approx(100.0)


@given(st.floats(0, 10), st.floats(0, 10))
def test_input_impedance_monotone_in_input_power(a, b):
    lo, hi = sorted((a, b))
    assert input_impedance(60.0, lo, 1.0).real <= input_impedance(60.0, hi, 1.0).real


@pytest.mark.parametrize("x", np.linspace(-REACTANCE_BOUND, REACTANCE_BOUND, 5))
def test_reactance_bound_sweep(spec, flat, x):
    rep = impedance_report(calibrate(spec), flat, x_ant=x)
    assert abs(rep.z_ant.imag) <= REACTANCE_BOUND
    assert rep.z_ant.real == pytest.approx(50.0)


@pytest.mark.parametrize("p_tot", [0.0, -1.0])
def test_non_positive_total_power(p_tot):
    with pytest.raises(InvalidImpedanceError):
        input_impedance(50.0, 1.0, p_tot)


def test_impedance_report_to_dict(spec, flat):
    d = impedance_report(calibrate(spec), flat, p_in_ratio=2.0).to_dict()
    assert d["z_ant_re_ohm"] == pytest.approx(100.0)
    assert d["r_rad_ohm"] == pytest.approx(50.0)
