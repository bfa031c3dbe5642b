import math

import numpy as np
import pytest
import scipy.special as sps
from hypothesis import given, settings, strategies as st

from cablefem import PermeabilityModel, builtin_spec
from cablefem.analytic_oracles import (MU0, ac_resistance_ratio_kelvin, ampere_loop_field,
                                       bessel_j0_j1, circle_loop, dc_resistance, internal_impedance_ratio,
                                       kelvin, round_wire_ac_resistance, sheath_circuit_model,
                                       shorted_loop_currents)
from cablefem.cable_model import default_materials

COPPER = 1.7241e-8


def _radius_for_q(q, resistivity=COPPER, f=50.0):
    delta = math.sqrt(2 * resistivity / (2 * math.pi * f * MU0))
    return q * delta


def trefoil_centers(spec):
    c = spec.phase_circle_radius
    return [(c * math.cos(a), c * math.sin(a)) for a in (0, 2 * math.pi / 3, 4 * math.pi / 3)]


# --- Bessel / Kelvin series ------------------------------------------------------------

@pytest.mark.parametrize("x", [0.1, 1.0, 3.0, 8.0, 15.0])
def test_kelvin_against_scipy(x):
    ber, bei, berp, beip = kelvin(x)
    assert ber == pytest.approx(sps.ber(x), rel=1e-10, abs=1e-12)
    assert bei == pytest.approx(sps.bei(x), rel=1e-10, abs=1e-12)
    assert berp == pytest.approx(sps.berp(x), rel=1e-10, abs=1e-12)
    assert beip == pytest.approx(sps.beip(x), rel=1e-10, abs=1e-12)


@given(st.floats(0.01, 30.0), st.floats(-math.pi, math.pi))
@settings(max_examples=60, deadline=None)
def test_bessel_series_against_scipy(r, phi):
    z = r * complex(math.cos(phi), math.sin(phi))
    j0, j1, bound = bessel_j0_j1(z)
    assert bound < 1e-10
    # cancellation in the series limits the absolute accuracy to eps * sum |terms|
    scale = math.exp(r) * 1e-14
    assert abs(j0 - sps.jv(0, z)) <= 1e-10 * abs(sps.jv(0, z)) + scale
    assert abs(j1 - sps.jv(1, z)) <= 1e-10 * abs(sps.jv(1, z)) + scale


# --- skin effect -------------------------------------------------------------------------

def test_dc_limit():
    for f in (0.0, 1e-6):
        res = round_wire_ac_resistance(0.01, 1 / COPPER, 1.0, f)
        assert res.value / res.extra["r_dc"] == pytest.approx(1.0, abs=1e-12)
    assert ac_resistance_ratio_kelvin(0.0) == 1.0
    assert dc_resistance(0.01, COPPER) == pytest.approx(COPPER / (math.pi * 1e-4))


def test_copper_3p5mm():
    res = round_wire_ac_resistance(3.5e-3, 1 / COPPER, 1.0, 50.0)
    ratio = res.value / res.extra["r_dc"]
    q = 3.5e-3 / _radius_for_q(1.0)
    assert q == pytest.approx(0.377, abs=5e-3)
    assert ratio == pytest.approx(1.0004, abs=5e-5)
    assert ratio == pytest.approx(1 + q ** 4 / 48, rel=1e-5)
    assert res.bound < 1e-10
    assert res.method == "series"


@pytest.mark.parametrize("q", [20.0, 50.0, 200.0])
def test_large_q_asymptote(q):
    res = round_wire_ac_resistance(_radius_for_q(q), 1 / COPPER, 1.0, 50.0)
    assert res.value / res.extra["r_dc"] == pytest.approx(q / 2 + 0.25, rel=1e-2)


def test_asymptotic_branch_flagged_and_continuous():
    # |k a| = sqrt(2) q crosses the series limit near q = 24.75
    series = round_wire_ac_resistance(_radius_for_q(24.7), 1 / COPPER, 1.0, 50.0)
    asym = round_wire_ac_resistance(_radius_for_q(24.8), 1 / COPPER, 1.0, 50.0)
    assert not series.asymptotic and asym.asymptotic
    r_s = series.value / series.extra["r_dc"]
    r_a = asym.value / asym.extra["r_dc"]
    assert r_a - r_s == pytest.approx(0.05, rel=2e-3)


@pytest.mark.parametrize("q", [0.3, 1.0, 3.0, 10.0])
def test_kelvin_form_matches_bessel_form(q):
    res = round_wire_ac_resistance(_radius_for_q(q), 1 / COPPER, 1.0, 50.0)
    assert res.value / res.extra["r_dc"] == pytest.approx(ac_resistance_ratio_kelvin(q), rel=1e-10)


def test_magnetic_wire_internal_impedance():
    # steel armor wire: complex mu makes the ratio deviate from the nonmagnetic one
    ratio, bound, method = internal_impedance_ratio(2.5e-3, 1 / 1.38e-7, 100 - 50j, 50.0)
    plain, _, _ = internal_impedance_ratio(2.5e-3, 1 / 1.38e-7, 1.0, 50.0)
    assert bound < 1e-10 and method == "series"
    assert ratio.real > plain.real > 1.0


def test_invalid_inputs():
    with pytest.raises(ValueError):
        round_wire_ac_resistance(-1.0, 1e7)
    with pytest.raises(ValueError):
        round_wire_ac_resistance(1e-3, 0.0)


@given(st.floats(0.01, 20.0), st.floats(0.01, 20.0))
@settings(max_examples=40, deadline=None)
def test_ratio_monotone_in_q(q1, q2):
    lo, hi = sorted((q1, q2))
    assert ac_resistance_ratio_kelvin(hi) >= ac_resistance_ratio_kelvin(lo) - 1e-12


# --- Ampere -----------------------------------------------------------------------------

def test_ampere_single_and_balanced():
    spec = builtin_spec("cable1")
    centers = np.array(trefoil_centers(spec))
    cur = 800 * np.exp(1j * np.array([0, -2 * math.pi / 3, 2 * math.pi / 3]))
    one = ampere_loop_field(cur, centers, circle_loop(centers[0], spec.sheath_radius))
    assert one == pytest.approx(cur[0], abs=1e-9)
    assert abs(ampere_loop_field(cur, centers, circle_loop((0, 0), spec.core_bundle_radius))) < 1e-9


def test_ampere_zero_net_wire():
    spec = builtin_spec("cable1")
    r = 0.5 * (spec.armor_inner_radius + spec.armor_outer_radius)
    wire = np.array([[r, 0.0]])
    # a wire whose eddy currents cancel: +I and -I filaments inside it
    fil = np.array([[r - 1e-3, 0.0], [r + 1e-3, 0.0]])
    assert abs(ampere_loop_field([5.0, -5.0], fil, circle_loop(wire[0], spec.wire_radius * 1.5))) < 1e-12


def test_ampere_winding_number():
    square = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], float)
    assert ampere_loop_field([2.0], [[0.0, 0.0]], square) == pytest.approx(2.0)
    assert ampere_loop_field([2.0], [[0.0, 0.0]], square[::-1]) == pytest.approx(-2.0)
    assert ampere_loop_field([2.0], [[3.0, 0.0]], square) == pytest.approx(0.0, abs=1e-15)


# --- sheath circuit ----------------------------------------------------------------------

def _sheath_oracle(spec, frequency, boundary_radius, mats=None):
    mats = mats or default_materials(spec)
    cur = spec.phase_current * np.exp(1j * np.array([0, -2 * math.pi / 3, 2 * math.pi / 3]))
    return sheath_circuit_model(trefoil_centers(spec), spec.sheath_radius, spec.sheath_thickness,
                                mats.sheath_resistivity, cur, frequency, boundary_radius)


def test_sheath_dc_limit():
    spec = builtin_spec("toy")
    assert np.max(np.abs(_sheath_oracle(spec, 0.0, 0.2).extra["currents"])) == 0.0
    small = np.abs(_sheath_oracle(spec, 1e-3, 0.2).extra["currents"])
    assert np.all(small < 1e-6 * spec.phase_current)


def test_sheath_symmetric_trefoil():
    spec = builtin_spec("toy")
    mags = np.abs(_sheath_oracle(spec, 50.0, 0.2).extra["currents"])
    assert mags.max() - mags.min() < 1e-9 * mags.max()
    assert mags.max() > 0


def test_sheath_thick_warning():
    spec = builtin_spec("toy")
    thick = spec.replace(sheath_thickness=0.3 * spec.sheath_radius)
    assert _sheath_oracle(thick, 50.0, 0.2).extra["warnings"]
    assert not _sheath_oracle(spec, 50.0, 0.2).extra["warnings"]


def test_shorted_loop_currents_two_loops():
    # driven conductor coupled to one shorted loop: I_loop = -Z_ld I_d / Z_ll
    z = np.array([[1 + 2j, 0.5j], [0.5j, 0.2 + 1j]])
    i = shorted_loop_currents(z, np.array([True, False]), [3.0])
    assert i[0] == pytest.approx(-0.5j * 3.0 / (0.2 + 1j))


def test_sheath_oracle_vs_fem():
    from cablefem.em_solver import SystemSpec, balanced_currents, solve
    from cablefem.meshing import build_cross_section, toy_controls
    from cablefem.postprocess import sheath_current

    spec = builtin_spec("toy")
    mats = default_materials(spec, armor_conductivity=0.0,
                             armor_permeability=PermeabilityModel.constant(1.0))
    mesh = build_cross_section(spec, toy_controls(ring_nodes=84), mats)
    fem = np.abs(sheath_current(solve(SystemSpec(mesh, mats, balanced_currents(spec.phase_current)))))
    oracle = np.abs(_sheath_oracle(spec, spec.frequency, mesh.outer_radius, mats).extra["currents"])
    assert np.all(np.abs(fem - oracle) / oracle < 0.03)
