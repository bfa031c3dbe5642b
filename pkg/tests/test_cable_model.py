import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cablefem.cable_model import (BUILTIN_SPECS, MaterialSet, PermeabilityModel, builtin_spec,
                                  complex_permeability, default_materials, format_spec,
                                  load_spec, parse_spec_text, save_spec, skin_depth,
                                  validate_spec)


@pytest.mark.parametrize("name", BUILTIN_SPECS)
def test_builtin_specs_are_valid(name):
    assert validate_spec(builtin_spec(name)) == []


def test_table_rows_loaded_verbatim():
    c4 = builtin_spec("cable4")
    assert c4.conductor_material == "aluminium"
    assert c4.armor_wire_count == 139
    assert c4.armor_radius == pytest.approx(115.6e-3)
    assert [builtin_spec(f"cable{i}").armor_wire_count for i in range(1, 6)] == [28, 114, 103, 139, 129]


def test_zero_wire_count_is_one_violation():
    problems = validate_spec(builtin_spec("cable2").replace(armor_wire_count=0))
    assert len(problems) == 1


def test_overlapping_wires_reported():
    c4 = builtin_spec("cable4")
    assert validate_spec(c4) == []
    problems = validate_spec(c4.replace(armor_wire_diameter=2 * c4.armor_wire_diameter))
    assert any("overlap" in p for p in problems)


def test_sheath_radius_is_mean():
    s = builtin_spec("cable1")
    assert s.sheath_outer_radius - s.sheath_inner_radius == pytest.approx(s.sheath_thickness)
    assert 0.5 * (s.sheath_outer_radius + s.sheath_inner_radius) == pytest.approx(s.sheath_radius)


def test_trefoil_sheaths_do_not_overlap():
    for name in BUILTIN_SPECS:
        s = builtin_spec(name)
        spacing = s.phase_circle_radius * math.sqrt(3.0)
        assert spacing >= 2 * s.sheath_outer_radius
        assert s.core_bundle_radius < s.armor_inner_radius


def test_constant_permeability():
    m = PermeabilityModel()
    assert complex_permeability(m, 0.0) == 100 - 50j
    assert np.all(complex_permeability(m, np.array([0.1, 2.0])) == 100 - 50j)


def test_field_dependent_limits():
    m = PermeabilityModel.field_dependent(50.0, 300.0, 120.0, 4.0, 6.0)
    assert complex_permeability(m, 0.0) == 50 + 0j
    big = complex_permeability(m, 30.0)
    assert abs(big - (350 - 120j)) < 1e-6


def test_permeability_rejects_bad_input():
    with pytest.raises(ValueError):
        complex_permeability(PermeabilityModel(), -1.0)
    with pytest.raises(ValueError):
        PermeabilityModel.constant(100 + 5j)
    with pytest.raises(ValueError):
        PermeabilityModel.field_dependent(0.5, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        PermeabilityModel.field_dependent(1, 1, 1, 0.0, 1)


@given(st.floats(1, 1e3), st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0.01, 50), st.floats(0.01, 50),
       st.lists(st.floats(0, 5), min_size=2, max_size=20))
def test_field_dependent_monotone(m0, mr, mi, a1, a2, bs):
    m = PermeabilityModel.field_dependent(m0, mr, mi, a1, a2)
    b = np.sort(np.array(bs))
    mu = complex_permeability(m, b)
    assert np.all(np.diff(mu.real) >= -1e-9 * max(1.0, mr))
    assert np.all(np.diff(mu.imag) <= 1e-9 * max(1.0, mi))
    assert np.array_equal(mu, complex_permeability(m, b))


def test_materials_invariants():
    with pytest.raises(ValueError):
        MaterialSet(conductor_resistivity=0.0)
    with pytest.raises(ValueError):
        MaterialSet(conductor_resistivity=1e-8, armor_conductivity=-1.0)
    cu = default_materials(builtin_spec("cable1"))
    al = default_materials(builtin_spec("cable4"))
    assert al.conductor_resistivity > cu.conductor_resistivity


def test_skin_depth_copper_50hz():
    rho = default_materials(builtin_spec("cable1")).conductor_resistivity
    assert skin_depth(rho, 50.0) == pytest.approx(math.sqrt(2 * rho / (2 * math.pi * 50 * 4e-7 * math.pi)))
    assert 9e-3 < skin_depth(rho, 50.0) < 1e-2


lengths = st.floats(1e-3, 0.2)


@settings(max_examples=50)
@given(lengths, lengths, st.floats(0.1, 10), st.integers(1, 300), st.sampled_from(["copper", "aluminium"]),
       st.sampled_from(["ccw", "cw"]), st.floats(1, 1000))
def test_spec_roundtrip(r, t, lay, n, mat, hand, f):
    s = builtin_spec("cable2").replace(conductor_radius=r, sheath_thickness=t, core_lay_length=lay,
                                       armor_wire_count=n, conductor_material=mat,
                                       core_handedness=hand, frequency=f)
    assert parse_spec_text(format_spec(s)) == s


def test_spec_file_roundtrip(tmp_path):
    s = builtin_spec("cable3").replace(core_lay_length=math.inf)
    save_spec(s, tmp_path / "c.txt")
    assert load_spec(tmp_path / "c.txt") == s


def test_spec_parser_errors():
    with pytest.raises(ValueError):
        parse_spec_text("conductor_radius = 1\nbogus_key = 3\n")
    with pytest.raises(ValueError):
        parse_spec_text("conductor_radius = abc\n")
