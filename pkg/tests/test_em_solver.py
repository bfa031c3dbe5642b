import dataclasses
import math
import time

import numpy as np
import pytest
import scipy.sparse as sp

from cablefem import PermeabilityModel, builtin_spec, plan
from cablefem.cable_model import default_materials
from cablefem.em_solver import (CircuitError, CongruenceError, SolverBreakdown, SystemSpec, apply_periodic,
                                assemble, balanced_currents, discretize, solve, solve_linear)
from cablefem.meshing import MeshControls, build_cross_section, build_single_wire, sweep, toy_controls
from cablefem.postprocess import (ampere_errors, impedance, loss_factors, power_balance, region_losses,
                                  sheath_current, wire_currents)


@pytest.fixture(scope="module")
def toy84():
    return build_cross_section(builtin_spec("toy"), toy_controls(ring_nodes=84))


@pytest.fixture(scope="module")
def toy_short():
    spec = builtin_spec("toy")
    return sweep(build_cross_section(spec, toy_controls()), plan(spec, "short_periodic", ring_nodes=42))


@pytest.fixture(scope="module")
def toy_straight():
    spec = builtin_spec("toy").replace(core_lay_length=math.inf, armor_lay_length=math.inf)
    m2 = build_cross_section(spec, toy_controls())
    return sweep(m2, plan(spec, "full_periodic", 0.002, ring_nodes=42, n_layers=2))


def _wire_names(mesh):
    return [n for n in mesh.region_names if n.startswith("wire")]


# --- 2D ----------------------------------------------------------------------------------

def test_single_conductor_current_echo():
    spec = builtin_spec("cable1")
    mesh = build_single_wire(spec)
    cur = 123.4 * np.exp(0.7j)
    res = solve(SystemSpec(mesh, currents=np.array([cur, 0, 0])))
    assert abs(res.currents["conductor0"] - cur) <= 1e-10 * abs(cur)


def test_dc_limit_resistance():
    spec = builtin_spec("toy")
    mats = default_materials(spec, armor_conductivity=0.0, sheath_resistivity=1e3,
                             armor_permeability=PermeabilityModel.constant(1.0))
    mesh = build_cross_section(spec, MeshControls(), mats)
    R, _ = impedance(solve(SystemSpec(mesh, mats, frequency=1e-3)))
    closed = mats.conductor_resistivity / (math.pi * spec.conductor_radius ** 2) * 1e3
    assert R == pytest.approx(closed, rel=5e-3)


def test_open_sheaths_carry_no_net_current(cable1_mesh):
    res = solve(SystemSpec(cable1_mesh, sheath_bonding="open"))
    i = np.abs(sheath_current(res))
    assert np.all(i < 1e-10 * cable1_mesh.spec.phase_current)


def test_open_armor_wires_carry_no_net_current(cable1_mesh):
    res = solve(SystemSpec(cable1_mesh, armor_bonding="open"))
    assert np.all(np.abs(wire_currents(res)) < 1e-10 * cable1_mesh.spec.phase_current)


def test_cable1_2d_within_budget(cable1_mesh):
    t = time.perf_counter()
    res = solve(SystemSpec(cable1_mesh))
    assert time.perf_counter() - t < 10.0
    assert res.stats["residual"] <= 1e-8
    assert power_balance(res) < 5e-3
    assert np.max(ampere_errors(res)) < 1e-2


def test_zero_excitation_2d(cable1_mesh):
    res = solve(SystemSpec(cable1_mesh, currents=np.zeros(3)))
    assert not np.any(res.field)
    assert all(v == 0 for v in res.currents.values())


def test_region_currents_errors(cable1_mesh):
    with pytest.raises(CircuitError):
        solve(SystemSpec(cable1_mesh, region_currents={"sheath0": 1.0}))   # solid sheaths are grounded
    with pytest.raises(CircuitError):
        solve(SystemSpec(cable1_mesh, sheath_bonding="open", region_currents={"nosuch": 1.0}))


def test_system_spec_compatibility(cable1_mesh, toy_short):
    with pytest.raises(ValueError):
        SystemSpec(cable1_mesh, armor_treatment="wires_3d")
    with pytest.raises(ValueError):
        SystemSpec(toy_short, armor_treatment="series_circuit_2p5d")
    with pytest.raises(ValueError):
        SystemSpec(cable1_mesh, boundary_mode="periodic_rotated")
    with pytest.raises(ValueError):
        SystemSpec(cable1_mesh, sheath_bonding="floating")
    with pytest.raises(ValueError):
        SystemSpec(cable1_mesh, currents=np.ones(2))


def test_renumbering_invariance(cable1_mesh):
    rng = np.random.default_rng(7)
    m = cable1_mesh
    perm = rng.permutation(m.n_nodes)          # new index of old node i is inv[i]
    inv = np.empty_like(perm)
    inv[perm] = np.arange(m.n_nodes)
    order = rng.permutation(m.n_triangles)
    shuffled = dataclasses.replace(
        m, nodes=m.nodes[perm], triangles=inv[m.triangles][order], tags=m.tags[order],
        part=m.part[perm], tri_part=m.tri_part[order], inner_ring=inv[m.inner_ring],
        outer_ring=inv[m.outer_ring], boundary_edges=inv[m.boundary_edges])
    a = solve(SystemSpec(m))
    b = solve(SystemSpec(shuffled))
    for x, y in zip(impedance(a), impedance(b)):
        assert x == pytest.approx(y, rel=1e-8)
    for x, y in zip(loss_factors(region_losses(a)), loss_factors(region_losses(b))):
        assert x == pytest.approx(y, rel=1e-7)


def test_linear_system_structurally_symmetric(cable1_mesh):
    lin = assemble(SystemSpec(cable1_mesh))
    M = lin.matrix
    assert M.shape[0] == M.shape[1]
    assert abs(M - M.T).max() <= 1e-12 * abs(M).max()


# --- 2.5D ----------------------------------------------------------------------------------

def test_2p5d_balanced_loop_current(toy84):
    res = solve(SystemSpec(toy84, armor_treatment="series_circuit_2p5d"))
    assert abs(res.loop_current) <= 1e-6 * toy84.spec.phase_current
    for n in _wire_names(toy84):
        assert res.currents[n] == pytest.approx(res.loop_current, abs=1e-12)


def test_2p5d_equals_floating_wires_when_balanced(toy84):
    series = solve(SystemSpec(toy84, armor_treatment="series_circuit_2p5d"))
    floating = solve(SystemSpec(toy84, armor_bonding="open"))
    for x, y in zip(impedance(series), impedance(floating)):
        assert x == pytest.approx(y, rel=1e-8)
    for x, y in zip(loss_factors(region_losses(series)), loss_factors(region_losses(floating))):
        assert x == pytest.approx(y, rel=1e-6)


def test_2p5d_unbalanced_loop_matches_circuit_superposition(toy84):
    names = _wire_names(toy84)
    ia = np.array([1000.0, 0, 0], dtype=complex)
    series = solve(SystemSpec(toy84, currents=ia, armor_treatment="series_circuit_2p5d"))
    # open-circuit wire EMFs from phase a, and loop impedance from a unit loop current
    emf = solve(SystemSpec(toy84, currents=ia, armor_bonding="open"))
    unit = solve(SystemSpec(toy84, currents=np.zeros(3), armor_bonding="open",
                            region_currents={n: 1.0 for n in names}))
    expected = -sum(emf.u[n] for n in names) / sum(unit.u[n] for n in names)
    assert abs(series.loop_current) > 1e-3 * abs(ia[0])
    assert series.loop_current == pytest.approx(expected, rel=1e-8)


def test_2p5d_needs_conducting_armor(toy84):
    mats = default_materials(toy84.spec, armor_conductivity=0.0)
    with pytest.raises(CircuitError):
        solve(SystemSpec(toy84, mats, armor_treatment="series_circuit_2p5d"))


# --- periodic constraints --------------------------------------------------------------------

def test_rotated_theta_zero_equals_translate(toy_straight):
    disc = discretize(toy_straight)
    a = apply_periodic(toy_straight, disc, "periodic_translate")
    b = apply_periodic(toy_straight, disc, "periodic_rotated", theta=0.0)
    for f in ("dirichlet", "slaves", "masters", "coefficients"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_short_model_all_edges_matched(toy_short):
    disc = discretize(toy_short)
    cmap = apply_periodic(toy_short, disc, "periodic_rotated")
    n_top = len(np.unique(np.sort(np.vstack([toy_short.facets["zL_face"][:, p]
                                             for p in ([0, 1], [1, 2], [0, 2])]), axis=1), axis=0))
    assert len(cmap.slaves) == n_top
    # single-master pure matching: no master is a slave, slaves are distinct
    assert len(np.unique(cmap.slaves)) == len(cmap.slaves)
    assert not np.intersect1d(cmap.slaves, cmap.masters).size
    assert set(np.unique(cmap.coefficients)) <= {-1.0, 1.0}
    P, free = cmap.prolongation()
    assert np.all(np.diff(P.indptr) <= 1)


def test_inverse_rotation_returns_slaves(toy_short):
    theta = toy_short.plan.rotation_angle
    bottom = np.unique(toy_short.facets["z0_face"])
    top = np.unique(toy_short.facets["zL_face"])
    from cablefem.meshing import match_end_faces
    t, b, unmatched = match_end_faces(toy_short, theta)
    assert len(unmatched) == 0 and len(t) == len(top)
    # rotating each master back by -theta lands on its slave
    c, s = math.cos(-theta), math.sin(-theta)
    img = toy_short.nodes[t, :2]
    p = toy_short.nodes[b, :2]
    back = np.column_stack([c * img[:, 0] - s * img[:, 1], s * img[:, 0] + c * img[:, 1]])
    assert np.max(np.abs(back - p)) < 1e-9
    assert set(b.tolist()) == set(bottom.tolist())


def test_wrong_angle_raises_congruence(toy_short):
    disc = discretize(toy_short)
    with pytest.raises(CongruenceError):
        apply_periodic(toy_short, disc, "periodic_rotated", theta=0.123)


def test_constraint_chain_rejected(toy_short):
    disc = discretize(toy_short)
    cmap = apply_periodic(toy_short, disc, "periodic_rotated")
    chained = dataclasses.replace(cmap, masters=cmap.masters.copy())
    chained.masters[0] = cmap.slaves[1]
    with pytest.raises(CongruenceError):
        chained.prolongation()


# --- 3D --------------------------------------------------------------------------------------

def test_zero_excitation_3d(toy_straight):
    res = solve(SystemSpec(toy_straight, currents=np.zeros(3)))
    assert not np.any(res.field)


def test_straight_3d_invariants(toy_straight):
    res = solve(SystemSpec(toy_straight))
    assert res.stats["residual"] <= 1e-8
    assert power_balance(res) < 5e-3
    assert np.max(ampere_errors(res)) < 1e-2


# --- linear algebra and nonlinear materials ----------------------------------------------------

def test_identity_like_spd():
    n = 50
    A = sp.diags(np.linspace(1.0, 2.0, n)).tocsc()
    b = np.arange(1, n + 1, dtype=complex)
    x, stats = solve_linear(A, b)
    assert np.allclose(A @ x, b, rtol=0, atol=1e-12)
    assert stats["residual"] <= 1e-14


def test_zero_rhs_trivial():
    x, stats = solve_linear(sp.identity(5, format="csc"), np.zeros(5))
    assert not np.any(x) and stats["method"] == "trivial"


def test_breakdown_carries_best_residual():
    rng = np.random.default_rng(3)
    A = sp.random(300, 300, density=0.05, random_state=rng) + sp.identity(300)
    with pytest.raises(SolverBreakdown) as err:
        solve_linear(A, rng.standard_normal(300), tol=1e-30, method="iterative", max_iter=1)
    assert err.value.stats["residual"] > 0


def test_picard_field_dependent_armor():
    spec = builtin_spec("toy")
    mats = default_materials(spec, armor_permeability=PermeabilityModel.field_dependent(
        50.0, 300.0, 120.0, 4.0, 4.0))
    mesh = build_cross_section(spec, MeshControls(), mats)
    res = solve(SystemSpec(mesh, mats, balanced_currents(1000.0)))
    hist = res.stats["picard_history"]
    assert res.stats["picard_converged"]
    assert 3 < res.stats["picard_iterations"] <= 25
    assert all(b < a for a, b in zip(hist[2:], hist[3:]))


def test_picard_budget_exhaustion_reported():
    spec = builtin_spec("toy")
    mats = default_materials(spec, armor_permeability=PermeabilityModel.field_dependent(
        50.0, 300.0, 120.0, 4.0, 4.0))
    mesh = build_cross_section(spec, MeshControls(), mats)
    with pytest.raises(SolverBreakdown) as err:
        solve(SystemSpec(mesh, mats, balanced_currents(1000.0)), max_picard=2)
    assert len(err.value.stats["picard_history"]) == 2
