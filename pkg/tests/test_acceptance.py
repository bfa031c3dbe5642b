"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict that the terminal summary prints under
"acceptance criteria". Toy cable = Cable 1 geometry; coarse mesh =
``toy_controls()``, one refinement level = ``toy_controls(level=1)``.
"""
import gc
import io
import math

import numpy as np
import pytest

from cablefem import builtin_spec, crossing_pitch, periodic_length, plan
from cablefem.analytic_oracles import dc_resistance, round_wire_ac_resistance
from cablefem.cable_model import MU0, default_materials
from cablefem.cli_report import RunConfig, cmd_solve, run_pipeline
from cablefem.em_solver import SystemSpec, solve
from cablefem.meshing import MeshControls, build_cross_section, build_single_wire, end_face_congruence, toy_controls
from cablefem.postprocess import axial_losses, build_report, compare, region_losses

pytestmark = pytest.mark.slow

TOY_PHASE_CURRENT = builtin_spec("toy").phase_current
QUANTS = ("R", "X", "lambda1", "lambda2")
SOLVED = []          # (label, power balance, Ampere error) of every solved case


def _record(criteria, n, ok, text, gating=True):
    verdict = ("PASS" if ok else "FAIL") + ("" if gating else " (non-gating)")
    line = f"criterion {n:2d}: {verdict}  {text}"
    criteria[f"{n:02d}"] = line
    print(line)


def _run(label, config):
    rep = run_pipeline(config)
    SOLVED.append((label, rep.power_balance, rep.ampere_error))
    return rep


def _eps(rep, ref):
    e = compare(rep, ref)
    return {q: e[f"eps_{q}"] for q in QUANTS}


# --- 1 -------------------------------------------------------------------------------------

def test_criterion_01_geometry(criteria):
    table = {"cable2": (1.56, 14.0), "cable4": (1.89, 36.0), "cable5": (1.89, 36.0)}
    rows, ok = [], True
    for name, (cp_t, lcm_t) in table.items():
        s = builtin_spec(name)
        cp = crossing_pitch(s.armor_lay_length, s.core_lay_length, s.lay_relation)
        lcm = periodic_length(s.armor_lay_length, s.core_lay_length)
        ok &= round(cp, 2) == cp_t and abs(lcm - lcm_t) < 5e-4
        rows.append(f"{name} CP {cp:.3f} LCM {lcm:.3f}")
    c1, c3 = builtin_spec("cable1"), builtin_spec("cable3")
    cp1 = crossing_pitch(c1.armor_lay_length, c1.core_lay_length, c1.lay_relation)
    lcm3 = periodic_length(c3.armor_lay_length, c3.core_lay_length)
    ok &= abs(cp1 - 0.3) < 5e-4 and abs(lcm3 - 39.6) < 5e-4
    rows += [f"cable1 CP {cp1:.3f}", f"cable3 LCM {lcm3:.3f}"]
    _record(criteria, 1, ok, "; ".join(rows))
    assert ok


# --- 2 -------------------------------------------------------------------------------------

def test_criterion_02_end_face_congruence(criteria):
    ok, worst, rows = True, 0.0, []
    for name in ("cable1", "cable2", "cable3", "cable4", "cable5"):
        s = builtin_spec(name)
        m = build_cross_section(s, MeshControls())
        rep = end_face_congruence(m, plan(s, "short_periodic", ring_nodes=m.ring_nodes), tol=1e-9)
        full = all(rep[f"{k}_matched"] == rep[k] for k in ("nodes", "edges", "faces"))
        ok &= full and rep["max_distance"] <= 1e-9
        worst = max(worst, rep["max_distance"])
        rows.append(f"{name} {rep['edges_matched']}/{rep['edges']} edges")
    _record(criteria, 2, ok, f"max distance {worst:.1e} m; " + ", ".join(rows))
    assert ok


# --- 3 -------------------------------------------------------------------------------------

def test_criterion_03_oracle_equivalence(criteria):
    spec = builtin_spec("cable1")
    mats = default_materials(spec)
    rc = spec.conductor_radius
    errs = {}
    for q in (0.3, 1.0, 3.0):
        f = q * q * 2.0 * mats.conductor_resistivity / (2 * math.pi * MU0 * rc * rc)
        s = spec.replace(frequency=f)
        mesh = build_single_wire(s, MeshControls(), mats)
        res = solve(SystemSpec(mesh, mats, currents=np.array([1.0, 0, 0]), frequency=f))
        fem = 2.0 * region_losses(res)["conductor0"]["joule"]
        ora = round_wire_ac_resistance(rc, mats.conductor_conductivity, 1.0, f).value
        errs[q] = abs(fem - ora) / ora * 100
    mesh = build_single_wire(spec, MeshControls(), mats)
    res = solve(SystemSpec(mesh, mats, currents=np.array([1.0, 0, 0]), frequency=1e-3))
    r_dc = 2.0 * region_losses(res)["conductor0"]["joule"]
    e_dc = abs(r_dc - dc_resistance(rc, mats.conductor_resistivity)) / dc_resistance(rc, mats.conductor_resistivity) * 100
    ok = max(errs.values()) < 1.0 and e_dc < 0.5
    _record(criteria, 3, ok, ", ".join(f"q={q:g}: {e:.3f}%" for q, e in errs.items()) + f", DC {e_dc:.3f}%")
    assert ok


# --- 4 -------------------------------------------------------------------------------------

def test_criterion_04_dimensional_reduction(criteria):
    r2 = _run("toy 2D untwisted", RunConfig("toy", model="2d", untwisted=True))
    r3 = _run("toy 3D untwisted", RunConfig("toy", untwisted=True, strategy="full_periodic",
                                             length=1e-3, n_layers=1))
    e = _eps(r3, r2)
    ok = all(e[q] < 1.0 for q in ("R", "X", "lambda1"))
    _record(criteria, 4, ok, ", ".join(f"eps_{q} {e[q]:.3f}%" for q in ("R", "X", "lambda1")))
    assert ok


# --- 5, 6 ------------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def coarse_runs():
    short = _run("toy short coarse", RunConfig("toy", strategy="short_periodic", mesh_preset="toy"))
    profile = {}

    def keep_profile(result):
        # armor loss profile of the full model for the CP-repetition check
        profile["z"], profile["loss"] = axial_losses(result)

    full = run_pipeline(RunConfig("toy", strategy="full_periodic", mesh_preset="toy"), keep_profile)
    SOLVED.append(("toy full coarse", full.power_balance, full.ampere_error))
    gc.collect()
    return short, full, (profile["z"], profile["loss"])


def test_criterion_05_zero_net_armor_current(criteria, coarse_runs):
    short, full, _ = coarse_runs
    i3d = max(max(abs(i) for i in r.wire_currents) for r in (short, full))
    toy84 = build_cross_section(builtin_spec("toy"), toy_controls(ring_nodes=84))
    res = solve(SystemSpec(toy84, armor_treatment="series_circuit_2p5d"))
    rep = build_report(res)
    SOLVED.append(("toy 2.5D", rep.power_balance, rep.ampere_error))
    loop = abs(res.loop_current)
    ok = i3d <= 1e-3 * TOY_PHASE_CURRENT and loop <= 1e-6 * TOY_PHASE_CURRENT
    _record(criteria, 5, ok, f"3D max |I_wire| {i3d:.2e} A (limit {1e-3 * TOY_PHASE_CURRENT:g}), "
                             f"2.5D loop {loop:.2e} A (limit {1e-6 * TOY_PHASE_CURRENT:g})")
    assert ok


def test_criterion_06_short_vs_full(criteria, coarse_runs):
    short, full, (z, loss) = coarse_runs
    e0 = _eps(short, full)
    dt0 = (full.seconds - short.seconds) / full.seconds * 100
    gc.collect()
    short1 = _run("toy short refined", RunConfig("toy", strategy="short_periodic", mesh_preset="toy_refined"))
    gc.collect()
    full1 = _run("toy full refined", RunConfig("toy", strategy="full_periodic", mesh_preset="toy_refined"))
    gc.collect()
    e1 = _eps(short1, full1)
    dt1 = (full1.seconds - short1.seconds) / full1.seconds * 100
    ok = (max(e0.values()) <= 2.0 and max(e1.values()) <= 0.5 and dt0 >= 50 and dt1 >= 50)
    fmt = lambda e: " ".join(f"{q} {e[q]:.1e}%" for q in QUANTS)   # noqa: E731
    _record(criteria, 6, ok, f"coarse [{fmt(e0)}] dT {dt0:.0f}%; refined [{fmt(e1)}] dT {dt1:.0f}%")
    assert ok


def test_full_model_armor_loss_repeats_every_cp(coarse_runs):
    _, full, (z, loss) = coarse_runs
    cp = full.plan["crossing_pitch"]
    n_cp = int(round(full.plan["model_length"] / cp))
    windows = np.array([loss[(z >= k * cp) & (z < (k + 1) * cp)].mean() for k in range(n_cp)])
    assert n_cp >= 2
    assert np.max(np.abs(windows - windows.mean())) / windows.mean() < 0.02


# --- 7 -------------------------------------------------------------------------------------

def test_criterion_07_non_periodic_thresholds(criteria):
    refs, eps = {}, {}
    for ratio in (0.5, 0.75, 1.25):
        rep = _run(f"toy non-periodic {ratio}", RunConfig("toy", strategy="non_periodic", length_ratio=ratio,
                                                          mesh_preset="toy_refined"))
        m = rep.plan["ring_nodes"]
        if m not in refs:
            # short periodic reference on the same cross-section (same ring count)
            refs[m] = _run(f"toy short refined M{m}", RunConfig("toy", strategy="short_periodic",
                                                                 mesh_preset="toy_refined", ring_nodes=m))
        eps[ratio] = _eps(rep, refs[m])
        gc.collect()
    checks = {"eps_lambda1(0.5) < 10%": eps[0.5]["lambda1"] < 10,
              "eps_lambda1(0.75) < 5%": eps[0.75]["lambda1"] < 5,
              "eps_lambda2(1.25) < 10%": eps[1.25]["lambda2"] < 10,
              "2% <= eps_lambda2(1.25)": eps[1.25]["lambda2"] >= 2}
    ok = all(checks.values())
    text = (f"eps_lambda1(0.5) {eps[0.5]['lambda1']:.2f}%, eps_lambda1(0.75) {eps[0.75]['lambda1']:.2f}%, "
            f"eps_lambda2(1.25) {eps[1.25]['lambda2']:.2f}%")
    failed = [k for k, v in checks.items() if not v]
    _record(criteria, 7, ok, text + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert ok, failed


# --- 9, 10 -------------------------------------------------------------------------------------

def test_criterion_09_cable2_best_effort(criteria):
    # a 3D short model of Cable 2 needs ~1.5M DoFs even at toy resolution (out-of-core
    # factorization); the finest cross-section models are what fits the suite budget
    rows, ok = [], True
    for model in ("2d", "2.5d"):
        rep = _run(f"cable2 {model}", RunConfig("cable2", model=model, scale=0.5))
        e_r = abs(rep.R - 0.0454) / 0.0454 * 100
        e_x = abs(rep.X - 0.118) / 0.118 * 100
        ok &= e_r <= 10 and e_x <= 10
        rows.append(f"{model} (scale 0.5): R {rep.R:.4f} ohm/km ({e_r:.1f}%), X {rep.X:.4f} ohm/km ({e_x:.1f}%)")
        assert np.isfinite(rep.R) and np.isfinite(rep.X)
    _record(criteria, 9, ok, "; ".join(rows) + "; cross-section models without lay, resolution-limited",
            gating=False)


def test_criterion_10_determinism(criteria, tmp_path):
    configs = [RunConfig("cable1", model="2d"),
               RunConfig("toy", strategy="non_periodic", length_ratio=0.5, mesh_preset="toy")]
    same = []
    for cfg in configs:
        outs = []
        for k in range(2):
            d = tmp_path / f"run{k}"
            cfg.output_dir = str(d)
            assert cmd_solve(cfg, out=io.StringIO()) == 0
            outs.append((d / f"{cfg.label}.csv").read_bytes())
        same.append(outs[0] == outs[1])
    ok = all(same)
    _record(criteria, 10, ok, "2D cable1 and 3D toy reruns byte-identical" if ok else f"identical: {same}")
    assert ok


# --- 8 (runs last: checks every case solved above) ---------------------------------------------

def test_criterion_08_power_balance_and_ampere(criteria):
    assert SOLVED
    worst_pb = max(SOLVED, key=lambda r: r[1])
    worst_amp = max(SOLVED, key=lambda r: r[2])
    ok = worst_pb[1] < 5e-3 and worst_amp[2] < 1e-2
    _record(criteria, 8, ok, f"{len(SOLVED)} cases; worst power balance {worst_pb[1]:.1e} ({worst_pb[0]}), "
                             f"worst Ampere {worst_amp[2]:.1e} ({worst_amp[0]})")
    assert ok
