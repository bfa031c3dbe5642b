# %% [markdown]
# 2D (straight cable) results for Cable 1 and the closed-form checks that
# back them: round-wire skin effect, the thin-sheath circuit model, and the
# series-connected armor loop. About half a minute.

# %%
import math

import numpy as np

from cablefem import PermeabilityModel, builtin_spec
from cablefem.analytic_oracles import round_wire_ac_resistance, sheath_circuit_model
from cablefem.cable_model import MU0, default_materials
from cablefem.em_solver import SystemSpec, balanced_currents, solve
from cablefem.meshing import MeshControls, build_cross_section, build_single_wire
from cablefem.postprocess import build_report, region_losses, sheath_current

spec = builtin_spec("cable1")
mesh = build_cross_section(spec, MeshControls())
print(f"{mesh.n_nodes} nodes, {mesh.n_triangles} triangles")
rep = build_report(solve(SystemSpec(mesh)))
print(rep.to_text())

# %% [markdown]
# Skin effect of an isolated conductor, FEM against the Bessel solution.
# The frequency is picked so that radius / skin depth = q.

# %%
mats = default_materials(spec)
rc = spec.conductor_radius
for q in (0.3, 1.0, 3.0, 5.0):
    f = q * q * 2 * mats.conductor_resistivity / (2 * math.pi * MU0 * rc * rc)
    wire = build_single_wire(spec.replace(frequency=f), MeshControls(), mats)
    res = solve(SystemSpec(wire, mats, currents=np.array([1.0, 0, 0]), frequency=f))
    fem = 2 * region_losses(res)["conductor0"]["joule"]
    ora = round_wire_ac_resistance(rc, mats.conductor_conductivity, 1.0, f)
    print(f"q = {q:3.1f}: Rac/Rdc FEM {fem / ora.extra['r_dc']:.5f}  "
          f"exact {ora.extra['ratio']:.5f}  ({(fem - ora.value) / ora.value * 100:+.3f} %)")

# %% [markdown]
# Sheath currents without armor against the thin-tube circuit model.

# %%
bare = default_materials(spec, armor_conductivity=0.0, armor_permeability=PermeabilityModel.constant(1.0))
m2 = build_cross_section(spec, MeshControls(), bare)
fem = np.abs(sheath_current(solve(SystemSpec(m2, bare))))
c = spec.phase_circle_radius
centers = [(c * math.cos(a), c * math.sin(a)) for a in (0, 2 * math.pi / 3, 4 * math.pi / 3)]
ora = sheath_circuit_model(centers, spec.sheath_radius, spec.sheath_thickness, bare.sheath_resistivity,
                           balanced_currents(spec.phase_current), spec.frequency, m2.outer_radius)
print("FEM     ", fem)
print("circuit ", np.abs(ora.extra["currents"]))

# %% [markdown]
# 2.5D: the armor wires in series. With balanced currents the loop current
# vanishes and the result equals floating (zero-current) wires.

# %%
series = solve(SystemSpec(mesh, armor_treatment="series_circuit_2p5d"))
print(f"loop current {abs(series.loop_current):.2e} A for |I| = {spec.phase_current:g} A")
unbal = solve(SystemSpec(mesh, currents=np.array([spec.phase_current, 0, 0]),
                         armor_treatment="series_circuit_2p5d"))
print(f"phase a only: loop current {abs(unbal.loop_current):.3g} A")
