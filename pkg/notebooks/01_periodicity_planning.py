# %% [markdown]
# Periodicity of the built-in cables: crossing pitch, full period (LCM of the
# two lay lengths) and the end-face rotation of the one-CP model.
# Runs in a few seconds.

# %%
import math

from cablefem import builtin_spec, crossing_pitch, periodic_length, plan
from cablefem.meshing import MeshControls, build_cross_section, end_face_congruence

for name in ("cable1", "cable2", "cable3", "cable4", "cable5"):
    s = builtin_spec(name)
    cp = crossing_pitch(s.armor_lay_length, s.core_lay_length, s.lay_relation)
    lcm = periodic_length(s.armor_lay_length, s.core_lay_length)
    p = plan(s, "short_periodic")
    print(f"{name}: CP {cp:.4f} m  LCM {lcm:g} m  theta {p.rotation_angle:+.4f} rad "
          f"({math.degrees(p.rotation_angle):+.1f} deg)  LCM/CP {lcm / cp:.1f}")

# %% [markdown]
# Cable 3's full period is 39.6 m, the exact rational LCM of 2.2 m and 3.6 m.
# Over one CP the cores turn by theta while the armor returns to an
# equivalent position, so the zL face is the z0 face rotated by theta.
# The check below builds only the two end planes.

# %%
s = builtin_spec("cable2")
m = build_cross_section(s, MeshControls())
rep = end_face_congruence(m, plan(s, "short_periodic", ring_nodes=m.ring_nodes))
print(rep)
