# %% [markdown]
# Toy cable (Cable 1 geometry, coarse mesh): the one-CP model with the
# rotated periodic condition against the full-period model, and the
# error of plain non-periodic models of various lengths. About 8 minutes
# and 2 GB on one core.

# %%
from cablefem.cli_report import RunConfig, run_pipeline
from cablefem.postprocess import axial_losses, compare

short = run_pipeline(RunConfig("toy", strategy="short_periodic", mesh_preset="toy"))
profile = {}
full = run_pipeline(RunConfig("toy", strategy="full_periodic", mesh_preset="toy"),
                    lambda res: profile.update(zip(("z", "loss"), axial_losses(res))))
err = compare(short, full)
for q in ("R", "X", "I_s", "lambda1", "lambda2"):
    print(f"{q:8s} short {short.quantity(q):.6g}  full {full.quantity(q):.6g}  eps {err['eps_' + q]:.2e} %")
print(f"time: short {short.seconds:.0f} s, full {full.seconds:.0f} s, reduction {err['delta_T']:.0f} %")

# %% [markdown]
# Armor loss along the full model: the pattern repeats every CP.

# %%
cp = full.plan["crossing_pitch"]
for z, p in zip(profile["z"][::6], profile["loss"][::6]):
    print(f"z/CP {z / cp:5.2f}  armor loss {p:.4e} W/m  " + "#" * int(40 * p / profile["loss"].max()))

# %% [markdown]
# Non-periodic models of length L (ends with n x A = 0).

# %%
for ratio in (0.25, 0.5, 0.75, 1.25):
    rep = run_pipeline(RunConfig("toy", strategy="non_periodic", length_ratio=ratio, mesh_preset="toy"))
    ref = short if rep.plan["ring_nodes"] == short.plan["ring_nodes"] else run_pipeline(
        RunConfig("toy", strategy="short_periodic", mesh_preset="toy", ring_nodes=rep.plan["ring_nodes"]))
    e = compare(rep, ref)
    print(f"L/CP {ratio:4.2f}: eps_lambda1 {e['eps_lambda1']:5.2f} %  eps_lambda2 {e['eps_lambda2']:5.2f} %")
