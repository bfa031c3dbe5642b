"""Command-line front end: plan, mesh, solve, sweep, compare and oracle runs.

Every file written here starts with comment lines holding the fully
resolved run configuration, so a result can be traced back to (and rerun
from) exactly the inputs that produced it. Main outputs contain no timing
or host data and are byte-identical across reruns; timing goes to a
separate ``*_timing.csv`` sidecar.

Exit codes: 0 success, 1 pipeline or solver failure, 2 invalid input.
``CABLEFEM_NUM_THREADS`` caps the BLAS / PARDISO thread pools.
"""
from __future__ import annotations

import argparse
import ast
import csv
import dataclasses
import io
import math
import os
import platform
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analytic_oracles import round_wire_ac_resistance, sheath_circuit_model
from .cable_model import (BUILTIN_SPECS, MU0, CableSpec, builtin_spec, default_materials,
                          load_spec, validate_spec)
from .em_solver import SolverBreakdown, SystemSpec, solve
from .meshing import (MeshControls, build_cross_section, build_single_wire, estimate_nodes,
                      quality_report, sweep, toy_controls, write_mesh)
from .postprocess import (QUANTITIES, REPORT_VERSION, CableReport, ComparisonError, build_report,
                          length_sweep, region_losses, sweep_csv)
from .twist_geometry import (STRATEGIES, NoFinitePeriodError, crossing_pitch, normalize_angle,
                             periodic_length, plan as make_plan)

EXIT_OK, EXIT_FAILURE, EXIT_INVALID = 0, 1, 2
MODELS = ("2d", "2.5d", "3d")
MESH_PRESETS = ("default", "toy", "toy_refined")
THREADS_ENV = "CABLEFEM_NUM_THREADS"


class InvalidInput(ValueError):
    pass


class StageError(RuntimeError):
    """A pipeline failure tagged with the stage it happened in."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    """Resolved inputs of one pipeline run.

    ``spec`` is a spec file path or a built-in name. ``model`` picks the 2D,
    2.5D (series-connected armor) or 3D solver; ``strategy`` only applies to
    3D. ``length_ratio`` sets L/CP for non-periodic runs; ``length`` overrides
    it with an absolute length (needed for untwisted cables).
    """

    spec: str
    model: str = "3d"
    strategy: str = "short_periodic"
    sheath_bonding: str = "solid"
    armor_bonding: str = "solid"
    length_ratio: float | None = None
    length: float | None = None
    untwisted: bool = False
    mesh_preset: str = "default"
    scale: float | None = None
    ring_nodes: int | None = None
    n_layers: int | None = None
    outer_boundary_factor: float | None = None
    min_angle: float | None = None
    min_circle_segments: int | None = None
    tol: float = 1e-8
    sigma_reg: float = 1e-3
    solver_method: str = "auto"
    max_picard: int = 25
    output_dir: str = "."
    reference: str | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidInput(f"model must be one of {MODELS}")
        if self.model == "3d" and self.strategy not in STRATEGIES:
            raise InvalidInput(f"strategy must be one of {STRATEGIES}")
        if self.mesh_preset not in MESH_PRESETS:
            raise InvalidInput(f"mesh preset must be one of {MESH_PRESETS}")
        for name in ("sheath_bonding", "armor_bonding"):
            if getattr(self, name) not in ("solid", "open"):
                raise InvalidInput(f"{name} must be 'solid' or 'open'")
        if self.model != "3d":
            # cross-section models have no twist strategy
            self.strategy = "none"

    @property
    def label(self) -> str:
        """Deterministic file stem: spec, model/strategy, bonding."""
        stem = self.spec if self.spec in BUILTIN_SPECS else Path(self.spec).stem
        kind = self.strategy if self.model == "3d" else self.model.replace(".", "p")
        if self.model == "3d" and self.strategy == "non_periodic":
            kind += f"_L{self.length_ratio:g}" if self.length is None else f"_{self.length:g}m"
        if self.untwisted:
            kind += "_untwisted"
        return f"{stem}_{kind}_{self.sheath_bonding}"

    def mesh_controls(self) -> MeshControls:
        if self.mesh_preset == "toy":
            base = toy_controls()
        elif self.mesh_preset == "toy_refined":
            base = toy_controls(level=1)
        else:
            base = MeshControls()
        changes = {k: v for k, v in (("scale", self.scale), ("ring_nodes", self.ring_nodes),
                                     ("outer_boundary_factor", self.outer_boundary_factor),
                                     ("min_angle", self.min_angle),
                                     ("min_circle_segments", self.min_circle_segments))
                   if v is not None}
        return base.replace(**changes) if changes else base

    def resolved(self) -> dict:
        """Flat, sorted mapping of every input (mesh controls expanded).

        The output directory is left out so results written to different
        places stay byte-identical.
        """
        d = dataclasses.asdict(self)
        del d["output_dir"]
        for k, v in dataclasses.asdict(self.mesh_controls()).items():
            d[f"mesh.{k}"] = v
        return {k: d[k] for k in sorted(d)}

    @classmethod
    def from_resolved(cls, values: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in names})

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        """Rebuild the config embedded in the header of an emitted file."""
        values = {k: _literal(v) for k, v in read_config(path).items()}
        if "spec" not in values:
            raise InvalidInput(f"{path}: no embedded config")
        values["spec"] = str(values["spec"])
        values.update(overrides)
        return cls.from_resolved(values)


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def resolve_spec(name: str) -> CableSpec:
    if name in BUILTIN_SPECS:
        return builtin_spec(name)
    path = Path(name)
    if not path.exists():
        raise InvalidInput(f"no spec file {name!r} (built-ins: {', '.join(BUILTIN_SPECS)})")
    try:
        return load_spec(path)
    except ValueError as exc:
        raise InvalidInput(f"{name}: {exc}") from exc


def _checked_spec(config: RunConfig) -> CableSpec:
    spec = resolve_spec(config.spec)
    problems = validate_spec(spec)
    if problems:
        raise InvalidInput("invalid cable spec:\n  " + "\n  ".join(problems))
    if config.untwisted:
        spec = spec.replace(core_lay_length=math.inf, armor_lay_length=math.inf)
    return spec


def _plan_for(config: RunConfig, spec: CableSpec, ring_nodes: int):
    length = config.length
    if config.strategy == "non_periodic" and length is None:
        if config.length_ratio is None:
            raise InvalidInput("non_periodic runs need --length-ratio or --length")
        cp = crossing_pitch(spec.armor_lay_length, spec.core_lay_length, spec.lay_relation)
        length = config.length_ratio * cp
    try:
        return make_plan(spec, config.strategy, length, ring_nodes=ring_nodes, n_layers=config.n_layers)
    except (ValueError, NoFinitePeriodError) as exc:
        raise InvalidInput(str(exc)) from exc


# --- pipeline ------------------------------------------------------------------------

def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except InvalidInput:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with stage attribution
        raise StageError(name, exc) from exc


def build_mesh(config: RunConfig, spec: CableSpec | None = None):
    """Cross-section (and swept volume for 3D); returns ``(mesh, plan_or_None)``."""
    spec = spec or _checked_spec(config)
    controls = config.mesh_controls()
    mesh2d = _stage("mesh", build_cross_section, spec, controls)
    if config.model != "3d":
        return mesh2d, None
    p = _plan_for(config, spec, mesh2d.ring_nodes)
    if p.ring_nodes != mesh2d.ring_nodes:
        # the plan rounded the ring count up to fit the model length
        mesh2d = _stage("mesh", build_cross_section, spec, controls.replace(ring_nodes=p.ring_nodes))
    return _stage("mesh", sweep, mesh2d, p), p


def run_pipeline(config: RunConfig, on_result=None) -> CableReport:
    """spec -> plan -> mesh -> solve -> post; failures carry the stage name.

    ``on_result`` is called with the raw solution after timing stops, for
    callers that need more than the report.
    """
    t0 = time.perf_counter()
    spec = _checked_spec(config)
    mesh, p = build_mesh(config, spec)
    treatment = {"2d": "plain_2d", "2.5d": "series_circuit_2p5d", "3d": "wires_3d"}[config.model]
    system = _stage("solve", SystemSpec, mesh, default_materials(spec),
                    sheath_bonding=config.sheath_bonding, armor_treatment=treatment,
                    armor_bonding=config.armor_bonding, sigma_reg=config.sigma_reg, tol=config.tol)
    result = _stage("solve", solve, system, config.solver_method, max_picard=config.max_picard)
    report = _stage("post", build_report, result, config.resolved(),
                    p.as_dict() if p is not None else {"strategy": config.model}, spec.name)
    report.stats["total_seconds"] = time.perf_counter() - t0
    if on_result is not None:
        on_result(result)
    return report


# --- file formats ----------------------------------------------------------------------

def _header(config: dict, title: str) -> str:
    lines = [f"# {REPORT_VERSION} {title}"]
    lines += [f"# config {k} = {config[k]}" for k in sorted(config)]
    return "\n".join(lines) + "\n"


def write_report(report: CableReport, out_dir: Path, label: str) -> list[Path]:
    """Main CSV (deterministic), text summary and timing sidecar."""
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{label}.csv"
    csv_path.write_text(report.to_csv())
    txt_path = out_dir / f"{label}.txt"
    txt_path.write_text(_strip_volatile(report.to_text()))
    timing = out_dir / f"{label}_timing.csv"
    rows = [("solve_seconds", f"{report.seconds:.6g}", "s"),
            ("machine", report.metadata.get("machine", platform.node()), "")]
    rows += [(f"solver.{k}", f"{v}", "") for k, v in sorted(report.stats.items())
             if isinstance(v, (int, float, str, bool))]
    timing.write_text(_header(report.config, "timing") + _csv_rows(rows))
    return [csv_path, txt_path, timing]


def _strip_volatile(text: str) -> str:
    # timings and host names belong in the sidecar, not in reproducible outputs
    keep = [ln for ln in text.splitlines() if not (ln.startswith("solver.") and "seconds" in ln)
            and not ln.startswith("meta.machine") and not ln.startswith("solver.total_seconds")]
    return "\n".join(keep) + "\n"


def _csv_rows(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "value", "unit"])
    w.writerows(rows)
    return buf.getvalue()


def write_failure(out_dir: Path, label: str, config: dict, err: BaseException) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{label}_failure.txt"
    stage = getattr(err, "stage", "input")
    cause = getattr(err, "cause", err)
    stats = getattr(cause, "stats", {}) or {}
    lines = [f"# {REPORT_VERSION} failure", f"stage: {stage}",
             f"error: {type(cause).__name__}: {cause}"]
    lines += [f"solver.{k}: {v}" for k, v in sorted(stats.items()) if isinstance(v, (int, float, str))]
    lines.append("config:")
    lines += [f"  {k} = {config[k]}" for k in sorted(config)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_quantities(path) -> dict:
    """Read a report CSV or a measurement file into ``{quantity: value}``.

    Measurement files are plain ``quantity value unit`` lines (commas or
    blanks); ``#`` starts a comment. ``I_s`` may be given directly; report
    files provide ``I_sheath0..2`` whose mean is used.
    """
    text = Path(path).read_text()
    values: dict = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in (line.split(",") if "," in line else line.split())]
        if parts[0] == "quantity":
            continue
        if len(parts) < 2:
            raise InvalidInput(f"{path}: expected 'quantity value [unit]', got {raw!r}")
        try:
            values[parts[0]] = float(parts[1])
        except ValueError:
            if parts[1] != "undefined":
                raise InvalidInput(f"{path}: bad value in {raw!r}") from None
    sheaths = [values[k] for k in ("I_sheath0", "I_sheath1", "I_sheath2") if k in values]
    if sheaths and "I_s" not in values:
        values["I_s"] = float(np.mean(sheaths))
    return values


def read_config(path) -> dict:
    """Config lines embedded in a file header (values as strings)."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("# config "):
            k, _, v = line[len("# config "):].partition(" = ")
            out[k] = v
    return out


def _timing(path) -> tuple[float | None, str | None]:
    p = Path(path)
    side = p.with_name(p.stem + "_timing.csv")
    if not side.exists():
        return None, None
    rows = {}
    for line in side.read_text().splitlines():
        if line.startswith("#") or line.startswith("quantity"):
            continue
        parts = next(csv.reader([line]))
        rows[parts[0]] = parts[1]
    t = rows.get("solve_seconds")
    return (float(t) if t is not None else None), rows.get("machine")


def compare_files(path_a, path_b) -> tuple[list[tuple], dict]:
    """Error table of ``path_a`` against reference ``path_b`` (Table 2/3/5 shape)."""
    a, b = read_quantities(path_a), read_quantities(path_b)
    cab_a, cab_b = read_config(path_a).get("spec"), read_config(path_b).get("spec")
    if cab_a and cab_b and Path(cab_a).stem != Path(cab_b).stem:
        raise ComparisonError(f"reports describe different cables: {cab_a} vs {cab_b}")
    rows = []
    for q in QUANTITIES:
        if q not in b or q not in a:
            continue
        ref, val = b[q], a[q]
        eps = None if ref == 0 else abs(val - ref) / abs(ref) * 100.0
        rows.append((q, val, ref, eps))
    if not rows:
        raise ComparisonError("the two files share no comparable quantity")
    (ta, ma), (tb, mb) = _timing(path_a), _timing(path_b)
    delta_t = None
    if ta is not None and tb is not None and ma == mb and tb > 0:
        delta_t = (tb - ta) / tb * 100.0
    return rows, {"delta_T": delta_t}


def comparison_csv(rows, extra: dict, header: dict) -> str:
    buf = io.StringIO()
    buf.write(_header(header, "comparison"))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "value", "reference", "eps_pct"])
    for q, val, ref, eps in rows:
        w.writerow([q, f"{val:.10e}", f"{ref:.10e}", "undefined" if eps is None else f"{eps:.6g}"])
    if extra.get("delta_T") is not None:
        w.writerow(["delta_T", "", "", f"{extra['delta_T']:.6g}"])
    return buf.getvalue()


def comparison_text(rows, extra: dict) -> str:
    lines = [f"{'quantity':10s} {'value':>14s} {'reference':>14s} {'eps %':>10s}"]
    for q, val, ref, eps in rows:
        e = "undefined" if eps is None else f"{eps:.4g}"
        lines.append(f"{q:10s} {val:14.6g} {ref:14.6g} {e:>10s}")
    if extra.get("delta_T") is not None:
        lines.append(f"{'delta_T':10s} {'':14s} {'':14s} {extra['delta_T']:10.4g}")
    return "\n".join(lines) + "\n"


def gnuplot_script(csv_name: str) -> str:
    return (f"# plot the L/CP sweep written to {csv_name}\n"
            "set datafile separator ','\n"
            "set xlabel 'L / CP'\nset ylabel 'error (%)'\nset key top right\n"
            f"plot '{csv_name}' using 1:2 with linespoints title 'lambda1', \\\n"
            f"     '{csv_name}' using 1:3 with linespoints title 'lambda2'\n")


# --- thread control ----------------------------------------------------------------------

def _thread_limit():
    n = os.environ.get(THREADS_ENV)
    if not n:
        return None
    try:
        count = int(n)
    except ValueError:
        raise InvalidInput(f"{THREADS_ENV} must be an integer (got {n!r})") from None
    if count < 1:
        raise InvalidInput(f"{THREADS_ENV} must be >= 1")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(count)


# --- commands ------------------------------------------------------------------------------

def cmd_plan(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    spec = _checked_spec(config)
    controls = config.mesh_controls()
    lines = [f"cable: {spec.name}"]
    if spec.twisted:
        cp = crossing_pitch(spec.armor_lay_length, spec.core_lay_length, spec.lay_relation)
        lines.append(f"CP = {cp:.6g} m")
        try:
            lines.append(f"LCM = {periodic_length(spec.armor_lay_length, spec.core_lay_length):.6g} m")
        except NoFinitePeriodError as exc:
            lines.append(f"LCM = undefined ({exc})")
    if config.model == "3d":
        from .meshing import default_ring_nodes
        m = controls.ring_nodes or default_ring_nodes(spec)
        p = _plan_for(config, spec, m)
        lines += [f"theta = {p.rotation_angle:.6g} rad (normalized {normalize_angle(p.rotation_angle):.6g})",
                  f"L = {p.model_length:.6g} m ({p.strategy}, {p.boundary_mode})",
                  f"n_layers = {p.n_layers}", f"ring_nodes = {p.ring_nodes}"]
        per_layer = estimate_nodes(spec, controls)["total"]
        nodes = per_layer * (p.n_layers + 1)
        lines.append(f"estimated nodes = {nodes}")
        lines.append(f"estimated edge DoFs = {7 * nodes}")
    else:
        est = estimate_nodes(spec, controls)
        lines.append(f"estimated nodes = {est['total']}")
    out.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_mesh(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    mesh, _ = build_mesh(config)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{config.label}.mesh"
    write_mesh(mesh, path)
    if config.model == "3d":
        q = quality_report(mesh)
        out.write("\n".join(f"{k} = {v}" for k, v in q.items()) + "\n")
    else:
        out.write(f"n_nodes = {mesh.n_nodes}\nn_triangles = {mesh.n_triangles}\n")
    out.write(f"wrote {path}\n")
    return EXIT_OK


def cmd_solve(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    report = run_pipeline(config)
    if config.reference:
        ref = read_quantities(config.reference)
        report.reference = {f"eps_{q}": (None if ref.get(q, 0) == 0 else
                                         abs(report.quantity(q) - ref[q]) / abs(ref[q]) * 100.0)
                            for q in QUANTITIES if q in ref}
    paths = write_report(report, Path(config.output_dir), config.label)
    out.write(_strip_volatile(report.to_text()))
    out.write("".join(f"wrote {p}\n" for p in paths))
    return EXIT_OK


def _sweep_point(args) -> dict:
    config, ratio = args
    cfg = dataclasses.replace(config, strategy="non_periodic", length_ratio=ratio, length=None)
    r = run_pipeline(cfg)
    return {"lambda1": r.lambda1, "lambda2": r.lambda2}


def cmd_sweep(config: RunConfig, ratios, jobs: int = 1, out=None) -> int:
    out = out or sys.stdout
    if config.model != "3d":
        raise InvalidInput("length sweeps need the 3D model")
    if config.reference:
        ref = read_quantities(config.reference)
    else:
        ref_cfg = dataclasses.replace(config, strategy="full_periodic", length_ratio=None, length=None)
        r = run_pipeline(ref_cfg)
        ref = {"lambda1": r.lambda1, "lambda2": r.lambda2}
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            done = dict(zip(ratios, pool.map(_sweep_point, [(config, x) for x in ratios])))
        rows = length_sweep(lambda x: done[x], ratios, ref)
    else:
        rows = length_sweep(lambda x: _sweep_point((config, x)), ratios, ref)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{Path(config.spec).stem}_sweep_{config.sheath_bonding}"
    header = dict(config.resolved(), ratios=" ".join(f"{x:g}" for x in ratios),
                  reference_lambda1=ref["lambda1"], reference_lambda2=ref["lambda2"])
    body = sweep_csv(rows)
    csv_path = out_dir / f"{stem}.csv"
    csv_path.write_text(_header(header, "length sweep") + "\n".join(
        ln for ln in body.splitlines() if not ln.startswith("#")) + "\n")
    gp = out_dir / f"{stem}.gp"
    gp.write_text(_header(header, "gnuplot") + gnuplot_script(csv_path.name))
    out.write(body)
    out.write(f"wrote {csv_path}\nwrote {gp}\n")
    failed = [r for r in rows if r["error"]]
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_compare(path_a, path_b, output_dir: str | None = None, out=None) -> int:
    out = out or sys.stdout
    for p in (path_a, path_b):
        if not Path(p).exists():
            raise InvalidInput(f"no such file {p!r}")
    rows, extra = compare_files(path_a, path_b)
    out.write(comparison_text(rows, extra))
    if output_dir:
        out_dir = Path(output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"compare_{Path(path_a).stem}_vs_{Path(path_b).stem}.csv"
        path.write_text(comparison_csv(rows, extra, {"a": str(path_a), "b": str(path_b)}))
        out.write(f"wrote {path}\n")
    return EXIT_OK


def cmd_oracle(kind: str, config: RunConfig, q_values=(0.3, 1.0, 3.0), out=None) -> int:
    """Closed-form references and, for ``skin``, the matching 2D solves."""
    out = out or sys.stdout
    spec = _checked_spec(config)
    mats = default_materials(spec)
    if kind == "skin":
        rows = [("q", "oracle_ohm_per_m", "fem_ohm_per_m", "eps_pct", "method")]
        for q in q_values:
            # pick the frequency that gives radius / skin depth = q
            f = q * q * 2.0 * mats.conductor_resistivity / (2 * math.pi * MU0 * spec.conductor_radius ** 2)
            s = spec.replace(frequency=f)
            ora = round_wire_ac_resistance(s.conductor_radius, mats.conductor_conductivity, 1.0, f)
            mesh = build_single_wire(s, config.mesh_controls(), mats)
            res = solve(SystemSpec(mesh, mats, currents=np.array([1.0, 0.0, 0.0]), frequency=f))
            fem = 2.0 * region_losses(res)["conductor0"]["joule"]
            rows.append((f"{q:g}", f"{ora.value:.10e}", f"{fem:.10e}",
                         f"{abs(fem - ora.value) / ora.value * 100:.4g}", ora.method))
        out.write("\n".join(",".join(r) for r in rows) + "\n")
        return EXIT_OK
    if kind == "sheath":
        c = spec.phase_circle_radius
        centers = [(c * math.cos(a), c * math.sin(a)) for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]
        from .em_solver import balanced_currents
        r_out = config.mesh_controls().outer_boundary_factor * spec.armor_radius
        res = sheath_circuit_model(centers, spec.sheath_radius, spec.sheath_thickness,
                                   mats.sheath_resistivity, balanced_currents(spec.phase_current),
                                   spec.frequency, r_out)
        out.write(f"I_s = {res.value:.6g} A (thin-tube circuit model, no armor)\n")
        out.write(f"sheath loss = {res.extra['sheath_loss']:.6g} W/m\n")
        for w in res.extra["warnings"]:
            out.write(f"warning: {w}\n")
        return EXIT_OK
    raise InvalidInput(f"unknown oracle {kind!r}; choose 'skin' or 'sheath'")


# --- argument parsing --------------------------------------------------------------------

def _add_run_args(p: argparse.ArgumentParser, model_default: str = "3d") -> None:
    p.add_argument("spec", nargs="?", help="spec file or built-in name (" + ", ".join(BUILTIN_SPECS) + ")")
    p.add_argument("--config", dest="config_file",
                   help="rerun from the config embedded in a previously written file")
    p.add_argument("--model", choices=MODELS, default=model_default)
    p.add_argument("--strategy", choices=STRATEGIES, default="short_periodic")
    p.add_argument("--bonding", dest="sheath_bonding", choices=("solid", "open"), default="solid",
                   help="sheath bonding")
    p.add_argument("--armor-bonding", choices=("solid", "open"), default="solid")
    p.add_argument("--length-ratio", type=float, help="L/CP for non_periodic runs")
    p.add_argument("--length", type=float, help="model length in m (overrides --length-ratio)")
    p.add_argument("--untwisted", action="store_true", help="drop both lays (straight cable)")
    p.add_argument("--mesh", dest="mesh_preset", choices=MESH_PRESETS, default="default")
    p.add_argument("--scale", type=float)
    p.add_argument("--ring-nodes", type=int)
    p.add_argument("--n-layers", type=int)
    p.add_argument("--outer-boundary-factor", type=float)
    p.add_argument("--min-angle", type=float)
    p.add_argument("--min-circle-segments", type=int)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--sigma-reg", type=float, default=1e-3)
    p.add_argument("--solver", dest="solver_method", choices=("auto", "direct", "superlu", "pardiso",
                                                               "iterative"), default="auto")
    p.add_argument("--max-picard", type=int, default=25)
    p.add_argument("-o", "--output-dir", default=".")
    p.add_argument("--reference", help="reference report or measurement file")


def _config_from(args) -> RunConfig:
    if args.config_file:
        return RunConfig.from_file(args.config_file, output_dir=args.output_dir)
    if args.spec is None:
        raise InvalidInput("give a spec (file or built-in name) or --config")
    names = {f.name for f in dataclasses.fields(RunConfig)}
    return RunConfig(**{k: v for k, v in vars(args).items() if k in names})


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cablefem", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    _add_run_args(sub.add_parser("plan", help="model length, rotation and size estimate"))
    _add_run_args(sub.add_parser("mesh", help="build and write the mesh"))
    _add_run_args(sub.add_parser("solve", help="run the full pipeline and write reports"))
    sw = sub.add_parser("sweep", help="non-periodic L/CP sweep against a periodic reference")
    _add_run_args(sw)
    sw.add_argument("--ratios", type=float, nargs="+", default=[0.5, 0.75, 1.25])
    sw.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    cp = sub.add_parser("compare", help="error table of one report against another or a measurement file")
    cp.add_argument("report")
    cp.add_argument("reference")
    cp.add_argument("-o", "--output-dir")
    orc = sub.add_parser("oracle", help="closed-form references")
    orc.add_argument("kind", choices=("skin", "sheath"))
    _add_run_args(orc, model_default="2d")
    orc.add_argument("--q", type=float, nargs="+", default=[0.3, 1.0, 3.0],
                     help="radius / skin depth values for the skin oracle")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    config = None
    try:
        limit = _thread_limit()
        try:
            if args.command == "compare":
                return cmd_compare(args.report, args.reference, args.output_dir)
            config = _config_from(args)
            if args.command == "plan":
                return cmd_plan(config)
            if args.command == "mesh":
                return cmd_mesh(config)
            if args.command == "solve":
                return cmd_solve(config)
            if args.command == "sweep":
                return cmd_sweep(config, args.ratios, args.jobs)
            return cmd_oracle(args.kind, config, args.q)
        finally:
            if limit is not None:
                limit.restore_original_limits()
    except (InvalidInput, ComparisonError, FileNotFoundError) as exc:
        print(f"cablefem: invalid input: {exc}", file=sys.stderr)
        if config is not None and args.command == "solve":
            write_failure(Path(config.output_dir), config.label, config.resolved(), exc)
        return EXIT_INVALID
    except (StageError, SolverBreakdown) as exc:
        print(f"cablefem: {exc}", file=sys.stderr)
        if config is not None:
            path = write_failure(Path(config.output_dir), config.label, config.resolved(), exc)
            print(f"cablefem: failure report written to {path}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as exc:  # noqa: BLE001 - unexpected: still report, exit 1
        traceback.print_exc()
        if config is not None:
            write_failure(Path(config.output_dir), config.label, config.resolved(), exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
