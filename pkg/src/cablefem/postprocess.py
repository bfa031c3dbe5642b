"""Losses, loss factors, impedance and comparison metrics from a solution.

Peak phasors with ``e^{+j omega t}``: Joule loss ``1/2 * sigma * |E|^2``, armor
hysteresis-type loss ``omega/2 * Im(nu) * |B|^2`` and mean magnetic energy
``1/4 * Re(nu) * |B|^2``, each integrated and divided by the model length.
"""
from __future__ import annotations

import csv
import io
import math
import platform
from dataclasses import asdict, dataclass, field

import numpy as np

from .cable_model import CableSpec
from .em_solver import (TAG_AIR, TAG_FILLER, SolveResult, circuits_for,
                        element_b, element_sigma)
from .meshing import Mesh3D

REPORT_VERSION = "cablefem-report 1"
QUANTITIES = ("R", "X", "I_s", "lambda1", "lambda2")
LAMBDA_DEFINITION = "lambda = sum over regions / sum over the three conductors (totals)"


class UndefinedFactorError(ArithmeticError):
    pass


class SequenceError(ValueError):
    pass


class ComparisonError(ValueError):
    pass


# --- element integrals --------------------------------------------------------------

def _element_energy_terms(result: SolveResult):
    """Per-element ``int |E|^2``-type pieces and ``|B|^2 * measure``."""
    disc = result.disc
    a = result.field
    coef = a[disc.dofs] * disc.signs
    a2 = np.einsum("ep,epq,eq->e", coef.conj(), disc.mass_loc, coef).real
    az = np.einsum("ep,ep->e", disc.zint_loc, coef)
    b = element_b(disc, a)
    b2 = np.einsum("ec,ec->e", b.conj(), b).real * disc.measure
    return a2, az, b2


def element_joule(result: SolveResult) -> np.ndarray:
    """Joule loss per element (W), all conducting elements including regularized ones."""
    system = result.system
    disc = result.disc
    w = system.omega
    a2, az, _ = _element_energy_terms(result)
    u = np.zeros(len(disc.tags), dtype=complex)
    for c in circuits_for(system):
        u[disc.tags == c.tag] = result.u.get(c.name, 0.0)
    sigma = element_sigma(system, disc.tags, system.is_3d)
    # |-j w A + U|^2 integrated exactly with the element mass matrix
    e2 = w * w * a2 + np.abs(u) ** 2 * disc.measure + 2.0 * np.real(-1j * w * az * np.conj(u))
    return 0.5 * sigma * np.maximum(e2, 0.0)


def element_magnetic(result: SolveResult) -> tuple[np.ndarray, np.ndarray]:
    """(loss W, mean energy J) per element from the complex reluctivity."""
    _, _, b2 = _element_energy_terms(result)
    nu = result.nu
    loss = 0.5 * result.system.omega * np.maximum(nu.imag, 0.0) * b2
    energy = 0.25 * nu.real * b2
    return loss, energy


def region_losses(result: SolveResult) -> dict:
    """Loss per tagged region in W/m: ``{name: {"joule": .., "magnetic": ..}}``.

    Filler and air report zero; the dissipation of the artificial 3D
    conductivity is returned separately under ``"regularization"``.
    """
    disc = result.disc
    names = result.system.mesh.region_names
    joule = element_joule(result)
    mag, _ = element_magnetic(result)
    L = disc.length
    out = {}
    tags = disc.tags
    present = np.unique(tags)
    for tag in present:
        sel = tags == tag
        name = names[tag]
        if tag in (TAG_FILLER, TAG_AIR):
            out[name] = {"joule": 0.0, "magnetic": float(mag[sel].sum() / L)}
        else:
            out[name] = {"joule": float(joule[sel].sum() / L), "magnetic": float(mag[sel].sum() / L)}
    reg = (tags == TAG_FILLER) | (tags == TAG_AIR)
    out["regularization"] = {"joule": float(joule[reg].sum() / L), "magnetic": 0.0}
    return out


def total_losses(losses: dict) -> float:
    return float(sum(v["joule"] + v["magnetic"] for v in losses.values()))


def source_power(result: SolveResult) -> complex:
    """Complex power fed by the circuits, ``1/2 * sum U_k conj(I_k)`` (W/m, VA/m)."""
    s = 0j
    for name, u in result.u.items():
        s += 0.5 * u * np.conj(result.currents[name])
    return complex(s)


def magnetic_energy(result: SolveResult) -> float:
    """Time-averaged magnetic energy per metre (J/m)."""
    _, energy = element_magnetic(result)
    return float(energy.sum() / result.disc.length)


def power_balance(result: SolveResult, losses: dict | None = None) -> float:
    """Relative mismatch between dissipated and supplied active power."""
    losses = region_losses(result) if losses is None else losses
    p_src = source_power(result).real
    p = total_losses(losses)
    return abs(p - p_src) / max(abs(p_src), 1e-300)


def _group(losses: dict, prefix: str, part: str | None = None) -> float:
    tot = 0.0
    for name, v in losses.items():
        if name.startswith(prefix):
            tot += v["joule"] + v["magnetic"] if part is None else v[part]
    return tot


def loss_factors(losses: dict) -> tuple[float, float]:
    """(lambda1, lambda2) normalized by the total conductor loss."""
    p_c = _group(losses, "conductor")
    if not p_c > 0:
        raise UndefinedFactorError("conductor losses are zero: loss factors undefined")
    return _group(losses, "sheath") / p_c, _group(losses, "wire") / p_c


def _check_balanced(currents: np.ndarray, tol: float = 1e-9) -> float:
    i = np.asarray(currents, dtype=complex)
    mag = np.abs(i)
    if mag[0] == 0 or np.any(np.abs(mag - mag[0]) > tol * mag[0]):
        raise SequenceError("unbalanced excitation: sequence extraction is not supported")
    a = np.exp(2j * math.pi / 3)
    if abs(i[1] - i[0] / a) > tol * mag[0] or abs(i[2] - i[0] * a) > tol * mag[0]:
        raise SequenceError("excitation is not a positive-sequence set: sequence extraction "
                            "is not supported")
    return float(mag[0])


def impedance(result: SolveResult, losses: dict | None = None) -> tuple[float, float]:
    """Positive-sequence (R, X) in ohm/km."""
    i = _check_balanced(result.system.currents)
    losses = region_losses(result) if losses is None else losses
    p = total_losses(losses)
    w = magnetic_energy(result)
    r = 2.0 * p / (3.0 * i * i) * 1e3
    x = 4.0 * result.system.omega * w / (3.0 * i * i) * 1e3
    return r, x


def sheath_current(result: SolveResult) -> np.ndarray:
    """Net complex current of each sheath (A)."""
    return np.array([result.currents.get(f"sheath{k}", 0.0) for k in range(3)], dtype=complex)


def wire_currents(result: SolveResult) -> np.ndarray:
    n = result.system.spec.armor_wire_count
    return np.array([result.currents.get(f"wire{k}", 0.0) for k in range(n)], dtype=complex)


# --- Ampere check -----------------------------------------------------------------

def _bump(rho: np.ndarray, r0: float, r1: float) -> np.ndarray:
    """1 inside r0, 0 outside r1, smooth cosine step between."""
    t = np.clip((rho - r0) / (r1 - r0), 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(math.pi * t))


def ampere_circulation(result: SolveResult, phase: int) -> complex:
    """Current enclosed by a thick loop in the insulation around ``phase``.

    Evaluates ``int H . curl(v) dV / L`` with ``v = w e_z`` for a weight ``w``
    that is 1 on the conductor and 0 on the sheath, which by Ampere's law
    equals the phase current. In 3D ``v`` is the edge interpolant of
    ``w e_z`` so the identity is the discrete one the solver enforces.
    """
    system = result.system
    mesh = system.mesh
    mesh2d = mesh.mesh2d if system.is_3d else mesh
    disc = result.disc
    p2 = mesh2d.nodes
    t2 = mesh2d.triangles
    sel = mesh2d.tags == phase
    ar = mesh2d.areas()[sel]
    c = (p2[t2[sel]].mean(axis=1) * ar[:, None]).sum(axis=0) / ar.sum()
    rho = np.hypot(p2[:, 0] - c[0], p2[:, 1] - c[1])
    r0 = rho[np.unique(t2[sel])].max()
    r1 = rho[np.unique(t2[mesh2d.tags == 3 + phase])].min()
    w = _bump(rho, r0, r1)
    if system.is_3d:
        # rigid rotation of the core part keeps w attached to its node
        w = np.tile(w, mesh.n_layers + 1)
        a, b = disc.edges[:, 0], disc.edges[:, 1]
        dz = mesh.nodes[b, 2] - mesh.nodes[a, 2]
        v = dz * 0.5 * (w[a] + w[b])
        curl_v = np.einsum("ek,ekc->ec", v[disc.dofs] * disc.signs, disc.curls)
    else:
        x, y = p2[t2, 0], p2[t2, 1]
        bb = np.column_stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]])
        cc = np.column_stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]])
        area2 = (bb[:, 0] * cc[:, 1] - bb[:, 1] * cc[:, 0])[:, None]
        gx = np.einsum("ek,ek->e", w[t2], bb / area2)
        gy = np.einsum("ek,ek->e", w[t2], cc / area2)
        curl_v = np.column_stack([gy, -gx, np.zeros(len(t2))])
    h = element_b(disc, result.field) * (result.nu[:, None])
    return complex(np.einsum("ec,ec,e->", h, curl_v, disc.measure) / disc.length)


def ampere_errors(result: SolveResult) -> np.ndarray:
    """Relative Ampere-law mismatch for each phase."""
    out = []
    for k in range(3):
        i = result.system.currents[k]
        out.append(abs(ampere_circulation(result, k) - i) / abs(i) if i != 0 else 0.0)
    return np.array(out)


# --- axial distribution ----------------------------------------------------------

def axial_losses(result: SolveResult, prefix: str = "wire") -> tuple[np.ndarray, np.ndarray]:
    """Loss per layer (W/m) of all regions whose name starts with ``prefix``.

    Returns layer mid-heights and the loss density per unit length.
    """
    mesh = result.system.mesh
    if not isinstance(mesh, Mesh3D):
        raise ValueError("axial loss profiles need a 3D solution")
    names = mesh.region_names
    sel = np.array([names[t].startswith(prefix) for t in mesh.tags])
    joule = element_joule(result)
    mag, _ = element_magnetic(result)
    per = np.bincount(mesh.tet_layer[sel], weights=(joule + mag)[sel], minlength=mesh.n_layers)
    dz = mesh.length / mesh.n_layers
    return (np.arange(mesh.n_layers) + 0.5) * dz, per / dz


# --- reports --------------------------------------------------------------------

@dataclass
class CableReport:
    cable: str
    R: float
    X: float
    lambda1: float
    lambda2: float
    sheath_current: list
    wire_currents: list
    losses: dict
    plan: dict
    stats: dict
    config: dict = field(default_factory=dict)
    power_balance: float = math.nan
    ampere_error: float = math.nan
    reference: dict | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def I_s(self) -> float:
        return float(np.mean(np.abs(self.sheath_current))) if self.sheath_current else 0.0

    def quantity(self, name: str) -> float:
        return {"R": self.R, "X": self.X, "I_s": self.I_s, "lambda1": self.lambda1,
                "lambda2": self.lambda2}[name]

    @property
    def seconds(self) -> float:
        return float(self.stats.get("total_seconds", math.nan))

    def rows(self, include_timing: bool = False) -> list[tuple[str, str, str]]:
        """(quantity, value, unit) rows in a fixed order."""
        f = _fmt
        rows = [("R", f(self.R), "ohm/km"), ("X", f(self.X), "ohm/km"),
                ("lambda1", f(self.lambda1), "1"), ("lambda2", f(self.lambda2), "1")]
        for k, i in enumerate(self.sheath_current):
            rows.append((f"I_sheath{k}", f(abs(i)), "A"))
        if self.wire_currents:
            rows.append(("max_I_wire", f(max(abs(i) for i in self.wire_currents)), "A"))
        for name in sorted(self.losses):
            v = self.losses[name]
            rows.append((f"loss_joule:{name}", f(v["joule"]), "W/m"))
            rows.append((f"loss_magnetic:{name}", f(v["magnetic"]), "W/m"))
        rows.append(("power_balance", f(self.power_balance), "1"))
        rows.append(("ampere_error", f(self.ampere_error), "1"))
        if self.reference:
            for q in QUANTITIES:
                e = self.reference.get(f"eps_{q}")
                rows.append((f"eps_{q}", "undefined" if e is None else f(e), "%"))
            dt = self.reference.get("delta_T")
            if dt is not None and include_timing:
                rows.append(("delta_T", f(dt), "%"))
        if include_timing:
            rows.append(("solve_seconds", f(self.seconds), "s"))
        return rows

    def to_csv(self, include_timing: bool = False) -> str:
        buf = io.StringIO()
        buf.write(f"# {REPORT_VERSION}\n")
        for line in _config_lines(self.config):
            buf.write(f"# config {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value", "unit"])
        w.writerows(self.rows(include_timing))
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [REPORT_VERSION, f"cable: {self.cable}"]
        for k in ("strategy", "model_length", "boundary_mode", "crossing_pitch", "rotation_angle",
                  "n_layers", "ring_nodes"):
            if k in self.plan:
                lines.append(f"plan.{k}: {self.plan[k]}")
        lines.append(f"R = {self.R:.6g} ohm/km")
        lines.append(f"X = {self.X:.6g} ohm/km")
        lines.append(f"lambda1 = {self.lambda1:.6g}")
        lines.append(f"lambda2 = {self.lambda2:.6g}")
        lines.append(f"lambda definition: {LAMBDA_DEFINITION}")
        for k, i in enumerate(self.sheath_current):
            lines.append(f"I_sheath{k} = {abs(i):.6g} A")
        if self.wire_currents:
            lines.append(f"max |I_wire| = {max(abs(i) for i in self.wire_currents):.3e} A")
        lines.append("losses (W/m):")
        for name in sorted(self.losses):
            v = self.losses[name]
            lines.append(f"  {name:16s} joule {v['joule']:.6e}  magnetic {v['magnetic']:.6e}")
        lines.append(f"power balance mismatch = {self.power_balance:.3e}")
        lines.append(f"Ampere mismatch = {self.ampere_error:.3e}")
        for k in sorted(self.stats):
            if isinstance(self.stats[k], (int, float, str)):
                lines.append(f"solver.{k}: {self.stats[k]}")
        for k, v in sorted(self.metadata.items()):
            lines.append(f"meta.{k}: {v}")
        if self.reference:
            lines.append("errors against reference (%):")
            for q in QUANTITIES:
                e = self.reference.get(f"eps_{q}")
                lines.append(f"  eps_{q} = " + ("undefined (zero reference)" if e is None else f"{e:.4g}"))
            if self.reference.get("delta_T") is not None:
                lines.append(f"  delta_T = {self.reference['delta_T']:.4g}")
        lines.append("config:")
        lines += [f"  {line}" for line in _config_lines(self.config)]
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        d = asdict(self)
        d["sheath_current"] = [[c.real, c.imag] for c in np.asarray(self.sheath_current, complex)]
        d["wire_currents"] = [[c.real, c.imag] for c in np.asarray(self.wire_currents, complex)]
        return d


def _fmt(x: float) -> str:
    return f"{x:.10e}" if np.isfinite(x) else "nan"


def _config_lines(config: dict) -> list[str]:
    return [f"{k} = {config[k]}" for k in sorted(config)]


def build_report(result: SolveResult, config: dict | None = None, plan: dict | None = None,
                 cable: str | None = None) -> CableReport:
    """Collect every reported quantity from one solution."""
    losses = region_losses(result)
    try:
        r, x = impedance(result, losses)
    except SequenceError:
        r = x = math.nan
    l1, l2 = loss_factors(losses)
    system = result.system
    if plan is None and system.is_3d:
        plan = system.mesh.plan.as_dict()
    spec: CableSpec = system.spec
    amp = float(np.max(ampere_errors(result)))
    meta = {"lambda_definition": LAMBDA_DEFINITION,
            "outer_boundary_factor": _outer_factor(system),
            "regularization_loss_W_per_m": losses["regularization"]["joule"],
            "machine": platform.node()}
    return CableReport(cable or spec.name, r, x, l1, l2, list(sheath_current(result)),
                       list(wire_currents(result)) if any(n.startswith("wire") for n in result.currents)
                       else [], losses, plan or {}, dict(result.stats), dict(config or {}),
                       power_balance(result, losses), amp, None, meta)


def _outer_factor(system) -> float:
    mesh = system.mesh.mesh2d if system.is_3d else system.mesh
    return float(mesh.controls.outer_boundary_factor)


def compare(report: CableReport, reference: CableReport, same_machine: bool = True) -> dict:
    """Relative errors (%) of ``report`` against ``reference``.

    Zero reference values give ``None`` entries instead of a number.
    """
    if report.cable != reference.cable:
        raise ComparisonError(f"reports describe different cables: {report.cable} vs {reference.cable}")
    out = {}
    for q in QUANTITIES:
        ref = reference.quantity(q)
        val = report.quantity(q)
        out[f"eps_{q}"] = None if ref == 0 or not np.isfinite(ref) else abs(val - ref) / abs(ref) * 100.0
    if same_machine and report.metadata.get("machine") == reference.metadata.get("machine"):
        t, t_ref = report.seconds, reference.seconds
        out["delta_T"] = (t_ref - t) / t_ref * 100.0 if t_ref > 0 else None
    else:
        out["delta_T"] = None
    return out


def relative_errors(values: dict, reference: dict) -> dict:
    """``eps_q`` (%) for plain mappings of quantity -> value."""
    out = {}
    for q, ref in reference.items():
        out[f"eps_{q}"] = None if ref == 0 else abs(values[q] - ref) / abs(ref) * 100.0
    return out


def richardson(x_a: float, x_b: float, ratio: float = 2.0, order: float = 2.0) -> float:
    """Extrapolate a boundary-dependent quantity from outer factors f and ratio*f.

    Assumes the error decays like ``f**(-order)``.
    """
    k = ratio ** order
    return (k * x_b - x_a) / (k - 1.0)


def length_sweep(solve_ratio, ratios, reference: dict) -> list[dict]:
    """Run ``solve_ratio(ratio) -> {"lambda1": .., "lambda2": ..}`` for each ratio.

    Errors are relative to ``reference``; a failing point is recorded with its
    error message instead of aborting the sweep.
    """
    rows = []
    for r in ratios:
        try:
            vals = solve_ratio(r)
            e = relative_errors({k: vals[k] for k in ("lambda1", "lambda2")},
                                {k: reference[k] for k in ("lambda1", "lambda2")})
            rows.append({"ratio": r, "eps_lambda1": e["eps_lambda1"], "eps_lambda2": e["eps_lambda2"],
                         "lambda1": vals["lambda1"], "lambda2": vals["lambda2"], "error": ""})
        except Exception as exc:  # noqa: BLE001 - annotate, keep sweeping
            rows.append({"ratio": r, "eps_lambda1": None, "eps_lambda2": None, "lambda1": None,
                         "lambda2": None, "error": f"{type(exc).__name__}: {exc}"})
    return rows


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# {REPORT_VERSION} length sweep\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["L_over_CP", "eps_lambda1_pct", "eps_lambda2_pct", "lambda1", "lambda2", "error"])
    for r in rows:
        w.writerow([f"{r['ratio']:.6g}"] + ["" if r[k] is None else _fmt(r[k])
                                            for k in ("eps_lambda1", "eps_lambda2", "lambda1", "lambda2")]
                   + [r["error"]])
    return buf.getvalue()
