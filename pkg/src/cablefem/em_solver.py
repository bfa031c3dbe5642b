"""Frequency-domain eddy-current solver on 2D and swept 3D meshes.

2D: nodal A_z on triangles. 3D: lowest-order Whitney edge elements on the
tetrahedra of the swept mesh (three per prism, see :mod:`cablefem.meshing`).

Every conducting region carries a uniform applied field ``U`` (V/m, along z).
Inside a conductor ``E = -j*omega*A + U*e_z`` and the net current is

    I_k = (1/L) * integral_k sigma * E_z dV

Phase conductors get their imposed current; sheaths and wires are either
grounded (``U = 0``, solid bonding) or floating (``I = 0``, open circuit). The
2.5D variant puts all armor wires in one series loop. The current rows are
scaled by ``1/(j*omega)`` so the coupled matrix is complex symmetric.

Nonconducting regions get a small artificial conductivity ``sigma_reg`` in
3D to fix the curl-curl null space; its dissipation is reported separately.
"""
from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _pardiso
from .cable_model import MU0, MaterialSet, complex_permeability, default_materials
from .meshing import (TAG_AIR, TAG_FILLER, TAG_WIRE0, TET_EDGES, Mesh2D, Mesh3D,
                      match_end_faces)

BONDINGS = ("solid", "open")
ARMOR_TREATMENTS = ("wires_3d", "series_circuit_2p5d", "plain_2d")


class CircuitError(ValueError):
    pass


class CongruenceError(ValueError):
    pass


class SolverBreakdown(RuntimeError):
    def __init__(self, message: str, stats: dict | None = None):
        super().__init__(message)
        self.stats = stats or {}


def balanced_currents(magnitude: float, phase_shift: float = 0.0) -> np.ndarray:
    """Positive-sequence phasors ``|I|`` at 0, -120 and +120 degrees."""
    ang = np.array([0.0, -2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0]) + phase_shift
    return magnitude * np.exp(1j * ang)


@dataclass
class SystemSpec:
    """Everything needed to assemble one problem.

    ``armor_bonding`` applies to ``plain_2d`` and ``wires_3d`` armor;
    ``armor_treatment`` defaults to ``plain_2d`` on 2D meshes and ``wires_3d``
    on 3D meshes. ``region_currents`` imposes net currents on open (current
    driven) sheath or wire regions by name, e.g. ``{"sheath1": 1.0}``.
    """

    mesh: Mesh2D | Mesh3D
    materials: MaterialSet | None = None
    currents: np.ndarray | None = None
    frequency: float | None = None
    sheath_bonding: str = "solid"
    armor_treatment: str | None = None
    armor_bonding: str = "solid"
    boundary_mode: str | None = None
    sigma_reg: float = 1e-3
    tol: float = 1e-8
    region_currents: dict | None = None

    def __post_init__(self):
        spec = self.mesh.mesh2d.spec if self.is_3d else self.mesh.spec
        self.spec = spec
        if self.materials is None:
            self.materials = default_materials(spec)
        if self.frequency is None:
            self.frequency = spec.frequency
        if self.currents is None:
            self.currents = balanced_currents(spec.phase_current)
        self.currents = np.asarray(self.currents, dtype=complex)
        if self.currents.shape != (3,):
            raise ValueError("currents must hold three phase phasors")
        if self.armor_treatment is None:
            self.armor_treatment = "wires_3d" if self.is_3d else "plain_2d"
        if self.boundary_mode is None:
            self.boundary_mode = self.mesh.plan.boundary_mode if self.is_3d else "none"
        if self.sheath_bonding not in BONDINGS or self.armor_bonding not in BONDINGS:
            raise ValueError(f"bonding must be one of {BONDINGS}")
        if self.armor_treatment not in ARMOR_TREATMENTS:
            raise ValueError(f"armor_treatment must be one of {ARMOR_TREATMENTS}")
        if self.is_3d and self.armor_treatment != "wires_3d":
            raise ValueError(f"{self.armor_treatment} needs a 2D mesh")
        if not self.is_3d and self.armor_treatment == "wires_3d":
            raise ValueError("wires_3d needs a 3D mesh")
        if not self.is_3d and self.boundary_mode != "none":
            raise ValueError("periodic boundary modes need a 3D mesh")
        if self.boundary_mode not in ("none", "periodic_translate", "periodic_rotated"):
            raise ValueError(f"unknown boundary mode {self.boundary_mode!r}")

    @property
    def is_3d(self) -> bool:
        return isinstance(self.mesh, Mesh3D)

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency


@dataclass
class Circuit:
    """Conducting region with its uniform-field unknown."""

    name: str
    tag: int
    sigma: float
    kind: str          # phase | sheath | wire
    mode: str          # current | grounded | series
    current: complex = 0.0


def circuits_for(system: SystemSpec) -> list[Circuit]:
    mats = system.materials
    names = system.mesh.region_names
    out = []
    for i in range(3):
        out.append(Circuit(names[i], i, mats.conductor_conductivity, "phase", "current",
                           complex(system.currents[i])))
    sheath_mode = "grounded" if system.sheath_bonding == "solid" else "current"
    for i in range(3):
        out.append(Circuit(names[3 + i], 3 + i, mats.sheath_conductivity, "sheath", sheath_mode))
    if mats.armor_conductivity > 0:
        if system.armor_treatment == "series_circuit_2p5d":
            wire_mode = "series"
        else:
            wire_mode = "grounded" if system.armor_bonding == "solid" else "current"
        for k in range(system.spec.armor_wire_count):
            out.append(Circuit(names[TAG_WIRE0 + k], TAG_WIRE0 + k, mats.armor_conductivity,
                               "wire", wire_mode))
    extra = dict(system.region_currents or {})
    for c in out:
        if c.name in extra:
            if c.mode != "current":
                raise CircuitError(f"{c.name} is not current driven; open its bonding to impose a current")
            c.current = complex(extra.pop(c.name))
    if extra:
        raise CircuitError(f"unknown or non-circuit regions in region_currents: {sorted(extra)}")
    present = set(np.unique(system.mesh.tags).tolist())
    for c in out:
        if c.tag not in present and c.current != 0:
            raise CircuitError(f"current imposed on {c.name}, which is not in the mesh")
    return [c for c in out if c.tag in present and c.sigma > 0]


def element_sigma(system: SystemSpec, tags: np.ndarray, regularize: bool) -> np.ndarray:
    mats = system.materials
    sig = np.zeros(len(tags))
    sig[tags < 3] = mats.conductor_conductivity
    sig[(tags >= 3) & (tags < 6)] = mats.sheath_conductivity
    sig[tags >= TAG_WIRE0] = mats.armor_conductivity
    if regularize:
        sig[(tags == TAG_FILLER) | (tags == TAG_AIR)] = system.sigma_reg
    return sig


def element_mu_r(system: SystemSpec, tags: np.ndarray, b_mag: np.ndarray | None = None) -> np.ndarray:
    mu = np.ones(len(tags), dtype=complex)
    wires = tags >= TAG_WIRE0
    model = system.materials.armor_permeability
    if b_mag is None:
        b_mag = np.zeros(len(tags))
    mu[wires] = complex_permeability(model, np.asarray(b_mag)[wires])
    return mu


# --- element kernels -----------------------------------------------------------

@dataclass
class FieldDiscretization:
    """Element data shared by assembly and post-processing."""

    dim: int
    n_field: int
    length: float
    measure: np.ndarray              # element area / volume
    dofs: np.ndarray                 # element -> field dof
    signs: np.ndarray                # orientation signs (ones in 2D)
    curls: np.ndarray                # (E, n_loc, 3) constant curls of basis functions
    mass_loc: np.ndarray             # (E, n_loc, n_loc) unit-coefficient mass
    zint_loc: np.ndarray             # (E, n_loc) integral of basis . e_z
    tags: np.ndarray
    edges: np.ndarray | None = None  # 3D: (n_edges, 2) node pairs


def _discretize_2d(mesh: Mesh2D) -> FieldDiscretization:
    p = mesh.nodes
    t = mesh.triangles
    x, y = p[t, 0], p[t, 1]
    b = np.column_stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]])
    c = np.column_stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]])
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    # B = curl(A_z e_z) = (dA/dy, -dA/dx)
    curls = np.zeros((len(t), 3, 3))
    curls[:, :, 0] = c / (2 * area[:, None])
    curls[:, :, 1] = -b / (2 * area[:, None])
    mass = (np.ones((3, 3)) + np.eye(3))[None] * (area / 12.0)[:, None, None]
    zint = np.repeat((area / 3.0)[:, None], 3, axis=1)
    return FieldDiscretization(2, len(p), 1.0, area, t, np.ones(t.shape), curls, mass, zint,
                               mesh.tags)


def tet_gradients(nodes: np.ndarray, tets: np.ndarray):
    """Barycentric gradients (T, 4, 3) and volumes (T,)."""
    x0 = nodes[tets[:, 0]]
    jac = np.stack([nodes[tets[:, k]] - x0 for k in (1, 2, 3)], axis=1)
    vol = np.linalg.det(jac) / 6.0
    inv = np.linalg.inv(jac)
    g = np.empty((len(tets), 4, 3))
    g[:, 1:, :] = np.transpose(inv, (0, 2, 1))
    g[:, 0, :] = -g[:, 1:, :].sum(axis=1)
    return g, vol


def _discretize_3d(mesh: Mesh3D) -> FieldDiscretization:
    tets = mesh.tets
    g, vol = tet_gradients(mesh.nodes, tets)
    loc = tets[:, TET_EDGES]                         # (T, 6, 2)
    signs = np.where(loc[:, :, 0] < loc[:, :, 1], 1.0, -1.0)
    key = np.sort(loc, axis=2).reshape(-1, 2)
    edges, inv = np.unique(key, axis=0, return_inverse=True)
    dofs = inv.reshape(-1, 6)
    i, j = TET_EDGES[:, 0], TET_EDGES[:, 1]
    gi, gj = g[:, i, :], g[:, j, :]
    curls = 2.0 * np.cross(gi, gj)
    gg = np.einsum("tpk,tqk->tpq", g, g)             # grad(l_p) . grad(l_q)
    lam = (np.ones((4, 4)) + np.eye(4)) / 20.0       # integral of l_p l_q over V
    mass = (gg[:, j[:, None], j[None, :]] * lam[i[:, None], i[None, :]]
            - gg[:, j[:, None], i[None, :]] * lam[i[:, None], j[None, :]]
            - gg[:, i[:, None], j[None, :]] * lam[j[:, None], i[None, :]]
            + gg[:, i[:, None], i[None, :]] * lam[j[:, None], j[None, :]]) * vol[:, None, None]
    zint = 0.25 * vol[:, None] * (gj[:, :, 2] - gi[:, :, 2])
    return FieldDiscretization(3, len(edges), mesh.length, vol, dofs, signs, curls, mass, zint,
                               mesh.tags, edges)


def discretize(mesh) -> FieldDiscretization:
    return _discretize_3d(mesh) if isinstance(mesh, Mesh3D) else _discretize_2d(mesh)


def _scatter(disc: FieldDiscretization, loc: np.ndarray) -> sp.csr_matrix:
    s = disc.signs
    vals = loc * s[:, :, None] * s[:, None, :]
    n = disc.dofs.shape[1]
    idx = disc.dofs.astype(np.int32)
    rows = np.repeat(idx, n, axis=1).ravel()
    cols = np.tile(idx, (1, n)).ravel()
    out = sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(disc.n_field, disc.n_field)).tocsr()
    out.sum_duplicates()
    return out


def _local_stiffness(disc: FieldDiscretization, nu: np.ndarray) -> np.ndarray:
    return np.einsum("tak,tbk->tab", disc.curls, disc.curls) * (nu * disc.measure)[:, None, None]


def stiffness(disc: FieldDiscretization, nu: np.ndarray) -> sp.csr_matrix:
    return _scatter(disc, _local_stiffness(disc, nu))


def mass(disc: FieldDiscretization, coeff: np.ndarray) -> sp.csr_matrix:
    return _scatter(disc, disc.mass_loc * coeff[:, None, None])


def region_coupling(disc: FieldDiscretization, tags: list[int]) -> sp.csc_matrix:
    """Columns: integral of basis . e_z over each region (signed)."""
    cols, rows, vals = [], [], []
    for col, tag in enumerate(tags):
        sel = np.flatnonzero(disc.tags == tag)
        rows.append(disc.dofs[sel].ravel())
        vals.append((disc.zint_loc[sel] * disc.signs[sel]).ravel())
        cols.append(np.full(rows[-1].size, col))
    if not tags:
        return sp.csc_matrix((disc.n_field, 0))
    return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(disc.n_field, len(tags)))


# --- constraints -----------------------------------------------------------------

@dataclass
class ConstraintMap:
    """Dirichlet DoFs plus slave -> (master, coefficient) pairs (pure matching)."""

    n_field: int
    dirichlet: np.ndarray
    slaves: np.ndarray
    masters: np.ndarray
    coefficients: np.ndarray

    def prolongation(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """Matrix P with full = P @ free and the index of each free DoF."""
        n = self.n_field
        kind = np.zeros(n, dtype=np.int8)
        kind[self.dirichlet] = 1
        kind[self.slaves] = 2
        free = np.flatnonzero(kind == 0)
        col_of = np.full(n, -1)
        col_of[free] = np.arange(len(free))
        rows = [free]
        cols = [np.arange(len(free))]
        vals = [np.ones(len(free))]
        if np.any(kind[self.masters] == 2):
            raise CongruenceError("constraint chain: a master is itself a slave")
        live = kind[self.masters] == 0
        rows.append(self.slaves[live])
        cols.append(col_of[self.masters[live]])
        vals.append(self.coefficients[live])
        P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, len(free)))
        return P, free


def _dirichlet_2d(mesh: Mesh2D) -> np.ndarray:
    return np.unique(mesh.boundary_edges)


def _edge_lookup(edges: np.ndarray, pairs: np.ndarray):
    """Index of each (sorted) node pair in the sorted edge table, -1 if absent."""
    n = int(edges.max()) + 1
    key = edges[:, 0] * n + edges[:, 1]
    q = np.sort(pairs, axis=1)
    qk = q[:, 0] * n + q[:, 1]
    pos = np.searchsorted(key, qk)
    pos = np.clip(pos, 0, len(key) - 1)
    return np.where(key[pos] == qk, pos, -1)


def _face_edges(disc: FieldDiscretization, faces: np.ndarray) -> np.ndarray:
    if len(faces) == 0:
        return np.zeros(0, dtype=np.int64)
    pairs = np.vstack([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [0, 2]]])
    return np.unique(_edge_lookup(disc.edges, pairs))


def apply_periodic(mesh: Mesh3D, disc: FieldDiscretization, mode: str, theta: float | None = None,
                   tol: float = 1e-9) -> ConstraintMap:
    """Constraint map for the end faces (plus lateral Dirichlet edges).

    ``periodic_translate`` and ``periodic_rotated`` slave every edge of the zL
    face to the image of its z0 partner with coefficient +-1. ``none`` makes
    both end faces Dirichlet (tangential A = 0), which lets the phase currents
    enter and leave through the end faces.
    """
    lateral = _face_edges(disc, mesh.facets["lateral"])
    if mode == "none":
        ends = _face_edges(disc, np.vstack([mesh.facets["z0_face"], mesh.facets["zL_face"]]))
        empty = np.zeros(0, dtype=np.int64)
        return ConstraintMap(disc.n_field, np.union1d(lateral, ends), empty, empty, np.zeros(0))
    if mode == "periodic_translate":
        theta = 0.0
    elif mode == "periodic_rotated":
        theta = mesh.plan.rotation_angle if theta is None else theta
    else:
        raise ValueError(f"unknown boundary mode {mode!r}")
    top, bottom, unmatched = match_end_faces(mesh, theta, tol * max(1.0, mesh.length))
    if len(unmatched):
        raise CongruenceError(f"{len(unmatched)} zL nodes have no image on z0 "
                              f"(first: {unmatched[:5].tolist()})")
    image = np.full(mesh.n_nodes, -1)
    image[top] = bottom
    top_edges = _face_edges(disc, mesh.facets["zL_face"])
    pairs = disc.edges[top_edges]
    mapped = image[pairs]
    masters = _edge_lookup(disc.edges, mapped)
    if np.any(masters < 0):
        raise CongruenceError("zL edge without a z0 partner edge")
    coef = np.where(mapped[:, 0] < mapped[:, 1], 1.0, -1.0)
    return ConstraintMap(disc.n_field, lateral, top_edges, masters, coef)


# --- linear system -----------------------------------------------------------------

@dataclass
class LinearSystem:
    """Reduced complex-symmetric system ``matrix @ y = rhs``.

    ``prolongation`` expands the field part of ``y`` to all field DoFs.
    Unknown layout: free field DoFs, then one ``U`` per non-grounded circuit,
    then the series loop current when present.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    prolongation: sp.csr_matrix
    constraints: ConstraintMap
    disc: FieldDiscretization
    circuits: list[Circuit]
    u_index: dict
    loop_index: int | None
    n_free: int
    stats: dict = field(default_factory=dict)


def _assemble(system: SystemSpec, disc: FieldDiscretization, cmap: ConstraintMap,
              nu: np.ndarray) -> LinearSystem:
    w = system.omega
    jw = 1j * w
    regularize = system.is_3d
    sigma = element_sigma(system, disc.tags, regularize)
    # one scatter for curl-curl plus eddy terms keeps the assembly peak low
    loc = _local_stiffness(disc, nu) + (jw * sigma)[:, None, None] * disc.mass_loc
    A = _scatter(disc, loc)
    del loc
    P, _ = cmap.prolongation()
    Ared = (P.T @ A @ P).tocsr()
    nf = Ared.shape[0]

    circuits = circuits_for(system)
    active = [c for c in circuits if c.mode != "grounded"]
    if system.armor_treatment == "series_circuit_2p5d" and not any(c.mode == "series" for c in active):
        raise CircuitError("series armor loop requested but the armor is nonconducting")
    tags = [c.tag for c in active]
    C = region_coupling(disc, tags)
    Cred = (P.T @ C).tocsc()
    sig = np.array([c.sigma for c in active])
    vol = np.array([disc.measure[disc.tags == c.tag].sum() for c in active])
    if np.any(vol <= 0):
        raise CircuitError("a circuit region has no elements")
    L = disc.length
    n_u = len(active)
    has_loop = any(c.mode == "series" for c in active)
    n_tot = nf + n_u + int(has_loop)

    coup = -(Cred @ sp.diags(sig))
    diag_u = sp.diags(sig * vol / jw)
    blocks = [[Ared, coup], [coup.T, diag_u]]
    M = sp.bmat(blocks, format="csr")
    rhs = np.zeros(n_tot, dtype=complex)
    for k, c in enumerate(active):
        if c.mode == "current":
            rhs[nf + k] = L * c.current / jw
    loop_index = None
    if has_loop:
        loop_index = n_tot - 1
        series = np.array([c.mode == "series" for c in active])
        col = np.zeros(n_u, dtype=complex)
        col[series] = -L / jw
        ext = sp.csr_matrix(np.concatenate([np.zeros(nf, dtype=complex), col])[:, None])
        M = sp.bmat([[M, ext], [ext.T, None]], format="csr")
        # loop row: sum of U over the wires = 0, scaled like the others
    u_index = {c.name: nf + k for k, c in enumerate(active)}
    return LinearSystem(M, rhs, P, cmap, disc, circuits, u_index, loop_index, nf)


def _constraints(system: SystemSpec, disc: FieldDiscretization) -> ConstraintMap:
    if system.is_3d:
        return apply_periodic(system.mesh, disc, system.boundary_mode)
    d = _dirichlet_2d(system.mesh)
    empty = np.zeros(0, dtype=np.int64)
    return ConstraintMap(disc.n_field, d, empty, empty, np.zeros(0))


def _nu(system: SystemSpec, tags: np.ndarray, b_mag=None) -> np.ndarray:
    return 1.0 / (MU0 * element_mu_r(system, tags, b_mag))


def assemble_2d(system: SystemSpec, nu: np.ndarray | None = None) -> LinearSystem:
    if system.is_3d:
        raise ValueError("assemble_2d needs a 2D mesh")
    disc = discretize(system.mesh)
    nu = _nu(system, disc.tags) if nu is None else nu
    return _assemble(system, disc, _constraints(system, disc), nu)


def assemble_2p5d(system: SystemSpec, nu: np.ndarray | None = None) -> LinearSystem:
    if system.armor_treatment != "series_circuit_2p5d":
        raise ValueError("assemble_2p5d needs armor_treatment='series_circuit_2p5d'")
    return assemble_2d(system, nu)


def assemble_3d(system: SystemSpec, nu: np.ndarray | None = None) -> LinearSystem:
    if not system.is_3d:
        raise ValueError("assemble_3d needs a 3D mesh")
    disc = discretize(system.mesh)
    nu = _nu(system, disc.tags) if nu is None else nu
    return _assemble(system, disc, _constraints(system, disc), nu)


def assemble(system: SystemSpec, nu: np.ndarray | None = None) -> LinearSystem:
    if system.is_3d:
        return assemble_3d(system, nu)
    if system.armor_treatment == "series_circuit_2p5d":
        return assemble_2p5d(system, nu)
    return assemble_2d(system, nu)


# --- solve -------------------------------------------------------------------------

def _core_budget_mb() -> int:
    """Memory the direct solver may keep its factor in before spilling to disk."""
    env = os.environ.get("CABLEFEM_MAX_CORE_MB")
    if env:
        return int(env)
    avail = os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE") / 2**20
    return max(512, int(0.6 * avail))


def solve_linear(matrix: sp.spmatrix, rhs: np.ndarray, tol: float = 1e-8, method: str = "auto",
                 max_iter: int = 2000) -> tuple[np.ndarray, dict]:
    """Solve a sparse (complex) system; the contract is the relative residual."""
    t0 = time.perf_counter()
    dtype = np.result_type(matrix.dtype, np.asarray(rhs).dtype, np.float64)
    A0 = sp.csc_matrix(matrix, dtype=dtype)
    rhs = np.asarray(rhs, dtype=dtype)
    n = A0.shape[0]
    stats = {"n": n, "nnz": int(A0.nnz)}
    if np.linalg.norm(rhs) == 0:
        stats.update(method="trivial", residual=0.0, iterations=0, seconds=0.0)
        return np.zeros(n, dtype=np.result_type(A0.dtype, rhs.dtype)), stats
    # symmetric diagonal equilibration; the residual is that of the scaled system,
    # whose rows have comparable magnitude across field and circuit unknowns
    diag = np.abs(A0.diagonal())
    scale = np.where(diag > 0, 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0)), 1.0)
    D = sp.diags(scale)
    A = (D @ A0 @ D).tocsc()
    b0 = rhs
    rhs = scale * rhs
    bnorm = np.linalg.norm(rhs)
    if method == "auto":
        method = "direct" if n < 2_000_000 else "iterative"
    if method == "direct":
        # PARDISO factors only the upper triangle of the complex symmetric
        # matrix; small systems and zero-diagonal (2.5D loop) ones use SuperLU
        use_mkl = n > 20_000 and _pardiso.available() and np.all(A.diagonal() != 0)
        method = "pardiso" if use_mkl else "superlu"
    if method in ("superlu", "pardiso"):
        if method == "pardiso":
            lu = _pardiso.ComplexSymmetricSolver(A, max_core_mb=_core_budget_mb())
            fill = lu.fill
            stats["out_of_core"] = lu.out_of_core
        else:
            lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
            fill = int(lu.L.nnz + lu.U.nnz)
        x = lu.solve(rhs)
        res = np.linalg.norm(A @ x - rhs) / bnorm
        it = 0
        while res > tol and it < 3:
            # iterative refinement
            x = x + lu.solve(rhs - A @ x)
            res = np.linalg.norm(A @ x - rhs) / bnorm
            it += 1
        if method == "pardiso":
            lu.free()
        stats.update(method=method, refinement_steps=it, fill=fill)
    elif method == "iterative":
        ilu = spla.spilu(A, drop_tol=1e-5, fill_factor=20)
        M = spla.LinearOperator(A.shape, ilu.solve, dtype=A.dtype)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.gmres(A, rhs, M=M, rtol=tol, restart=200, maxiter=max_iter,
                             callback=cb, callback_type="pr_norm")
        res = np.linalg.norm(A @ x - rhs) / bnorm
        it = count[0]
        stats.update(method="gmres+ilu", iterations=it, info=int(info))
    else:
        raise ValueError(f"unknown solver method {method!r}")
    x = scale * x
    stats["residual"] = float(res)
    stats["residual_unscaled"] = float(np.linalg.norm(A0 @ x - b0) / np.linalg.norm(b0))
    stats["seconds"] = time.perf_counter() - t0
    if not np.isfinite(res) or res > tol:
        raise SolverBreakdown(f"relative residual {res:.3e} above tolerance {tol:.1e}", stats)
    return x, stats


@dataclass
class SolveResult:
    """Solution of one problem plus per-region circuit quantities."""

    system: SystemSpec
    linear: LinearSystem
    field: np.ndarray                 # all field DoFs
    u: dict                           # circuit name -> U (V/m)
    currents: dict                    # circuit name -> net current (A)
    loop_current: complex | None
    nu: np.ndarray
    stats: dict

    @property
    def disc(self) -> FieldDiscretization:
        return self.linear.disc


def circuit_currents(system: SystemSpec, disc: FieldDiscretization, a: np.ndarray,
                     u: dict) -> dict:
    """Net current of every conducting region from the field solution."""
    w = system.omega
    out = {}
    for c in circuits_for(system):
        sel = disc.tags == c.tag
        za = np.einsum("ek,ek->e", disc.zint_loc[sel] * disc.signs[sel], a[disc.dofs[sel]]).sum()
        vol = disc.measure[sel].sum()
        out[c.name] = (c.sigma * (-1j * w * za + vol * u.get(c.name, 0.0))) / disc.length
    return out


def _solve_once(system: SystemSpec, nu: np.ndarray, method: str) -> SolveResult:
    t0 = time.perf_counter()
    lin = assemble(system, nu)
    t1 = time.perf_counter()
    y, stats = solve_linear(lin.matrix, lin.rhs, system.tol, method)
    stats["assembly_seconds"] = t1 - t0
    stats["n_field_dofs"] = lin.disc.n_field
    stats["n_free_dofs"] = lin.n_free
    a = lin.prolongation @ y[:lin.n_free]
    u = {name: complex(y[i]) for name, i in lin.u_index.items()}
    loop = complex(y[lin.loop_index]) if lin.loop_index is not None else None
    cur = circuit_currents(system, lin.disc, a, u)
    return SolveResult(system, lin, a, u, cur, loop, nu, stats)


def element_b(disc: FieldDiscretization, a: np.ndarray) -> np.ndarray:
    """Flux density phasor (E, 3), constant per element."""
    coef = a[disc.dofs] * disc.signs
    return np.einsum("ek,ekc->ec", coef, disc.curls)


def solve(system: SystemSpec, method: str = "auto", picard_tol: float = 1e-3,
          max_picard: int = 25) -> SolveResult:
    """Assemble and solve; field-dependent armor permeability uses Picard iteration.

    Each Picard step re-evaluates the armor permeability from the element
    average ``|B|`` of the previous iterate.
    """
    disc_tags = system.mesh.tags
    nu = _nu(system, disc_tags)
    result = _solve_once(system, nu, method)
    model = system.materials.armor_permeability
    if model.is_linear:
        result.stats["picard_iterations"] = 0
        return result
    history = []
    wires = disc_tags >= TAG_WIRE0
    mu_old = element_mu_r(system, disc_tags)
    for it in range(1, max_picard + 1):
        bmag = np.linalg.norm(element_b(result.disc, result.field), axis=1)
        mu_new = element_mu_r(system, disc_tags, bmag)
        change = float(np.max(np.abs(mu_new[wires] - mu_old[wires]) / np.abs(mu_old[wires])))
        history.append(change)
        if change < picard_tol:
            break
        mu_old = mu_new
        result = _solve_once(system, 1.0 / (MU0 * mu_new), method)
    result.stats["picard_iterations"] = len(history)
    result.stats["picard_history"] = history
    result.stats["picard_converged"] = history[-1] < picard_tol
    if not result.stats["picard_converged"]:
        raise SolverBreakdown(f"Picard iteration did not converge in {max_picard} steps "
                              f"(last relative mu change {history[-1]:.2e})", result.stats)
    return result
