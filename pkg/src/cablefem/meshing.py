"""Cross-section meshing and the twisted sweep to a layered tetrahedral mesh.

The cross-section is cut by two concentric *sliding rings* in the filler gap
between the core bundle and the armor. Nodes inside the inner ring turn with
the cores, nodes outside the outer ring turn with the armor, and the
one-element-thick shell between the rings is re-connected from layer to layer.
The layer height is ``crossing_pitch / ring_nodes``, so the two parts slide by
exactly one ring step per layer and every shell slab is a straight prism in the
frame that turns with the cores. This keeps every element valid for any
relative rotation, and the end faces of a short model are exact rotated copies
of each other.

Prisms are split into three tetrahedra. The split is driven by a direction on
every cross-section edge (the quad diagonal runs from the bottom of the source
node to the top of the target node); directions are chosen so neighbouring
prisms always agree on shared faces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import triangle
from scipy.spatial import cKDTree

from .cable_model import CableSpec, MaterialSet, default_materials, skin_depth
from .twist_geometry import TwistPlan, armor_twist_rate, core_twist_rate

# region tags: conductors 0-2, sheaths 3-5, filler, air, then one per wire
TAG_FILLER = 6
TAG_AIR = 7
TAG_WIRE0 = 8

PART_CORE = 0
PART_ARMOR = 1
PART_SHELL = 2

# sliding rings as fractions of the gap between core bundle and armor; the
# shell sits closer to the cores because the armor wires touch the gap's
# outer edge all the way round while the sheaths touch the inner edge at
# three points only
RING_FRACTIONS = (0.2, 0.5)

_MESH_FORMAT = "cablefem-mesh 1"


class MeshBudgetError(ValueError):
    pass


class MeshQualityError(ValueError):
    pass


def conductor_tag(i: int) -> int:
    return i


def sheath_tag(i: int) -> int:
    return 3 + i


def wire_tag(k: int) -> int:
    return TAG_WIRE0 + k


def region_names(n_wires: int) -> tuple[str, ...]:
    names = [f"conductor{i}" for i in range(3)] + [f"sheath{i}" for i in range(3)]
    names += ["filler", "air"] + [f"wire{k}" for k in range(n_wires)]
    return tuple(names)


@dataclass(frozen=True)
class MeshControls:
    """Target element sizes (m) per region; ``None`` picks a default.

    ``scale`` multiplies every default size. The conductor gets an extra
    refined skin layer when its skin depth is below half its radius.
    """

    conductor_size: float | None = None
    sheath_size: float | None = None
    wire_size: float | None = None
    filler_size: float | None = None
    air_size: float | None = None
    scale: float = 1.0
    ring_nodes: int | None = None
    outer_boundary_factor: float = 4.0
    skin_elements: float = 3.0
    min_circle_segments: int = 8
    min_angle: float = 25.0
    node_budget: int = 400_000

    def replace(self, **changes) -> "MeshControls":
        return replace(self, **changes)


@dataclass(frozen=True)
class _Sizes:
    conductor: float
    skin: float
    skin_radius: float
    sheath: float
    wire: float
    filler: float
    air: float


def _resolve_sizes(spec: CableSpec, controls: MeshControls, mats: MaterialSet) -> _Sizes:
    k = controls.scale
    rc = spec.conductor_radius
    delta_c = skin_depth(mats.conductor_resistivity, spec.frequency)
    conductor = controls.conductor_size or k * rc / 5.0
    skin, skin_radius = conductor, 0.0
    if delta_c < 0.5 * rc:
        skin = min(conductor, delta_c / controls.skin_elements)
        skin_radius = max(rc - 2.0 * delta_c, rc / 4.0)
    sheath = controls.sheath_size or k * max(spec.sheath_thickness, 0.5e-3)
    wire = controls.wire_size or k * spec.wire_radius / 3.0
    filler = controls.filler_size or k * spec.sheath_outer_radius / 4.0
    air = controls.air_size or k * controls.outer_boundary_factor * spec.armor_radius / 12.0
    return _Sizes(conductor, skin, skin_radius, sheath, wire, filler, air)


def _max_area(h: float) -> float:
    return math.sqrt(3.0) / 4.0 * h * h


def _round_up_mod(n: int, modulus: int, residue: int) -> int:
    return n + (residue - n) % modulus


def _n_segments(radius: float, h: float, minimum: int) -> int:
    return max(minimum, int(math.ceil(2.0 * math.pi * radius / h)))


def _circle(center, radius: float, n: int, phase: float = 0.0, area_preserving: bool = True):
    """Polygon vertices of a circle; optionally scaled so the polygon keeps pi*r^2."""
    if area_preserving:
        radius = radius * math.sqrt(2.0 * math.pi / (n * math.sin(2.0 * math.pi / n)))
    t = phase + 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


class _PSLG:
    """Planar straight-line graph fed to the triangulator.

    Chains registered with ``protect`` must come out unsplit (sliding rings,
    sector seams). Triangulation first runs unrestricted, which gives better
    angles, and :meth:`triangulate` reports any Steiner points that landed on
    protected chains so the caller can react.
    """

    def __init__(self):
        self.vertices: list[np.ndarray] = []
        self.segments: list[np.ndarray] = []
        self.regions: list[list[float]] = []
        self.holes: list[list[float]] = []
        self.protected: list[tuple[str, np.ndarray]] = []
        self._count = 0

    def add_points(self, pts) -> np.ndarray:
        pts = np.asarray(pts, float)
        idx = np.arange(self._count, self._count + len(pts))
        self.vertices.append(pts)
        self._count += len(pts)
        return idx

    def add_chain(self, idx, closed: bool) -> None:
        idx = np.asarray(idx)
        seg = np.column_stack([idx[:-1], idx[1:]])
        if closed:
            seg = np.vstack([seg, [idx[-1], idx[0]]])
        self.segments.append(seg)

    def add_loop(self, pts) -> np.ndarray:
        idx = self.add_points(pts)
        self.add_chain(idx, closed=True)
        return idx

    def protect(self, label: str, pts, closed: bool = False) -> None:
        pts = np.asarray(pts, float)
        if closed:
            pts = np.vstack([pts, pts[:1]])
        self.protected.append((label, pts))

    def add_region(self, x: float, y: float, attr: int, h: float) -> None:
        self.regions.append([x, y, attr, _max_area(h)])

    def _run(self, min_angle: float, flags: str):
        data = {"vertices": np.vstack(self.vertices), "segments": np.vstack(self.segments),
                "regions": np.array(self.regions)}
        if self.holes:
            data["holes"] = np.array(self.holes)
        out = triangle.triangulate(data, f"pq{min_angle:g}Aa{flags}")
        tris = out["triangles"].astype(np.int64)
        attrs = np.rint(out["triangle_attributes"][:, 0]).astype(np.int64)
        return out["vertices"], tris, attrs

    def _splits(self, pts: np.ndarray) -> dict:
        """Steiner points lying on protected chains, by chain label."""
        new = pts[self._count:]
        found: dict = {}
        if not len(new):
            return found
        scale = np.abs(np.vstack(self.vertices)).max()
        for label, chain in self.protected:
            a, b = chain[:-1], chain[1:]
            ab = b - a
            d = new[:, None, :] - a[None, :, :]
            L2 = np.einsum("sk,sk->s", ab, ab)
            t = np.einsum("psk,sk->ps", d, ab) / L2
            perp = d - t[..., None] * ab[None]
            dist = np.linalg.norm(perp, axis=2)
            on = (dist < 1e-9 * scale) & (t > 1e-9) & (t < 1 - 1e-9)
            hit = on.any(axis=1)
            if hit.any():
                found.setdefault(label, []).append(new[hit])
        return {k: np.vstack(v) for k, v in found.items()}

    def triangulate(self, min_angle: float, allow_fallback: bool = True):
        """Return (points, triangles, attributes, splits).

        ``splits`` maps protected-chain labels to the Steiner points placed on
        them. If a chain labelled ``ring`` would be split, the run is repeated
        with boundary splitting disabled (slightly worse angles).
        """
        pts, tris, attrs = self._run(min_angle, "Q")
        splits = self._splits(pts)
        if splits and allow_fallback and any(k.startswith("ring") for k in splits):
            pts, tris, attrs = self._run(min_angle, "YQ")
            splits = self._splits(pts)
        return pts, tris, attrs, splits


def _graded_radii(r0: float, r1: float, h0: float, h1: float) -> np.ndarray:
    """Points from r0 to r1 whose spacing grows linearly from h0 towards h1."""
    pts = [r0]
    while True:
        r = pts[-1]
        t = (r - r0) / (r1 - r0)
        h = h0 + (h1 - h0) * t
        if r + 1.5 * h >= r1:
            break
        pts.append(r + h)
    pts.append(r1)
    return np.array(pts)


def _ray_radii(angle: float, r0: float, r1: float, h_max: float, circles, h_min: float,
               h_end: float | None = None) -> np.ndarray:
    """Radii along a ray whose spacing follows the distance to nearby circles.

    Boundary rays cannot be split by the triangulator, so they are graded
    here: spacing ``0.8 * distance`` clipped to ``[h_min, h_max]``, and
    growing from ``h_end`` at ``r1`` where the ray meets a ring.
    """
    d = np.array([math.cos(angle), math.sin(angle)])

    def spacing(r):
        p = r * d
        dist = min(abs(math.hypot(p[0] - cx, p[1] - cy) - rad) for (cx, cy), rad in circles)
        h = min(h_max, max(h_min, 0.8 * dist))
        if h_end is not None:
            h = min(h, h_end + 0.5 * (r1 - r))
        return h

    pts = [r0]
    while True:
        r = pts[-1]
        h = spacing(r)
        # look ahead so the step also respects the spacing where it lands
        h = min(h, spacing(min(r + h, r1)))
        if r + 1.2 * h >= r1:
            break
        pts.append(r + h)
    pts.append(r1)
    return np.array(pts)


# local region codes used inside sector meshes
_LOCAL_CONDUCTOR, _LOCAL_SHEATH, _LOCAL_FILLER, _LOCAL_WIRE, _LOCAL_NEAR, _LOCAL_FAR = 1, 2, 3, 4, 5, 6


def _core_sector(spec: CableSpec, s: _Sizes, r1: float, m: int, controls: MeshControls):
    """Triangulate the 120 degree sector around phase 0 bounded by the inner ring."""
    half = math.pi / 3.0
    c = (spec.phase_circle_radius, 0.0)
    rso = spec.sheath_outer_radius
    # closest approach of the ray to the phase-0 sheath
    gap = c[0] * math.sin(half) - rso
    ray_r = _ray_radii(half, 0.0, r1, s.filler, [(c, rso)], gap, 2.0 * math.pi * r1 / m)
    arc_t = -half + 2.0 * math.pi * np.arange(m // 3 + 1) / m
    arc = np.column_stack([r1 * np.cos(arc_t), r1 * np.sin(arc_t)])

    def build(ray_r):
        g = _PSLG()
        # boundary: origin -> ray at -60 deg -> arc -> ray at +60 deg -> origin
        lower = np.column_stack([ray_r * math.cos(-half), ray_r * math.sin(-half)])
        upper = np.column_stack([ray_r * math.cos(half), ray_r * math.sin(half)])[::-1]
        g.add_loop(np.vstack([lower, arc[1:-1], upper[:-1]]))
        g.protect("ray", lower)
        g.protect("ray", upper)
        g.protect("ring", arc)

        ms = controls.min_circle_segments
        rc, rsi = spec.conductor_radius, spec.sheath_inner_radius
        g.add_loop(_circle(c, rc, _n_segments(rc, min(s.skin, s.conductor), ms)))
        if s.skin_radius > 0:
            g.add_loop(_circle(c, s.skin_radius, _n_segments(s.skin_radius, s.conductor, ms)))
            g.add_region(c[0] + 0.5 * (s.skin_radius + rc), 0.0, _LOCAL_CONDUCTOR, s.skin)
        # multiple of 12 turned by half a segment: chord midpoints (not vertices)
        # face the neighbouring cores at +-150 degrees and the armor at 0
        n_sh = _round_up_mod(_n_segments(rso, s.sheath, ms), 12, 0)
        ph_sh = math.pi / n_sh
        g.add_loop(_circle(c, rsi, n_sh, ph_sh))
        g.add_loop(_circle(c, rso, n_sh, ph_sh))
        g.add_region(c[0], 0.0, _LOCAL_CONDUCTOR, s.conductor)
        g.add_region(c[0] + 0.5 * (rc + rsi), 0.0, _LOCAL_FILLER, min(s.filler, rsi - rc))
        g.add_region(c[0] + spec.sheath_radius, 0.0, _LOCAL_SHEATH, s.sheath)
        g.add_region(0.5 * (c[0] + rso + r1), 0.0, _LOCAL_FILLER, s.filler)
        return g

    return _mesh_with_seams(build, ray_r, controls.min_angle)


def _mesh_with_seams(build, ray_r: np.ndarray, min_angle: float, max_rounds: int = 8):
    """Triangulate a sector whose two bounding rays must carry identical points.

    Steiner points the triangulator puts on a ray are added to both rays and
    the sector is meshed again, until no ray is split.
    """
    for _ in range(max_rounds):
        g = build(ray_r)
        pts, tris, attrs, splits = g.triangulate(min_angle)
        if "ring" in splits:
            raise MeshQualityError("the triangulator had to split a sliding ring; "
                                   "use more ring nodes")
        if "ray" not in splits:
            return pts, tris, attrs
        extra = np.hypot(splits["ray"][:, 0], splits["ray"][:, 1])
        ray_r = np.unique(np.concatenate([ray_r, extra]))
    pts, tris, attrs = g._run(min_angle, "YQ")
    return pts, tris, attrs


def _wire_segments(rw: float, h: float, controls: MeshControls) -> int:
    # 2 mod 4 with a vertex on the radial line puts chord midpoints towards
    # the neighbouring wires
    return _round_up_mod(_n_segments(rw, h, max(6, controls.min_circle_segments)), 4, 2)


def _armor_sector(spec: CableSpec, s: _Sizes, r2: float, r_out: float, alpha_out: float,
                  m: int, controls: MeshControls):
    """Triangulate one 2*pi/N sector of the armor part around wire 0."""
    n_w = spec.armor_wire_count
    half = math.pi / n_w
    r_sep = spec.armor_outer_radius + spec.wire_radius
    radial0 = np.concatenate([_graded_radii(r2, r_sep, s.wire, s.wire)[:-1],
                              _graded_radii(r_sep, r_out, s.wire, s.air)])
    per = m // n_w
    arc_t = alpha_out + 2.0 * math.pi * np.arange(per + 1) / m
    n_outer = max(2, int(math.ceil(2.0 * half * r_out / s.air)))
    out_t = -half + 2.0 * half * np.arange(n_outer + 1) / n_outer
    outer = np.column_stack([r_out * np.cos(out_t), r_out * np.sin(out_t)])
    arc = np.column_stack([r2 * np.cos(arc_t), r2 * np.sin(arc_t)])[::-1]
    ra, rw = spec.armor_radius, spec.wire_radius

    def build(radial):
        g = _PSLG()
        lower = np.column_stack([radial * math.cos(-half), radial * math.sin(-half)])
        upper = np.column_stack([radial * math.cos(half), radial * math.sin(half)])[::-1]
        idx = g.add_loop(np.vstack([lower, outer[1:-1], upper, arc[1:-1]]))
        g.protect("ray", lower)
        g.protect("ray", upper)
        g.protect("ring", arc)
        # separation arc between near and far zones, ending on the two rays
        n_sep = max(2, int(math.ceil(2.0 * half * r_sep / s.filler)))
        sep_t = -half + 2.0 * half * np.arange(1, n_sep) / n_sep
        j_low = int(np.argmin(np.abs(radial - r_sep)))
        j_up = len(lower) + (len(outer) - 2) + (len(radial) - 1 - j_low)
        mid = g.add_points(np.column_stack([r_sep * np.cos(sep_t), r_sep * np.sin(sep_t)]))
        g.add_chain(np.concatenate([[idx[j_low]], mid, [idx[j_up]]]), closed=False)
        g.add_loop(_circle((ra, 0.0), rw, _wire_segments(rw, s.wire, controls)))
        g.add_region(ra, 0.0, _LOCAL_WIRE, s.wire)
        g.add_region(0.5 * (r2 + spec.armor_inner_radius), 0.0, _LOCAL_NEAR, s.wire)
        g.add_region(0.5 * (r_sep + r_out), 0.0, _LOCAL_FAR, s.air)
        return g

    return _mesh_with_seams(build, radial0, controls.min_angle)


def _armor_annulus(spec: CableSpec, s: _Sizes, r2: float, r_out: float, alpha_out: float,
                   m: int, controls: MeshControls):
    """Triangulate the whole armor part in one go (no rotational symmetry)."""
    n_w = spec.armor_wire_count
    r_sep = spec.armor_outer_radius + spec.wire_radius
    g = _PSLG()
    t = alpha_out + 2.0 * math.pi * np.arange(m) / m
    ring = np.column_stack([r2 * np.cos(t), r2 * np.sin(t)])
    g.add_loop(ring)
    g.protect("ring", ring, closed=True)
    g.add_loop(_circle((0.0, 0.0), r_out, _n_segments(r_out, s.air, 24), area_preserving=False))
    g.add_loop(_circle((0.0, 0.0), r_sep, _n_segments(r_sep, s.filler, 24), area_preserving=False))
    ra, rw = spec.armor_radius, spec.wire_radius
    n_seg = _wire_segments(rw, s.wire, controls)
    for k in range(n_w):
        a = 2.0 * math.pi * k / n_w
        cx, cy = ra * math.cos(a), ra * math.sin(a)
        g.add_loop(_circle((cx, cy), rw, n_seg, phase=a))
        g.add_region(cx, cy, _LOCAL_WIRE + 100 * (k + 1), s.wire)
    a = math.pi / n_w
    rn = 0.5 * (r2 + spec.armor_inner_radius)
    g.add_region(rn * math.cos(a), rn * math.sin(a), _LOCAL_NEAR, s.wire)
    g.add_region(0.5 * (r_sep + r_out), 0.0, _LOCAL_FAR, s.air)
    g.holes.append([0.0, 0.0])
    pts, tris, attrs, splits = g.triangulate(controls.min_angle)
    if "ring" in splits:
        raise MeshQualityError("the triangulator had to split the outer sliding ring")
    return pts, tris, attrs


def _replicate(pts, tris, attrs, copies: int, tol: float):
    """Rotate a sector mesh ``copies`` times around the origin and merge seams."""
    all_pts, all_tris, all_attr, all_copy = [], [], [], []
    n = len(pts)
    for c in range(copies):
        a = 2.0 * math.pi * c / copies
        rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        all_pts.append(pts @ rot.T)
        all_tris.append(tris + c * n)
        all_attr.append(attrs)
        all_copy.append(np.full(len(tris), c))
    p = np.vstack(all_pts)
    t = np.vstack(all_tris)
    keep, remap = _merge_points(p, tol)
    return p[keep], remap[t], np.concatenate(all_attr), np.concatenate(all_copy)


def _merge_points(p: np.ndarray, tol: float):
    pairs = cKDTree(p).query_pairs(tol, output_type="ndarray")
    rep = np.arange(len(p))
    if len(pairs):
        pairs = np.sort(pairs, axis=1)
        # map every point to the smallest index of its cluster
        for i, j in pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]:
            rep[j] = min(rep[j], rep[i])
        while np.any(rep[rep] != rep):
            rep = rep[rep]
    keep = np.flatnonzero(rep == np.arange(len(p)))
    new_index = np.full(len(p), -1)
    new_index[keep] = np.arange(len(keep))
    return keep, new_index[rep]


def _match_ring(pts: np.ndarray, ring: np.ndarray, tol: float) -> np.ndarray:
    d, idx = cKDTree(pts).query(ring)
    if np.any(d > tol):
        raise RuntimeError("sliding ring nodes were not preserved by the triangulator")
    pts[idx] = ring
    return idx


@dataclass
class Mesh2D:
    """Triangulated cross-section.

    ``part`` marks nodes turning with the cores (0) or with the armor (1);
    ``tri_part`` additionally marks the sliding-shell triangles (2).
    ``inner_ring`` / ``outer_ring`` list the ring nodes in angular order;
    outer ring node ``j`` sits ``ring_offset`` ring steps after inner node ``j``.
    """

    spec: CableSpec
    nodes: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    region_names: tuple[str, ...]
    part: np.ndarray
    tri_part: np.ndarray
    inner_ring: np.ndarray
    outer_ring: np.ndarray
    ring_radii: tuple[float, float]
    ring_offset: float
    outer_radius: float
    boundary_edges: np.ndarray
    controls: MeshControls = field(default_factory=MeshControls)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def ring_nodes(self) -> int:
        return len(self.inner_ring)

    def areas(self) -> np.ndarray:
        return triangle_areas(self.nodes, self.triangles)

    def region_area(self, tag: int) -> float:
        return float(self.areas()[self.tags == tag].sum())

    def tag_of(self, name: str) -> int:
        return self.region_names.index(name)


def triangle_areas(nodes: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p0, p1, p2 = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


def ring_radii(spec: CableSpec) -> tuple[float, float]:
    """Radii of the inner and outer sliding rings inside the filler gap."""
    r_in, r_out = spec.core_bundle_radius, spec.armor_inner_radius
    gap = r_out - r_in
    return r_in + RING_FRACTIONS[0] * gap, r_in + RING_FRACTIONS[1] * gap


def estimate_nodes(spec: CableSpec, controls: MeshControls | None = None,
                   materials: MaterialSet | None = None) -> dict:
    """Rough node count per region class, used for the budget check and planning."""
    controls = controls or MeshControls()
    s = _resolve_sizes(spec, controls, materials or default_materials(spec))
    r_out = controls.outer_boundary_factor * spec.armor_radius
    rc, rso, rsi = spec.conductor_radius, spec.sheath_outer_radius, spec.sheath_inner_radius
    a_cond = 3 * math.pi * rc**2
    a_sh = 3 * math.pi * (rso**2 - rsi**2)
    a_w = spec.armor_wire_count * math.pi * spec.wire_radius**2
    r_sep = spec.armor_outer_radius + spec.wire_radius
    a_near = math.pi * (r_sep**2 - spec.armor_inner_radius**2) - a_w
    a_fill = math.pi * spec.armor_inner_radius**2 - a_cond - a_sh
    a_air = math.pi * (r_out**2 - r_sep**2)
    h_sheath = min(s.sheath, spec.sheath_thickness)
    counts = {
        "conductor": a_cond / _max_area(min(s.conductor, s.skin)) / 2,
        "sheath": a_sh / _max_area(h_sheath) / 2,
        "wire": (a_w + a_near) / _max_area(s.wire) / 2,
        "filler": a_fill / _max_area(s.filler) / 2,
        "air": a_air / _max_area(s.air) / 2,
    }
    counts = {k: int(v) for k, v in counts.items()}
    counts["total"] = sum(counts.values())
    return counts


def build_cross_section(spec: CableSpec, target_size: MeshControls | dict | None = None,
                        materials: MaterialSet | None = None) -> Mesh2D:
    """Mesh the cable cross-section at ``z = 0``.

    The core part is meshed as one 120 degree sector and rotated into place;
    when the ring node count is a multiple of the wire count the armor part is
    built the same way from one wire sector. Circles are polygons with the
    exact circle area.
    """
    if isinstance(target_size, dict):
        controls = MeshControls(**target_size)
    else:
        controls = target_size or MeshControls()
    mats = materials or default_materials(spec)
    m = controls.ring_nodes or default_ring_nodes(spec)
    if m % 3:
        raise ValueError("ring_nodes must be divisible by 3")
    est = estimate_nodes(spec, controls, mats)
    if est["total"] > controls.node_budget:
        raise MeshBudgetError(f"estimated {est['total']} nodes exceeds the budget of "
                              f"{controls.node_budget}: {est}")
    s = _resolve_sizes(spec, controls, mats)
    r1, r2 = ring_radii(spec)
    r_out = controls.outer_boundary_factor * spec.armor_radius
    if r_out <= spec.armor_outer_radius + 2 * spec.wire_radius:
        raise ValueError("outer_boundary_factor leaves no air around the armor")
    tol = 1e-9 * r_out
    n_w = spec.armor_wire_count
    step = 2.0 * math.pi / m
    alpha_in = -math.pi / 3.0

    # core part
    cp, ct, ca = _core_sector(spec, s, r1, m, controls)
    cp, ct, ca, cc = _replicate(cp, ct, ca, 3, tol)
    core_tags = np.where(ca == _LOCAL_CONDUCTOR, cc,
                         np.where(ca == _LOCAL_SHEATH, 3 + cc, TAG_FILLER))
    inner_xy = r1 * np.column_stack([np.cos(alpha_in + step * np.arange(m)),
                                     np.sin(alpha_in + step * np.arange(m))])
    inner = _match_ring(cp, inner_xy, 1e-7 * r_out)

    # armor part
    symmetric = m % n_w == 0
    if symmetric:
        alpha_out = -math.pi / n_w
        ap, at, aa = _armor_sector(spec, s, r2, r_out, alpha_out, m, controls)
        ap, at, aa, acopy = _replicate(ap, at, aa, n_w, tol)
        wire_idx = acopy
    else:
        alpha_out = alpha_in + 0.5 * step
        ap, at, aa = _armor_annulus(spec, s, r2, r_out, alpha_out, m, controls)
        wire_idx = aa // 100 - 1
        aa = aa % 100
    cen = ap[at].mean(axis=1)
    rad = np.hypot(cen[:, 0], cen[:, 1])
    armor_tags = np.where(aa == _LOCAL_WIRE, TAG_WIRE0 + wire_idx,
                          np.where(rad < spec.armor_radius, TAG_FILLER, TAG_AIR))
    k0 = int(round((alpha_out - alpha_in) / step))
    offset = (alpha_out - alpha_in) / step - k0
    if offset < 0:
        offset += 1.0
        k0 -= 1
    # outer ring node j sits offset steps after inner ring node j
    t_out = alpha_in + step * (np.arange(m) + offset)
    outer_xy = r2 * np.column_stack([np.cos(t_out), np.sin(t_out)])
    outer = _match_ring(ap, outer_xy, 1e-7 * r_out)

    nc = len(cp)
    nodes = np.vstack([cp, ap])
    outer = outer + nc
    j = np.arange(m)
    jn = (j + 1) % m
    shell = np.vstack([np.column_stack([inner[j], outer[j], inner[jn]]),
                       np.column_stack([outer[j - 1], outer[j], inner[j]])])
    tris = np.vstack([ct, at + nc, shell])
    tags = np.concatenate([core_tags, armor_tags, np.full(len(shell), TAG_FILLER)])
    tri_part = np.concatenate([np.full(len(ct), PART_CORE), np.full(len(at), PART_ARMOR),
                               np.full(len(shell), PART_SHELL)])
    part = np.concatenate([np.full(nc, PART_CORE), np.full(len(ap), PART_ARMOR)])

    area = triangle_areas(nodes, tris)
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    if np.any(np.abs(area) <= 0):
        raise MeshQualityError("degenerate triangle in the cross-section")

    mesh = Mesh2D(spec=spec, nodes=nodes, triangles=tris, tags=tags.astype(np.int64),
                  region_names=region_names(n_w), part=part, tri_part=tri_part,
                  inner_ring=inner, outer_ring=outer, ring_radii=(r1, r2),
                  ring_offset=float(offset), outer_radius=r_out,
                  boundary_edges=_boundary_edges(tris), controls=controls)
    return mesh


def default_ring_nodes(spec: CableSpec, minimum: int = 42) -> int:
    """Smallest multiple of lcm(3, N) that is at least ``minimum``.

    Such ring counts let both parts be meshed from identical sectors, which
    keeps the discrete field exactly N-fold symmetric in the armor.
    """
    step = math.lcm(3, spec.armor_wire_count)
    return step * -(-minimum // step)


def build_single_wire(spec: CableSpec, controls: MeshControls | None = None,
                      materials: MaterialSet | None = None, boundary_factor: float = 10.0) -> Mesh2D:
    """Isolated phase conductor of ``spec`` at the origin inside an air disk.

    Used to compare the solver with the round-wire skin-effect solution.
    Only tags ``conductor0`` and ``air`` are present.
    """
    controls = controls or MeshControls()
    mats = materials or default_materials(spec)
    s = _resolve_sizes(spec, controls, mats)
    rc = spec.conductor_radius
    r_out = boundary_factor * rc
    ms = controls.min_circle_segments
    g = _PSLG()
    g.add_loop(_circle((0.0, 0.0), rc, _n_segments(rc, min(s.skin, s.conductor), ms)))
    if s.skin_radius > 0:
        g.add_loop(_circle((0.0, 0.0), s.skin_radius, _n_segments(s.skin_radius, s.conductor, ms)))
        g.add_region(0.5 * (s.skin_radius + rc), 0.0, 0, s.skin)
    g.add_loop(_circle((0.0, 0.0), r_out, _n_segments(r_out, r_out / 8.0, 24), area_preserving=False))
    g.add_region(0.0, 0.0, 0, s.conductor)
    g.add_region(0.5 * (rc + r_out), 0.0, TAG_AIR, r_out / 8.0)
    pts, tris, attrs, _ = g.triangulate(controls.min_angle)
    area = triangle_areas(pts, tris)
    tris[area < 0] = tris[area < 0][:, [0, 2, 1]]
    empty = np.zeros(0, dtype=np.int64)
    return Mesh2D(spec=spec, nodes=pts, triangles=tris, tags=attrs,
                  region_names=region_names(spec.armor_wire_count),
                  part=np.zeros(len(pts), dtype=np.int64), tri_part=np.zeros(len(tris), dtype=np.int64),
                  inner_ring=empty, outer_ring=empty, ring_radii=(math.nan, math.nan),
                  ring_offset=0.0, outer_radius=r_out, boundary_edges=_boundary_edges(tris),
                  controls=controls)


def _boundary_edges(tris: np.ndarray) -> np.ndarray:
    e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key = np.sort(e, axis=1)
    _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return e[cnt[inv.ravel()] == 1]


def toy_controls(level: int = 0, **changes) -> MeshControls:
    """Controls for the toy cable used in desk-scale 3D comparisons.

    Level 0 is the coarse mesh; level 1 refines the cross-section (about 1.4x
    the triangles) at the same ring count, so both levels fit in 6 GB.
    """
    if level not in (0, 1):
        raise ValueError("toy refinement level must be 0 or 1")
    if level == 0:
        base = MeshControls(scale=8.0, ring_nodes=42, min_circle_segments=6, min_angle=15.0)
    else:
        base = MeshControls(scale=4.0, ring_nodes=42, min_circle_segments=8, min_angle=15.0)
    return base.replace(**changes) if changes else base


# --- twist field --------------------------------------------------------------

def twist_angle_field(spec: CableSpec, r, z, radii: tuple[float, float] | None = None):
    """In-plane rotation angle of the material point at radius ``r`` and height ``z``.

    Rigid core rotation inside the inner sliding ring, rigid armor rotation
    outside the outer ring, cubic blend across the shell. No mesh node lies
    strictly inside the shell.
    """
    r = np.asarray(r, float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    z = np.asarray(z, float)
    r1, r2 = radii or ring_radii(spec)
    phi_c = core_twist_rate(spec) * z
    phi_a = armor_twist_rate(spec) * z
    t = np.clip((r - r1) / (r2 - r1), 0.0, 1.0)
    w = t * t * (3.0 - 2.0 * t)
    out = phi_c + (phi_a - phi_c) * w
    return float(out) if out.ndim == 0 else out


# --- sweep --------------------------------------------------------------------

@dataclass
class Mesh3D:
    """Layered tetrahedral mesh (three tetrahedra per swept prism).

    Node ``i`` of layer ``l`` has index ``l * n2 + i``. ``layer_angles[l]``
    holds the core and armor rotation of layer ``l``. ``facets`` maps
    ``z0_face``, ``zL_face`` and ``lateral`` to boundary triangles.
    """

    nodes: np.ndarray
    tets: np.ndarray
    tags: np.ndarray
    tet_layer: np.ndarray
    region_names: tuple[str, ...]
    n2: int
    n_layers: int
    length: float
    layer_angles: np.ndarray
    facets: dict
    plan: TwistPlan
    mesh2d: Mesh2D
    shear_per_layer: float = 0.0

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_layers + 1)

    def volumes(self) -> np.ndarray:
        return tet_volumes(self.nodes, self.tets)


def tet_volumes(nodes: np.ndarray, tets: np.ndarray) -> np.ndarray:
    p0 = nodes[tets[:, 0]]
    a = nodes[tets[:, 1]] - p0
    b = nodes[tets[:, 2]] - p0
    c = nodes[tets[:, 3]] - p0
    return np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0


def _edge_direction(mesh2d: Mesh2D, d: int):
    """Return f(u, v) -> bool array, True where the edge is directed u -> v."""
    n = mesh2d.n_nodes
    m = mesh2d.ring_nodes
    ring_pos = np.full(n, -1)
    ring_id = np.full(n, -1)
    ring_pos[mesh2d.inner_ring] = np.arange(m)
    ring_id[mesh2d.inner_ring] = 0
    ring_pos[mesh2d.outer_ring] = np.arange(m)
    ring_id[mesh2d.outer_ring] = 1

    def directed(u, v):
        ru, rv = ring_id[u], ring_id[v]
        out = u < v
        one = (ru >= 0) != (rv >= 0)
        out = np.where(one, ru >= 0, out)
        same = (ru >= 0) & (ru == rv)
        # along a ring: forward along the shorter arc, reversed on the outer
        # ring when the armor advances one step per layer (d = +1)
        fwd = (ring_pos[v] - ring_pos[u]) % m
        forward = fwd < m - fwd
        reverse = (ru == 1) & (d == 1)
        out = np.where(same, forward ^ reverse, out)
        return out

    return directed


def _split_pattern(tris: np.ndarray, directed) -> np.ndarray:
    """Order each triangle's vertices as (source, middle, sink)."""
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = directed(a, b), directed(b, c), directed(c, a)
    outdeg = np.column_stack([ab.astype(int) + (~ca), (~ab) + bc.astype(int), (~bc) + ca.astype(int)])
    if np.any(np.sort(outdeg, axis=1) != [0, 1, 2]):
        raise MeshQualityError("cyclic edge directions: prism split is not conforming")
    order = np.argsort(-outdeg, axis=1)
    return np.take_along_axis(tris, order, axis=1)


def _prism_tets(bottom: np.ndarray, top: np.ndarray) -> np.ndarray:
    """Three tets per prism; columns (source, middle, sink) in bottom/top."""
    s, mm, k = bottom.T
    st, mt, kt = top.T
    t1 = np.column_stack([s, mm, k, kt])
    t2 = np.column_stack([s, mt, mm, kt])
    t3 = np.column_stack([s, st, mt, kt])
    return np.stack([t1, t2, t3], axis=1).reshape(-1, 4)


def _orientation(nodes2d: np.ndarray, tri: np.ndarray) -> np.ndarray:
    return triangle_areas(nodes2d, tri) > 0


def _rates_and_slide(mesh2d: Mesh2D, plan: TwistPlan):
    """Core and armor twist rates and the ring slide per layer (-1, 0 or +1)."""
    spec = mesh2d.spec
    m = mesh2d.ring_nodes
    h = plan.model_length / plan.n_layers
    if spec.twisted:
        wc, wa = core_twist_rate(spec), armor_twist_rate(spec)
    else:
        wc = wa = 0.0
    rel = (wa - wc) * h / (2.0 * math.pi / m)
    d = int(round(rel))
    if abs(rel - d) > 1e-9 or abs(d) > 1:
        raise ValueError(f"layer height {h:g} m does not slide the rings by a whole step "
                         f"(got {rel:g} steps); build the plan with plan()")
    return wc, wa, d


def _layer_xy(mesh2d: Mesh2D, angles) -> np.ndarray:
    phi = np.asarray(angles)[mesh2d.part]
    c, s = np.cos(phi), np.sin(phi)
    xy = mesh2d.nodes
    return np.column_stack([c * xy[:, 0] - s * xy[:, 1], s * xy[:, 0] + c * xy[:, 1]])


def _layer_face(mesh2d: Mesh2D, d: int, level: int) -> np.ndarray:
    """Triangles (2D node ids) of the node plane ``level``, shell included."""
    m = mesh2d.ring_nodes
    inner, outer = mesh2d.inner_ring, mesh2d.outer_ring
    j = np.arange(m)
    jn = (j + 1) % m
    a = np.column_stack([inner[j], outer[(j - d * level) % m], inner[jn]])
    b = np.column_stack([outer[(j - 1 - d * level) % m], outer[(j - d * level) % m], inner[j]])
    fixed = mesh2d.triangles[mesh2d.tri_part != PART_SHELL]
    return np.vstack([fixed, a, b])


def end_face_congruence(mesh2d: Mesh2D, plan: TwistPlan, tol: float = 1e-9) -> dict:
    """Check that the z = L plane is the z = 0 plane under the plan's end map.

    Only the two end planes are built, so this is cheap even when the full
    sweep would not fit in memory. Nodes are matched by position; edges and
    triangles must then coincide as index sets.
    """
    wc, wa, d = _rates_and_slide(mesh2d, plan)
    L = plan.model_length
    theta = plan.rotation_angle if plan.boundary_mode == "periodic_rotated" else 0.0
    bottom = _layer_xy(mesh2d, (0.0, 0.0))
    top = _layer_xy(mesh2d, (wc * L, wa * L))
    c, s = math.cos(theta), math.sin(theta)
    img = np.column_stack([c * bottom[:, 0] - s * bottom[:, 1], s * bottom[:, 0] + c * bottom[:, 1]])
    dist, idx = cKDTree(img).query(top)
    node_ok = dist <= tol
    f0 = _layer_face(mesh2d, d, 0)
    fl = idx[_layer_face(mesh2d, d, plan.n_layers)]

    def edge_set(t):
        e = np.sort(t[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1)
        return {tuple(x) for x in np.unique(e, axis=0).tolist()}

    tri0 = {tuple(x) for x in np.sort(f0, axis=1).tolist()}
    tril = [tuple(x) for x in np.sort(fl, axis=1).tolist()]
    e0, el = edge_set(f0), edge_set(fl)
    return {
        "theta": theta,
        "nodes": len(top), "nodes_matched": int(node_ok.sum()),
        "edges": len(el), "edges_matched": len(el & e0),
        "faces": len(tril), "faces_matched": sum(t in tri0 for t in tril),
        "max_distance": float(dist.max()),
        "unmatched_nodes": np.flatnonzero(~node_ok),
    }


def sweep(mesh2d: Mesh2D, plan: TwistPlan) -> Mesh3D:
    """Extrude the cross-section over ``plan.n_layers`` layers with the twist."""
    m = mesh2d.ring_nodes
    if plan.ring_nodes != m:
        raise ValueError(f"plan expects {plan.ring_nodes} ring nodes, mesh has {m}")
    n = plan.n_layers
    n2 = mesh2d.n_nodes
    L = plan.model_length
    h = L / n
    wc, wa, d = _rates_and_slide(mesh2d, plan)

    z = np.linspace(0.0, L, n + 1)
    angles = np.column_stack([wc * z, wa * z])
    xy = mesh2d.nodes
    nodes = np.empty(((n + 1) * n2, 3))
    for lay in range(n + 1):
        blk = slice(lay * n2, (lay + 1) * n2)
        nodes[blk, :2] = _layer_xy(mesh2d, angles[lay])
        nodes[blk, 2] = z[lay]

    directed = _edge_direction(mesh2d, d)
    fixed = mesh2d.tri_part != PART_SHELL
    ftris = mesh2d.triangles[fixed]
    ftags = mesh2d.tags[fixed]
    fpat = _split_pattern(ftris, directed)
    fpos = _orientation(xy, fpat)

    # shell triangles in slot numbering; slot p of layer l holds outer label p - d*l
    inner, outer = mesh2d.inner_ring, mesh2d.outer_ring
    j = np.arange(m)
    jn = (j + 1) % m
    slot_a = np.column_stack([j, m + j, jn])           # inner j, slot j, inner j+1
    slot_b = np.column_stack([m + (j - 1) % m, m + j, j])

    slot_tris = np.vstack([slot_a, slot_b])

    def slot_directed(u, v):
        ui, vi = u >= m, v >= m
        out = np.where(ui != vi, ~ui, False)
        both_in = ~ui & ~vi
        fwd = (v - u) % m
        out = np.where(both_in, fwd == 1, out)
        both_out = ui & vi
        fwd_o = ((v - m) - (u - m)) % m
        out = np.where(both_out, (fwd_o == 1) ^ (d == -1), out)
        return out

    spat = _split_pattern(slot_tris, slot_directed)
    ref_xy = np.vstack([xy[inner], xy[outer]])  # slot positions at layer 0
    spos = _orientation(ref_xy, spat)

    tets, tags, layer_of = [], [], []
    for lay in range(n):
        bot = fpat + lay * n2
        top = fpat + (lay + 1) * n2
        t = _prism_tets(bot, top)
        tets.append(t)
        tags.append(np.repeat(ftags, 3))
        pos = np.repeat(fpos, 3)

        def label(slots, level):
            labels = np.where(slots < m, inner[slots % m],
                              outer[(slots - m - d * level) % m])
            return labels + level * n2

        sb = label(spat, lay)
        st = label(spat, lay + 1)
        ts = _prism_tets(sb, st)
        tets[-1] = np.vstack([_fix_orientation(t, pos), _fix_orientation(ts, np.repeat(spos, 3))])
        tags[-1] = np.concatenate([tags[-1], np.full(len(ts), TAG_FILLER)])
        layer_of.append(np.full(len(tets[-1]), lay))
    tets = np.vstack(tets)
    mesh = Mesh3D(nodes=nodes, tets=tets, tags=np.concatenate(tags), tet_layer=np.concatenate(layer_of),
                  region_names=mesh2d.region_names, n2=n2, n_layers=n, length=L,
                  layer_angles=angles, facets={}, plan=plan, mesh2d=mesh2d,
                  shear_per_layer=abs(wa - wc) * h)
    vol = mesh.volumes()
    if np.any(vol <= 0):
        worst = int(np.argmin(vol))
        # prisms invert through the in-plane rotation, which scales with 1/n_layers
        need = n * 2
        cen = nodes[tets[worst]].mean(axis=0)
        raise MeshQualityError(f"non-positive tetrahedron {worst} in {mesh.region_names[mesh.tags[worst]]} "
                               f"at r={math.hypot(cen[0], cen[1]):.4g} m (layer {mesh.tet_layer[worst]}, "
                               f"volume {vol[worst]:.3e}); use at least n_layers={need}")
    mesh.facets = _classify_facets(nodes, tets, L)
    return mesh


def _fix_orientation(t: np.ndarray, positive: np.ndarray) -> np.ndarray:
    # tets of a prism over a counter-clockwise triangle come out positive;
    # swap two vertices for clockwise ones
    t = t.copy()
    neg = ~positive
    t[neg, 0], t[neg, 1] = t[neg, 1], t[neg, 0].copy()
    return t


TET_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])


def boundary_faces(tets: np.ndarray) -> np.ndarray:
    """Faces belonging to exactly one tetrahedron (vertex order as in the tet)."""
    faces = tets[:, TET_FACES].reshape(-1, 3)
    key = np.sort(faces, axis=1)
    _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return faces[cnt[inv.ravel()] == 1]


def face_counts(tets: np.ndarray) -> np.ndarray:
    key = np.sort(tets[:, TET_FACES].reshape(-1, 3), axis=1)
    _, cnt = np.unique(key, axis=0, return_counts=True)
    return cnt


def _classify_facets(nodes: np.ndarray, tets: np.ndarray, L: float) -> dict:
    bf = boundary_faces(tets)
    zf = nodes[bf, 2]
    tol = 1e-9 * max(L, 1.0)
    z0 = np.all(np.abs(zf) < tol, axis=1)
    zl = np.all(np.abs(zf - L) < tol, axis=1)
    return {"z0_face": bf[z0], "zL_face": bf[zl], "lateral": bf[~z0 & ~zl]}


def match_end_faces(mesh: Mesh3D, theta: float | None = None, tol: float = 1e-9):
    """Map zL face nodes to z0 face nodes under rotation by ``theta``.

    Returns ``(top_nodes, bottom_nodes, unmatched)`` where ``unmatched`` lists
    zL nodes without an image within ``tol``.
    """
    if theta is None:
        theta = mesh.plan.rotation_angle if mesh.plan.boundary_mode == "periodic_rotated" else 0.0
    bottom = np.unique(mesh.facets["z0_face"])
    top = np.unique(mesh.facets["zL_face"])
    c, s = math.cos(theta), math.sin(theta)
    p = mesh.nodes[bottom]
    img = np.column_stack([c * p[:, 0] - s * p[:, 1], s * p[:, 0] + c * p[:, 1]])
    dist, idx = cKDTree(img).query(mesh.nodes[top, :2])
    ok = dist <= tol
    return top[ok], bottom[idx[ok]], top[~ok]


def quality_report(mesh: Mesh3D) -> dict:
    """Element counts, edge (DoF) count, Jacobian and twist shear summary."""
    vol = mesh.volumes()
    edges = np.unique(np.sort(mesh.tets[:, TET_EDGES].reshape(-1, 2), axis=1), axis=0)
    # geometric tilt of the vertical edges of rigidly turning nodes
    h = mesh.length / mesh.n_layers
    xy = mesh.mesh2d.nodes
    r = np.hypot(xy[:, 0], xy[:, 1])
    if mesh.n_layers:
        dphi = np.abs(mesh.layer_angles[1] - mesh.layer_angles[0])
        tilt = np.degrees(np.arctan(r * dphi[mesh.mesh2d.part] / h)).max()
    else:
        tilt = 0.0
    return {
        "n_nodes": mesh.n_nodes,
        "n_tets": mesh.n_tets,
        "n_prisms": mesh.n_tets // 3,
        "n_edges": int(len(edges)),
        "n_layers": mesh.n_layers,
        "min_jacobian": float(6.0 * vol.min()),
        "min_volume": float(vol.min()),
        "max_shear_angle": float(mesh.shear_per_layer),
        "max_tilt_deg": float(tilt),
    }


# --- text export --------------------------------------------------------------

def write_mesh(mesh: Mesh2D | Mesh3D, path) -> None:
    """Write the plain-text mesh container.

    Layout::

        cablefem-mesh 1
        dimension <2|3>
        nodes <N>
        <x y [z]>            N lines
        elements <E> <k>
        <v0 ... v(k-1) tag>  E lines, 0-based node indices
        tags <T>
        <id name>            T lines
    """
    if isinstance(mesh, Mesh3D):
        dim, nodes, elems = 3, mesh.nodes, mesh.tets
    else:
        dim, nodes, elems = 2, mesh.nodes, mesh.triangles
    lines = [_MESH_FORMAT, f"dimension {dim}", f"nodes {len(nodes)}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in nodes]
    lines.append(f"elements {len(elems)} {elems.shape[1]}")
    lines += [" ".join(map(str, row)) + f" {t}" for row, t in zip(elems.tolist(), mesh.tags.tolist())]
    lines.append(f"tags {len(mesh.region_names)}")
    lines += [f"{i} {name}" for i, name in enumerate(mesh.region_names)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> dict:
    """Read a text mesh container into ``nodes``, ``elements``, ``tags``, ``names``."""
    it = iter(Path(path).read_text().splitlines())
    if next(it).strip() != _MESH_FORMAT:
        raise ValueError("not a cablefem mesh file")
    dim = int(next(it).split()[1])
    n = int(next(it).split()[1])
    nodes = np.array([[float(v) for v in next(it).split()] for _ in range(n)]).reshape(n, dim)
    head = next(it).split()
    ne, k = int(head[1]), int(head[2])
    rows = np.array([[int(v) for v in next(it).split()] for _ in range(ne)], dtype=np.int64).reshape(ne, k + 1)
    nt = int(next(it).split()[1])
    names = [next(it).split(maxsplit=1)[1] for _ in range(nt)]
    return {"dimension": dim, "nodes": nodes, "elements": rows[:, :k], "tags": rows[:, k],
            "names": tuple(names)}
