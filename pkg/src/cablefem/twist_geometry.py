"""Helical kinematics of cores and armor wires, and model-length planning."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .cable_model import CableSpec

STRATEGIES = ("full_periodic", "short_periodic", "non_periodic")
BOUNDARY_MODES = ("none", "periodic_translate", "periodic_rotated")

DEFAULT_LAYERS_PER_CP = 40
MAX_DENOMINATOR = 10**6


class UnsupportedLayError(ValueError):
    pass


class NoFinitePeriodError(ValueError):
    pass


def _inv(p: float) -> float:
    return 0.0 if math.isinf(p) else 1.0 / p


def crossing_pitch(p_a: float, p_c: float, lay_relation: str = "contralay") -> float:
    """Axial distance after which an armor wire meets the same phase again.

    ``1 / (1/p_a + 1/p_c)`` for contralay cables. Infinite lay lengths stand
    for untwisted components; two untwisted components give ``inf``.
    """
    if lay_relation != "contralay":
        raise UnsupportedLayError("crossing pitch is only defined here for contralay cables")
    if not (p_a > 0 and p_c > 0):
        raise ValueError("lay lengths must be positive")
    rate = _inv(p_a) + _inv(p_c)
    return math.inf if rate == 0 else 1.0 / rate


def to_fraction(x: float, max_denominator: int = MAX_DENOMINATOR) -> Fraction:
    """Exact rational for a decimal input, bounded denominator."""
    exact = Fraction(repr(float(x)))
    frac = exact.limit_denominator(max_denominator)
    if abs(float(frac) - x) > 1e-15 * abs(x):
        raise NoFinitePeriodError(f"{x!r} is not a rational with denominator <= {max_denominator}")
    return frac


def periodic_length(p_a: float, p_c: float, max_denominator: int = MAX_DENOMINATOR) -> float:
    """Least common multiple of the two lay lengths (exact rational arithmetic)."""
    if not (p_a > 0 and p_c > 0):
        raise ValueError("lay lengths must be positive")
    if math.isinf(p_a) or math.isinf(p_c):
        finite = [p for p in (p_a, p_c) if math.isfinite(p)]
        if not finite:
            raise NoFinitePeriodError("both components untwisted: any length is periodic")
        return finite[0]
    a = to_fraction(p_a, max_denominator)
    c = to_fraction(p_c, max_denominator)
    num = math.lcm(a.numerator, c.numerator)
    den = math.gcd(a.denominator, c.denominator)
    return float(Fraction(num, den))


def normalize_angle(theta: float) -> float:
    """Map an angle into (-2*pi, 2*pi]."""
    two_pi = 2.0 * math.pi
    while theta > two_pi:
        theta -= two_pi
    while theta <= -two_pi:
        theta += two_pi
    return theta


def rotation_angle(cp: float, p_c: float, core_handedness: str = "ccw") -> float:
    """Rotation between source and destination faces of a short model.

    Positive for counter-clockwise core twisting. Returned unnormalized;
    use :func:`normalize_angle` for the (-2*pi, 2*pi] form.
    """
    if not (cp > 0 and p_c > 0):
        raise ValueError("cp and p_c must be positive")
    sign = _handed_sign(core_handedness)
    return sign * 2.0 * math.pi * cp * _inv(p_c)


def _handed_sign(handedness: str) -> int:
    if handedness == "ccw":
        return 1
    if handedness == "cw":
        return -1
    raise ValueError(f"unknown handedness {handedness!r}")


def rotated_frame(theta: float) -> np.ndarray:
    """Rows are the rotated basis vectors e'_x, e'_y, e'_z."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_matrix_2d(theta: float) -> np.ndarray:
    """Active counter-clockwise rotation of points in the plane."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def core_twist_rate(spec: CableSpec) -> float:
    """d(angle)/dz of the core bundle, rad/m."""
    return _handed_sign(spec.core_handedness) * 2.0 * math.pi * _inv(spec.core_lay_length)


def armor_twist_rate(spec: CableSpec) -> float:
    """d(angle)/dz of the armor layer, rad/m (opposite sense for contralay)."""
    sign = _handed_sign(spec.core_handedness)
    if spec.lay_relation == "contralay":
        sign = -sign
    return sign * 2.0 * math.pi * _inv(spec.armor_lay_length)


def phase_center(spec: CableSpec, phase_index: int, z):
    """Centre (x, y) of a phase conductor at axial position ``z``."""
    if phase_index not in (0, 1, 2):
        raise ValueError("phase_index must be 0, 1 or 2")
    ang = 2.0 * math.pi * phase_index / 3.0 + core_twist_rate(spec) * np.asarray(z, float)
    r = spec.phase_circle_radius
    return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)


def armor_wire_center(spec: CableSpec, wire_index: int, z):
    """Centre (x, y) of an armor wire at axial position ``z``."""
    if not 0 <= wire_index < spec.armor_wire_count:
        raise ValueError("wire_index out of range")
    ang = 2.0 * math.pi * wire_index / spec.armor_wire_count + armor_twist_rate(spec) * np.asarray(z, float)
    r = spec.armor_radius
    return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)


@dataclass(frozen=True)
class TwistPlan:
    """Model length, boundary treatment and axial discretisation.

    ``ring_nodes`` is the node count on the sliding rings of the swept mesh;
    the layer height is ``crossing_pitch / ring_nodes`` so the relative
    core/armor rotation per layer is exactly one ring step.
    """

    strategy: str
    model_length: float
    boundary_mode: str
    crossing_pitch: float
    rotation_angle: float
    n_layers: int
    ring_nodes: int
    periodic_length: float = math.nan

    @property
    def rotation_angle_normalized(self) -> float:
        return normalize_angle(self.rotation_angle)

    @property
    def layer_height(self) -> float:
        return self.model_length / self.n_layers

    @property
    def length_ratio(self) -> float:
        """L / CP."""
        return self.model_length / self.crossing_pitch

    def as_dict(self) -> dict:
        d = asdict(self)
        d["rotation_angle_normalized"] = self.rotation_angle_normalized
        return d

    def describe(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in self.as_dict().items())


def _layers_for_ratio(ratio: Fraction, ring_nodes: int) -> tuple[int, int]:
    """Smallest ring count >= ring_nodes making ratio * ring_count an integer.

    Ring counts are also kept divisible by 3 so the core part of the
    cross-section can be meshed as three identical sectors.
    """
    den = math.lcm(ratio.denominator, 3)
    m = -(-ring_nodes // den) * den
    return int(ratio * m), m


def plan(spec: CableSpec, strategy: str, length: float | None = None, *,
         ring_nodes: int = DEFAULT_LAYERS_PER_CP, n_layers: int | None = None) -> TwistPlan:
    """Choose model length, boundary mode and layer count for ``strategy``.

    ``length`` is required for ``non_periodic`` and for untwisted cables.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if ring_nodes < 6:
        raise ValueError("ring_nodes must be >= 6")

    if not spec.twisted:
        if length is None:
            raise ValueError("untwisted cables need an explicit model length")
        if strategy == "short_periodic":
            raise ValueError("short_periodic needs a twisted cable")
        mode = "periodic_translate" if strategy == "full_periodic" else "none"
        nl = n_layers or 2
        m = -(-ring_nodes // 3) * 3
        return TwistPlan(strategy, float(length), mode, math.inf, 0.0, nl, m, math.inf)

    cp = crossing_pitch(spec.armor_lay_length, spec.core_lay_length, spec.lay_relation)
    theta_cp = rotation_angle(cp, spec.core_lay_length, spec.core_handedness)
    try:
        lcm = periodic_length(spec.armor_lay_length, spec.core_lay_length)
    except NoFinitePeriodError:
        if strategy == "full_periodic":
            raise
        lcm = math.nan

    if strategy == "short_periodic":
        L, mode, ratio = cp, "periodic_rotated", Fraction(1)
    elif strategy == "full_periodic":
        L, mode = lcm, "periodic_translate"
        ratio = to_fraction(lcm / cp, 10**4)
    else:
        if length is None or not length > 0:
            raise ValueError("non_periodic needs a positive model length")
        L, mode = float(length), "none"
        ratio = Fraction(L / cp).limit_denominator(10**4)
        if abs(float(ratio) - L / cp) > 1e-9 * (L / cp):
            raise ValueError(f"L/CP = {L / cp!r} is not a simple rational; choose another length")

    if n_layers is None:
        nl, m = _layers_for_ratio(ratio, ring_nodes)
    else:
        m_frac = Fraction(n_layers) / ratio
        if m_frac.denominator != 1 or m_frac.numerator % 3:
            raise ValueError(f"n_layers={n_layers} does not give a ring count divisible by 3 "
                             f"for L/CP={ratio}")
        nl, m = n_layers, int(m_frac)
    # core rotation accumulated between z = 0 and z = L (unnormalized)
    theta = theta_cp if strategy == "short_periodic" else rotation_angle(
        L, spec.core_lay_length, spec.core_handedness)
    return TwistPlan(strategy, L, mode, cp, theta, nl, m, lcm)
