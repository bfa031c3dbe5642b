"""Cable geometry, materials and the armor permeability model.

All quantities are SI. Phasors use the ``exp(+j*omega*t)`` time convention and
store peak amplitudes, so the time-averaged Joule density is
``|J|**2 / (2*sigma)``. Under this convention a lossy magnetic material has
``Im(mu_r) <= 0``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

MU0 = 4e-7 * np.pi

# Resistivities at 20 degC (ohm*m), IEC 60287-1-1 Table 1.
RESISTIVITY_20C = {
    "copper": 1.7241e-8,
    "aluminium": 2.8264e-8,
    "lead": 21.4e-8,
    "steel": 13.8e-8,
}

CONDUCTOR_MATERIALS = ("copper", "aluminium")
LAY_RELATIONS = ("contralay", "unilay")
HANDEDNESS = ("ccw", "cw")


@dataclass(frozen=True)
class PermeabilityModel:
    """Relative permeability of the armor wires.

    ``variant='constant'`` uses ``mu_r`` directly. ``variant='field_dependent'``
    evaluates::

        mu_r(B) = mu_0r + mu_mr*(1 - exp(-alpha_1*|B|)) - 1j*mu_mi*(1 - exp(-alpha_2*|B|))

    There are no built-in parameter values for the field-dependent form; they
    must come from measured wire data.
    """

    variant: str = "constant"
    mu_r: complex = 100 - 50j
    mu_0r: float = 1.0
    mu_mr: float = 0.0
    mu_mi: float = 0.0
    alpha_1: float = 1.0
    alpha_2: float = 1.0

    def __post_init__(self):
        if self.variant == "constant":
            if complex(self.mu_r).imag > 0:
                raise ValueError("Im(mu_r) must be <= 0 for a lossy material (exp(+jwt) convention)")
        elif self.variant == "field_dependent":
            if self.mu_0r < 1:
                raise ValueError("mu_0r must be >= 1")
            if self.alpha_1 <= 0 or self.alpha_2 <= 0:
                raise ValueError("alpha_1 and alpha_2 must be positive")
        else:
            raise ValueError(f"unknown permeability variant {self.variant!r}")

    @classmethod
    def constant(cls, mu_r: complex) -> "PermeabilityModel":
        return cls(variant="constant", mu_r=complex(mu_r))

    @classmethod
    def field_dependent(cls, mu_0r, mu_mr, mu_mi, alpha_1, alpha_2) -> "PermeabilityModel":
        return cls(variant="field_dependent", mu_r=complex(mu_0r), mu_0r=float(mu_0r),
                   mu_mr=float(mu_mr), mu_mi=float(mu_mi),
                   alpha_1=float(alpha_1), alpha_2=float(alpha_2))

    @property
    def is_linear(self) -> bool:
        return self.variant == "constant"


def complex_permeability(model: PermeabilityModel, b_mag):
    """Relative permeability for a flux density magnitude ``b_mag`` (tesla).

    Accepts scalars or arrays; returns the same shape.
    """
    b = np.asarray(b_mag, dtype=float)
    if np.any(b < 0) or np.any(~np.isfinite(b)):
        raise ValueError("b_mag must be finite and non-negative")
    if model.variant == "constant":
        out = np.full(b.shape, complex(model.mu_r), dtype=complex)
    else:
        out = (model.mu_0r
               + model.mu_mr * (1.0 - np.exp(-model.alpha_1 * b))
               - 1j * model.mu_mi * (1.0 - np.exp(-model.alpha_2 * b)))
    if out.ndim == 0:
        return complex(out)
    return out


@dataclass(frozen=True)
class CableSpec:
    """Geometry and operating point of one three-core armored cable.

    ``sheath_radius`` is the mean sheath radius. The three cores sit in a
    trefoil whose sheaths are separated by ``core_gap``.
    Lay lengths may be ``inf`` to describe an untwisted cable.
    """

    name: str
    voltage_class: float
    conductor_material: str
    conductor_radius: float
    sheath_thickness: float
    sheath_radius: float
    core_lay_length: float
    armor_wire_diameter: float
    armor_wire_count: int
    armor_radius: float
    armor_lay_length: float
    lay_relation: str = "contralay"
    core_handedness: str = "ccw"
    frequency: float = 50.0
    phase_current: float = 1.0
    core_gap: float = 0.5e-3

    @property
    def sheath_inner_radius(self) -> float:
        return self.sheath_radius - 0.5 * self.sheath_thickness

    @property
    def sheath_outer_radius(self) -> float:
        return self.sheath_radius + 0.5 * self.sheath_thickness

    @property
    def phase_circle_radius(self) -> float:
        """Radius of the circle through the three phase centres."""
        return (self.sheath_outer_radius + 0.5 * self.core_gap) * 2.0 / math.sqrt(3.0)

    @property
    def wire_radius(self) -> float:
        return 0.5 * self.armor_wire_diameter

    @property
    def core_bundle_radius(self) -> float:
        return self.phase_circle_radius + self.sheath_outer_radius

    @property
    def armor_inner_radius(self) -> float:
        return self.armor_radius - self.wire_radius

    @property
    def armor_outer_radius(self) -> float:
        return self.armor_radius + self.wire_radius

    @property
    def omega(self) -> float:
        return 2.0 * np.pi * self.frequency

    @property
    def twisted(self) -> bool:
        return math.isfinite(self.core_lay_length) or math.isfinite(self.armor_lay_length)

    def replace(self, **changes) -> "CableSpec":
        return dataclasses.replace(self, **changes)


def validate_spec(spec: CableSpec) -> list[str]:
    """Return a list of violated invariants (empty for a valid CableSpec)."""
    problems = []
    for name in ("conductor_radius", "sheath_thickness", "sheath_radius", "core_lay_length",
                 "armor_wire_diameter", "armor_radius", "armor_lay_length", "frequency"):
        value = getattr(spec, name)
        if not (value > 0):
            problems.append(f"{name} must be > 0 (got {value})")
    if spec.phase_current < 0:
        problems.append(f"phase_current must be >= 0 (got {spec.phase_current})")
    if spec.core_gap < 0:
        problems.append(f"core_gap must be >= 0 (got {spec.core_gap})")
    if spec.armor_wire_count < 1:
        problems.append(f"armor_wire_count must be >= 1 (got {spec.armor_wire_count})")
    if spec.conductor_material not in CONDUCTOR_MATERIALS:
        problems.append(f"conductor_material must be one of {CONDUCTOR_MATERIALS}")
    if spec.lay_relation not in LAY_RELATIONS:
        problems.append(f"lay_relation must be one of {LAY_RELATIONS}")
    if spec.core_handedness not in HANDEDNESS:
        problems.append(f"core_handedness must be one of {HANDEDNESS}")
    if problems:
        return problems
    if spec.sheath_inner_radius <= spec.conductor_radius:
        problems.append("sheath inner radius must exceed the conductor radius")
    if spec.armor_wire_count * spec.armor_wire_diameter >= 2 * np.pi * spec.armor_radius:
        problems.append("armor wires overlap: wire_count * wire_diameter >= 2*pi*armor_radius")
    if spec.core_bundle_radius >= spec.armor_inner_radius:
        problems.append("core trefoil intersects the armor: phase circle radius + sheath outer "
                        "radius >= armor_radius - wire_diameter/2")
    return problems


# --- spec files -------------------------------------------------------------

_INT_FIELDS = {"armor_wire_count"}
_STR_FIELDS = {"name", "conductor_material", "lay_relation", "core_handedness"}


def parse_spec_text(text: str, name: str | None = None) -> CableSpec:
    """Parse the flat ``key = value`` cable file format ('#' starts a comment)."""
    values: dict[str, object] = {}
    known = {f.name for f in dataclasses.fields(CableSpec)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in _STR_FIELDS:
            values[key] = value
        elif key in _INT_FIELDS:
            values[key] = int(value)
        else:
            values[key] = float(value)
    if name is not None and "name" not in values:
        values["name"] = name
    missing = {f.name for f in dataclasses.fields(CableSpec)
               if f.default is dataclasses.MISSING} - set(values)
    if missing:
        raise ValueError(f"missing keys: {sorted(missing)}")
    return CableSpec(**values)


def format_spec(spec: CableSpec) -> str:
    lines = ["# cable specification, SI units"]
    for f in dataclasses.fields(CableSpec):
        value = getattr(spec, f.name)
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def load_spec(path) -> CableSpec:
    path = Path(path)
    return parse_spec_text(path.read_text(), name=path.stem)


def save_spec(spec: CableSpec, path) -> None:
    Path(path).write_text(format_spec(spec))


def builtin_spec(name: str) -> CableSpec:
    """Load one of the shipped spec files (``cable1`` .. ``cable5``, ``toy``)."""
    text = resources.files("cablefem.data").joinpath(f"{name}.txt").read_text()
    return parse_spec_text(text, name=name)


BUILTIN_SPECS = ("cable1", "cable2", "cable3", "cable4", "cable5", "toy")


# --- materials ---------------------------------------------------------------

@dataclass(frozen=True)
class MaterialSet:
    """Electrical material data. Filler and air are nonconducting with mu_r = 1."""

    conductor_resistivity: float
    sheath_resistivity: float = RESISTIVITY_20C["lead"]
    armor_conductivity: float = 1.0 / RESISTIVITY_20C["steel"]
    armor_permeability: PermeabilityModel = field(default_factory=PermeabilityModel)

    def __post_init__(self):
        if not (self.conductor_resistivity > 0 and self.sheath_resistivity > 0):
            raise ValueError("resistivities must be positive")
        if self.armor_conductivity < 0:
            raise ValueError("armor conductivity must be non-negative")

    @property
    def conductor_conductivity(self) -> float:
        return 1.0 / self.conductor_resistivity

    @property
    def sheath_conductivity(self) -> float:
        return 1.0 / self.sheath_resistivity

    def replace(self, **changes) -> "MaterialSet":
        return dataclasses.replace(self, **changes)


def default_materials(spec: CableSpec, **overrides) -> MaterialSet:
    """IEC 20 degC resistivities, lead sheaths, steel armor with mu_r = 100 - 50j."""
    mats = MaterialSet(conductor_resistivity=RESISTIVITY_20C[spec.conductor_material])
    return mats.replace(**overrides) if overrides else mats


def skin_depth(resistivity: float, frequency: float, mu_r: complex = 1.0) -> float:
    """Skin depth sqrt(2*rho/(omega*mu)) using |mu_r|."""
    return math.sqrt(2.0 * resistivity / (2 * np.pi * frequency * MU0 * abs(mu_r)))
