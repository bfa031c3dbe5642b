"""Magnetoquasistatic finite-element models of three-core armored cables."""
from .cable_model import (CableSpec, MaterialSet, PermeabilityModel, builtin_spec,
                          complex_permeability, default_materials, load_spec, validate_spec)
from .twist_geometry import TwistPlan, crossing_pitch, periodic_length, plan, rotation_angle

__version__ = "0.1.0"
