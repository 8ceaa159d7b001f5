from .groups import FiniteGroup, HiggsGroup, UnitaryRep, make_group
from .lattice import Lattice, Loop, PlaquetteSet, build_lattice, rectangular_loop
from .value_objects import Configuration, ModelKind, ModelParams, PhiVariant, SupportKind, UpdateRule, VortexClass

__all__ = [
    "Configuration",
    "FiniteGroup",
    "HiggsGroup",
    "Lattice",
    "Loop",
    "ModelKind",
    "ModelParams",
    "PhiVariant",
    "PlaquetteSet",
    "SupportKind",
    "UnitaryRep",
    "UpdateRule",
    "VortexClass",
    "build_lattice",
    "make_group",
    "rectangular_loop",
]
