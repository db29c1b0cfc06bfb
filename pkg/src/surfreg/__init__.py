"""Surface registration by iterated joint linear solves.

Rigid ICP, as-rigid-as-possible non-rigid registration and an optional
point-to-plane term, all built on linearized rotations.
"""

from surfreg.errors import (
    DegenerateNormalError,
    ObjParseError,
    RegistrationError,
    SingularSystemError,
)
from surfreg.geomcore import (
    RigidTransform,
    SmallMotion,
    apply_rigid,
    compose,
    rotation_from_small,
    skew,
)
from surfreg.energy import EnergyBreakdown, RegistrationState, Weights, eval_energy, eval_gradient
from surfreg.graph import AdjacencyGraph, build_laplacian
from surfreg.fileio import Mesh, parse_obj, write_obj, write_iteration_log
from surfreg.spatial import KdTree, build_kdtree, estimate_normals, project
from surfreg.rigid import RigidConfig, RegistrationResult, IterationReport, register_rigid
from surfreg.arap import ArapConfig, register_arap

__version__ = "0.1.0"

__all__ = [
    "AdjacencyGraph",
    "ArapConfig",
    "DegenerateNormalError",
    "EnergyBreakdown",
    "IterationReport",
    "KdTree",
    "Mesh",
    "ObjParseError",
    "RegistrationError",
    "RegistrationResult",
    "RegistrationState",
    "RigidConfig",
    "RigidTransform",
    "SingularSystemError",
    "SmallMotion",
    "Weights",
    "apply_rigid",
    "build_kdtree",
    "build_laplacian",
    "compose",
    "estimate_normals",
    "eval_energy",
    "eval_gradient",
    "parse_obj",
    "project",
    "register_arap",
    "register_rigid",
    "rotation_from_small",
    "skew",
    "write_iteration_log",
    "write_obj",
]
