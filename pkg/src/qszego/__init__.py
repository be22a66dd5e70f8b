"""Numerical toolkit for the Cauchy-Szego singular integral on the
quaternionic Heisenberg group: exact kernel construction, group geometry
and Haar sampling, Muckenhoupt/BMO/VMO/Morrey estimators, truncated
commutator quadrature, and reproducible verification scenarios.
"""

from .analysis import EstimatorCfg, MorreyParams, VmoCfg
from .heisenberg import Ball, BallFamily, GroupDims, GroupPoint, identity, point
from .kernel import KernelEvaluator, SmoothCutoff, build_kernel
from .operators import CommutatorImage, QuadratureCfg
from .quaternion import Quaternion
from .series import TermSeries

__all__ = [
    "Ball",
    "BallFamily",
    "CommutatorImage",
    "EstimatorCfg",
    "GroupDims",
    "GroupPoint",
    "KernelEvaluator",
    "MorreyParams",
    "QuadratureCfg",
    "Quaternion",
    "SmoothCutoff",
    "TermSeries",
    "VmoCfg",
    "build_kernel",
    "identity",
    "point",
]

__version__ = "0.1.0"
