"""Semigroup-adjusted realised covariation: simulation, estimation and rate studies."""

__version__ = "0.1.0"

from .kernels import BACKEND
from .noise import SpectralQ, make_rng
from .opalg import OrthoOperator, PsdViolation, SymPsdOperator, hs_norm, op_norm
from .semigroup import IdentitySemigroup, MatrixExpSemigroup, Semigroup, ShiftSemigroup
from .spaces import FilipovicSpace
from .simulate import Trajectory, simulate_mild_path
from .estimator import OperatorPath, adjusted_increments, sarcv, sup_hs_error, true_qv
from .volmodels import BnsOu, ConstantVol, RoughExp, VolPath, simulate_vol_path

__all__ = [
    "BACKEND", "SpectralQ", "make_rng", "OrthoOperator", "PsdViolation", "SymPsdOperator",
    "hs_norm", "op_norm", "IdentitySemigroup", "MatrixExpSemigroup", "Semigroup", "ShiftSemigroup",
    "FilipovicSpace", "Trajectory", "simulate_mild_path", "OperatorPath", "adjusted_increments",
    "sarcv", "sup_hs_error", "true_qv", "BnsOu", "ConstantVol", "RoughExp", "VolPath", "simulate_vol_path",
]
