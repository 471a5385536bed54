"""Anisotropic elliptic problems with gradient terms: radial models, rearrangements and a P1 solver."""
from .anisotropy import AnisoNorm, h_eval, h_grad, polar_eval, wulff_kappa
from .errors import (
    ConfigError,
    DegenerateDomain,
    DomainMismatch,
    InadmissibleParams,
    LambdaTooLarge,
    MeasureMismatch,
    NoConvergence,
    NonSmoothNorm,
    OutOfDomain,
    SelfIntersecting,
    UnsupportedDimension,
    WulffError,
)
from .mesh import Mask, Mesh, Rectangle, WulffDisc, build_mesh
from .radial import ProblemParams, RadialSolution, build_radial, solve_beta, v_star
from .rearrange import GridFunction, RearrangementProfile, decreasing_rearrangement, marcinkiewicz_norm

__version__ = "0.1.0"

__all__ = [
    "AnisoNorm", "h_eval", "h_grad", "polar_eval", "wulff_kappa",
    "ConfigError", "DegenerateDomain", "DomainMismatch", "InadmissibleParams", "LambdaTooLarge",
    "MeasureMismatch", "NoConvergence", "NonSmoothNorm", "OutOfDomain", "SelfIntersecting",
    "UnsupportedDimension", "WulffError",
    "Mask", "Mesh", "Rectangle", "WulffDisc", "build_mesh",
    "ProblemParams", "RadialSolution", "build_radial", "solve_beta", "v_star",
    "GridFunction", "RearrangementProfile", "decreasing_rearrangement", "marcinkiewicz_norm",
]
