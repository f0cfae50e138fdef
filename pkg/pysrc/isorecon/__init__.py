# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

import logging

from ._version import __version__
from .config import PipelineConfig
from .cubics import CubicPair, assemble_cubics, eval_cubics
from .errors import (
    ConfigError,
    DatasetFormatError,
    DegenerateNormalError,
    DegeneratePairError,
    DomainError,
    IllPosedWarpError,
    IsoReconError,
    NoRealSolutionError,
    UnreconstructableError,
)
from .evaluation import EvalReport, evaluate, run_sweep
from .geometry import (
    CameraIntrinsics,
    LocalShape,
    NormalizedPoint,
    embedding_jacobian,
    normal_from_shape,
)
from .integration import integrate
from .isometry import build_nng, classify_inliers, estimate_scales, propagate_scales
from .multiref import select_reference
from .normals import estimate_normals, initialize_shape, refine_shape
from .pipeline import Reconstruction, run_pipeline
from .resultant import solve_pair_resultant
from .substitution import solve_pair_substitution
from .synthetic import CorrespondenceSet, CylinderParams, generate_cylinder
from .warp import eval_warp, fit_warp, robust_fit_mad

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = (
    "__version__",
    "assemble_cubics",
    "build_nng",
    "CameraIntrinsics",
    "classify_inliers",
    "ConfigError",
    "CorrespondenceSet",
    "CubicPair",
    "CylinderParams",
    "DatasetFormatError",
    "DegenerateNormalError",
    "DegeneratePairError",
    "DomainError",
    "embedding_jacobian",
    "estimate_normals",
    "estimate_scales",
    "eval_cubics",
    "eval_warp",
    "EvalReport",
    "evaluate",
    "fit_warp",
    "generate_cylinder",
    "IllPosedWarpError",
    "initialize_shape",
    "integrate",
    "IsoReconError",
    "LocalShape",
    "normal_from_shape",
    "NormalizedPoint",
    "NoRealSolutionError",
    "PipelineConfig",
    "propagate_scales",
    "Reconstruction",
    "refine_shape",
    "robust_fit_mad",
    "run_pipeline",
    "run_sweep",
    "select_reference",
    "solve_pair_resultant",
    "solve_pair_substitution",
    "UnreconstructableError",
)
