"""Sparse coding of surface TBM ring patches sampled in the hyperbolic disk."""

__version__ = "0.1.0"

from .coding import Dictionary, SccConfig, SparseCode, encode, train  # noqa: E402
from .geometry import klein_distance, poincare_distance  # noqa: E402
from .mesh import ParamSurface, build_surface, load_surface, save_surface  # noqa: E402
from .patches import SamplingConfig, fpsbs_sample  # noqa: E402
from .pipeline import adaboost_train, cross_validate, evaluate, max_pool  # noqa: E402

__all__ = [
    "Dictionary", "ParamSurface", "SamplingConfig", "SccConfig", "SparseCode",
    "adaboost_train", "build_surface", "cross_validate", "encode", "evaluate",
    "fpsbs_sample", "klein_distance", "load_surface", "max_pool", "poincare_distance",
    "save_surface", "train",
]
