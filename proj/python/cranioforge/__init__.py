"""Skull-landmark to face reconstruction with tissue-depth control.

Point sets are (n, 3) float arrays in millimeters; latent codes are 1-D
arrays in units of per-component standard deviations.
"""

from ._core import (
    AdaptationConfig,
    CranioforgeError,
    FaceModel,
    SkullFacePair,
    TissueDepthModel,
    adapt_face,
    build_synthetic_model,
    fit_tdd,
    generate_pairs,
    landmark_names,
    load_face_model,
    load_tdd,
    nme,
    read_pairs,
    reconstruct,
    region_partition,
    symmetry_pairing,
    version,
)

__version__ = version().split("+")[0]

__all__ = [
    "AdaptationConfig",
    "CranioforgeError",
    "FaceModel",
    "SkullFacePair",
    "TissueDepthModel",
    "adapt_face",
    "build_synthetic_model",
    "fit_tdd",
    "generate_pairs",
    "landmark_names",
    "load_face_model",
    "load_tdd",
    "nme",
    "read_pairs",
    "reconstruct",
    "region_partition",
    "symmetry_pairing",
    "version",
]
