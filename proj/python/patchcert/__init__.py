"""Certified recovery and detection for semantic segmentation under patch attacks."""

from ._patchcert import (
    BackendError,
    DimensionError,
    GeometryError,
    InsufficientMasksError,
    MaskSet,
    PatchcertError,
    ThreatModel,
    VerificationError,
    build_masks,
    certify,
    compute_strength,
    detection_verify,
    evaluate,
    min_recovery_masks,
    recovery_vote,
    square_patch_side,
    verify_detection_coverage,
)

__all__ = [
    "BackendError",
    "DimensionError",
    "GeometryError",
    "InsufficientMasksError",
    "MaskSet",
    "PatchcertError",
    "ThreatModel",
    "VerificationError",
    "build_masks",
    "certify",
    "compute_strength",
    "detection_verify",
    "evaluate",
    "min_recovery_masks",
    "recovery_vote",
    "square_patch_side",
    "verify_detection_coverage",
]
