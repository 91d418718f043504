"""Python interface to the dgstab C++ core."""

from ._dgstab import (
    DoublingParams,
    LabeledDataset,
    MlpModel,
    ParseError,
    TrainingError,
    ValidationError,
    acc_bound_from_loss,
    c1,
    c2,
    c3,
    check_preconditions,
    cross_entropy,
    delta_x,
    generate_poly_boundary,
    load_checkpoint,
    load_csv,
    loss_and_gradient,
    singular_spectrum,
    sudc_scan,
    train,
    verify_propagation,
)

__all__ = [
    "DoublingParams",
    "LabeledDataset",
    "MlpModel",
    "ParseError",
    "TrainingError",
    "ValidationError",
    "acc_bound_from_loss",
    "c1",
    "c2",
    "c3",
    "check_preconditions",
    "cross_entropy",
    "delta_x",
    "generate_poly_boundary",
    "load_checkpoint",
    "load_csv",
    "loss_and_gradient",
    "singular_spectrum",
    "sudc_scan",
    "train",
    "verify_propagation",
]
