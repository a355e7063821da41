"""Intrinsic volumes and Steiner entire functions of Gaussian-bounded convex sets.

Submodules
----------
volseq
    Intrinsic-volume sequences (Wiener spiral, spiral bridge, boxes, user
    data) and their ultra-log-concavity and Chevet checks.
growth
    Order, type and m_k-decay estimators and the GC classification.
evalzero
    Evaluation of the Steiner function, closed forms, zeros and Hadamard
    products.
gaussmc
    Seeded Monte Carlo checks of the Gaussian identities for finite boxes.
cli
    The ``steiner`` command.
"""

from .errors import (
    InconsistentSequenceError,
    InvalidInputError,
    InvalidSpecError,
    NonConvergenceError,
    SteinerError,
    WindowError,
)
from .evalzero import (
    ZeroSet,
    box_zeros,
    build_function,
    compare,
    convergence_exponent,
    eval_box_product,
    eval_series,
    find_zeros,
    hadamard_reconstruct,
    hyper0F2,
)
from .gaussmc import MCEstimate, tsirelson_mc, tube_volume_mc, wills_mc
from .growth import (
    Classification,
    GrowthReport,
    analyze,
    estimate_order_from_coeffs,
    estimate_order_from_mk,
    estimate_type,
    gao_vitale_test,
    mk_decay_exponent,
    oscillation_bounds,
)
from .volseq import (
    BoxSpec,
    VolumeSequence,
    box_volume_sequence,
    bridge_volume_sequence,
    mk_sequence,
    spiral_volume_sequence,
    user_volume_sequence,
    validate_chevet,
    validate_ulc,
    wills,
)

__version__ = "0.1.0"
