"""Identification of norm-bounded linear inclusions by quadric inclusion programs."""
from .errors import *  # noqa: F401,F403
from .inclusion import (  # noqa: F401
    SSDD,
    DataPoint,
    Inclusion,
    QuadricForm,
    cone_width,
    cone_width_inclusion,
    containment_falsify,
    containment_necessary,
    inclusion_from_ssdd,
    membership,
    quadric_from_inclusion,
    ssdd_from_inclusion,
    ssdd_residual,
    witness_delta,
)
from .noise import NoiseSummary, chi2_threshold, offset_value, phi, phi_inv, summarize  # noqa: F401
from .solver import (  # noqa: F401
    Mode,
    QipProblem,
    SolverConfig,
    SolverResult,
    Status,
    assemble,
    certify_specialness,
    check_kkt,
    initialize,
    linear_relation,
    solve,
)

__version__ = "0.1.0"
