"""Directed dependence measures built from convex functions of conditional CDFs."""
from .checkerboard import CheckerboardCopula, aggregate, ecbc, resolution, stripe_cdf
from .ingest import BivariateSample, PseudoSample, TiePolicy, read_csv, read_table, to_pseudo
from .measures import (
    MeasureResult,
    NormalizerNotPositive,
    alpha_phi,
    chatterjee_xi,
    estimate,
    lambda_phi,
    lambda_phi_oracle,
    lambda_psi,
    zeta1,
)
from .models import CopulaModel, parse_model, true_lambda
from .phi import ConvexFunction, abs_pow, custom, exp_abs, exp_signed, parse_phi

__version__ = "0.1.0"
