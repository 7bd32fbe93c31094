"""Products of truncated Haar-random matrices.

Monte Carlo sampling of the chains, the large-N moment recursion, closed
forms in the double-scaling limit and the reconstructed singular-value
density.
"""

__version__ = "0.1.0"

from .chains import (
    ContractionConfig,
    DensityMatrixSpectrum,
    MomentTable,
    SingularSpectrum,
    density_matrix_spectrum,
    empirical_moments,
    entropy_renyi,
    entropy_vn,
    kaczmarz_chain,
    product_chain,
    projector_chain,
    singular_spectrum,
    truncate,
)
from .density import DensityProfile, bromwich_invert, chisq_density, chisq_moment, density_profile
from .estimators import ContractionEnsemble, MomentLimit, RecursionMoments, SingularValueDensity
from .exceptions import (
    ConsistencyError,
    ContractionError,
    DegenerateStateError,
    InvalidDimensionError,
    InvalidInputError,
    InvalidOrderError,
    InvalidParameterError,
    InvalidTruncationError,
    InversionFailureError,
    NumericalFailureError,
    OutOfDomainError,
)
from .haar import GroupKind, SeedSpec, sample_ginibre, sample_haar, sample_unit_vector
from .limits import (
    ScalingPoint,
    erlang_G,
    lambda_min,
    moment_asymptotic,
    moment_limit,
    renyi_offset,
    vn_entropy_offset,
)
from .recursion import GapTerm, MomentState, gap_terms, recursion_step, solve_recursion
from .special import gamma_upper
