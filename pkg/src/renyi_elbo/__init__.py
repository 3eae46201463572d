"""Renyi divergences, the P-PCA Renyi regularizer and RELBO bounds, with
oracles for every closed form."""
from .bounds import (
    BoundReport,
    GaussianEncoder,
    beta_failure_term,
    bound_report,
    c_alpha,
    optimal_encoder,
    reconstruction_term,
)
from .dichotomic import (
    DichotomicJoint,
    default_construction,
    f_alpha,
    f_alpha_tilted,
    limit_scan,
    minimize_over_prior,
    shannon_decomposition_residual,
    variational_rep_residual,
)
from .divergence import (
    DIVERGENT,
    DiscreteDist,
    Gaussian1,
    GaussianN,
    RenyiOrder,
    geometric_mixture_gaussian,
    identity_b1_residual,
    kl_divergence_discrete,
    kl_divergence_gaussian,
    mixed_discrete,
    renyi_divergence_discrete,
    renyi_divergence_gaussian,
    renyi_entropy_discrete,
    shannon_entropy_discrete,
)
from .errors import (
    DegenerateModelError,
    DimensionError,
    InfeasibleOrderError,
    InvalidDistributionError,
    InvalidOrderError,
    RenyiElboError,
)
from .gm_landscape import (
    BivariateParams,
    GmGrid,
    PriorParams,
    conditional,
    feasibility,
    ibar_closed,
    ibar_oracle,
    ibar_rho1,
    sweep,
)
from .oracle import OracleResult, oracle_renyi_divergence
from .ppca import (
    LatentSpectrum,
    PpcaModel,
    RegularizerBreakdown,
    dense_oracle_regularizer,
    fit_from_data,
    h_alpha_diag,
    log_evidence,
    logdet_term_corrected,
    logdet_term_paper,
    posterior,
    renyi_regularizer,
    sample_data,
    scalar_term,
    spectrum,
)

__version__ = "0.1.0"
