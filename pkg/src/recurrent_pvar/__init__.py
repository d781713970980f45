"""IPCW estimation of mean functions for recurrent events, with p-variation diagnostics."""

from .errors import InputFormatError, RecurrentPvarError, RiskSetError, StudyPreconditionError
from .estimators import (
    EstimateCurve,
    asymptotic_variance_oracle,
    censoring_hazard_and_khat,
    estimate,
    estimate_kind,
    influence_at_truth,
    k_hat_observed,
    mean_uncensored,
    mu_ipcw_censored,
    mu_ipcw_observed,
)
from .process import (
    CensoredCensoring,
    CountingPath,
    LatentSample,
    ObservedCensoring,
    Sample,
    Subject,
    censor_path,
    decompose,
    empirical_mean,
    read_sample,
    write_sample,
)
from .pseudo import PseudoSet, conditional_unbiasedness_check, pseudo_values
from .sim import (
    Scenario,
    as_bound_study,
    convergence_study,
    coverage_and_variance_study,
    generate,
    influence_study,
    prop1_study,
    true_mean,
)
from .stepfn import (
    PVarResult,
    StepFunction,
    product_integral,
    pvar,
    pvar_bruteforce,
    pvar_distance_to_truth,
    stieltjes_integral,
)
from .truth import TruthSpec

__version__ = "0.1.0"
