"""BMA calibration of ensemble wind speed forecasts with exchangeable member groups."""
from .dataset import Archive, ForecastCase, ForecastProcess, TrainingSet, load, save, simulate, window
from .errors import (
    ArchiveFormatError,
    EmptyCaseError,
    InsufficientDataError,
    ParameterDomainError,
    SingularFitError,
)
from .estimation import EmConfig, censored_loglik, em_fit, fit, fit_bias
from .gamma import GammaLaw
from .kernels import BACKEND
from .mixture import BmaModel, GroupScheme, LinkParams, PredictiveDist, Scheme, build_predictive
from .verification import (
    crps_ensemble,
    crps_mixture,
    ks_uniform_test,
    pit_histogram,
    rank_histogram,
    score_ensemble,
    score_predictive,
)

__version__ = "0.1.0"
