"""Randomized dimension reduction (GRDR) for Gaussian expectations.

Estimates ``E g(X)`` for ``X ~ N(0, M)`` by running short Markov chains that
resample a random prefix of ``U`` in ``X = A U`` each step, with ``A`` a PCA
(or Cholesky) factor of ``M``.
"""

from ._backend import HAVE_EXTENSION
from .analysis import (
    CouplingCurve,
    bound_n_var,
    bound_eq6,
    bound_factor_q,
    bound_harmonic,
    bound_lemma41,
    coupling_curve_empirical,
    coupling_curve_linear,
    efficiency_report,
    linear_var_fn,
    probe_kappa,
)
from .covmodel import CovarianceSpec, make_eigen_decay, make_equicorrelation, validate
from .errors import ConfigError, GrdrError, NotPSDError, ScheduleError
from .estimator import EstimatorResult, grdr_chain, replicate_grdr, standard_mc
from .factor import FactorMatrix, cholesky_factor, pca_factor, permute_decreasing
from .payoffs import Payoff, analytic_mean, basket_call, constant, evaluate, linear
from .rng import RngStream
from .schedule import QSchedule, from_factor, harmonic

__version__ = "0.1.0"
