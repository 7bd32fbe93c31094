"""Estimator-style wrappers around the functional core.

Each class keeps its constructor arguments as plain attributes (so
``get_params``/``set_params``/``clone`` work) and stores fitted state in
trailing-underscore attributes.
"""

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted
from threadpoolctl import threadpool_limits

from .chains import (
    ContractionConfig,
    SingularSpectrum,
    empirical_moments,
    sample_spectrum,
    spectrum_entropy,
)
from .density import bromwich_invert, density_profile
from .exceptions import InvalidParameterError
from .haar import GroupKind, SeedSpec
from .limits import ScalingPoint, moment_limit
from .recursion import solve_recursion


def _one_realization(config, index):
    with threadpool_limits(limits=1):
        return sample_spectrum(config.realization(index)).sigma_sq


def sample_spectra(config, workers=1):
    """Spectra of ``config.realizations`` independent chains, in index order.

    BLAS is pinned to one thread inside every task, so the output does not
    depend on ``workers``.
    """
    jobs = (delayed(_one_realization)(config, i) for i in range(config.realizations))
    results = Parallel(n_jobs=workers)(jobs)
    return [SingularSpectrum.from_sigma_sq(s) for s in results]


def resolve_config(n, delta_n, tau=None, chain_length=None, **kwargs):
    if (tau is None) == (chain_length is None):
        raise InvalidParameterError("give exactly one of tau and chain_length")
    if tau is not None:
        return ContractionConfig.from_tau(n, delta_n, tau, **kwargs)
    return ContractionConfig(n, delta_n, chain_length, **kwargs)


class ContractionEnsemble(BaseEstimator):
    """Monte Carlo ensemble of random contraction chains.

    ``fit`` draws the realizations; afterwards ``predict(p)`` gives ensemble
    moments and ``transform(p)`` the per-realization moments.
    """

    def __init__(
        self,
        n=300,
        delta_n=1,
        tau=1.0,
        chain_length=None,
        group="unitary",
        realizations=20,
        seed=0,
        construction="product",
        n_jobs=1,
    ):
        self.n = n
        self.delta_n = delta_n
        self.tau = tau
        self.chain_length = chain_length
        self.group = group
        self.realizations = realizations
        self.seed = seed
        self.construction = construction
        self.n_jobs = n_jobs

    def _config(self):
        tau = self.tau if self.chain_length is None else None
        return resolve_config(
            self.n,
            self.delta_n,
            tau=tau,
            chain_length=self.chain_length,
            group=GroupKind.coerce(self.group),
            seed=SeedSpec(int(self.seed)),
            realizations=self.realizations,
            construction=self.construction,
        )

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        self.spectra_ = sample_spectra(self.config_, workers=self.n_jobs)
        self.tau_ = self.config_.tau
        return self

    def moments(self, p_list):
        check_is_fitted(self, "spectra_")
        return empirical_moments(self.spectra_, p_list)

    def predict(self, p_list):
        return self.moments(p_list).mean

    def transform(self, p_list):
        check_is_fitted(self, "spectra_")
        p = np.asarray(p_list, dtype=float)
        return np.array([[s.moment(k) for k in p] for s in self.spectra_])

    def entropy(self, alpha=1.0):
        check_is_fitted(self, "spectra_")
        return np.array([spectrum_entropy(s, alpha) for s in self.spectra_])

    def lambdas(self):
        check_is_fitted(self, "spectra_")
        return np.concatenate([s.lambdas for s in self.spectra_])


class MomentLimit(BaseEstimator):
    """Double-scaling limit S_p(tau) as a predictor over orders p."""

    def __init__(self, tau=1.0):
        self.tau = tau

    def fit(self, X=None, y=None):
        self.point_ = ScalingPoint(self.tau)
        return self

    def predict(self, p):
        check_is_fitted(self, "point_")
        return moment_limit(np.asarray(p, dtype=float), self.point_)


class RecursionMoments(BaseEstimator):
    """Large-N recursion run for ``steps`` steps (or up to ``tau``)."""

    def __init__(self, n=300, delta_n=1, steps=None, tau=1.0, p_max=20):
        self.n = n
        self.delta_n = delta_n
        self.steps = steps
        self.tau = tau
        self.p_max = p_max

    def fit(self, X=None, y=None):
        steps = self.steps
        if steps is None:
            steps = int(round(ScalingPoint(self.tau).tau * self.n / self.delta_n))
        self.table_ = solve_recursion(self.n, self.delta_n, steps, self.p_max)
        return self

    def predict(self, p):
        check_is_fitted(self, "table_")
        idx = np.asarray(p, dtype=int) - 1
        if np.any(idx < 0) or np.any(idx >= self.table_.values.shape[1]):
            raise InvalidParameterError(f"orders must lie in 1..{self.table_.values.shape[1]}")
        return self.table_.values[-1, idx]


class SingularValueDensity(BaseEstimator):
    """Limit density of lambda = -ln sigma^2 reconstructed from the moments."""

    def __init__(self, tau=1.0, lambda_max=10.0, points=400, order=20):
        self.tau = tau
        self.lambda_max = lambda_max
        self.points = points
        self.order = order

    def fit(self, X=None, y=None):
        self.profile_ = density_profile(self.tau, self.lambda_max, self.points, order=self.order)
        return self

    def predict(self, lam):
        check_is_fitted(self, "profile_")
        return np.clip(bromwich_invert(self.tau, lam, order=self.order), 0.0, None)
