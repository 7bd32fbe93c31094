"""Truncated-matrix products, projector products and their spectra."""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, svdvals
from scipy.special import entr, logsumexp

from ._validation import check_alpha, check_count, check_dimension, check_tau, check_truncation
from .exceptions import (
    DegenerateStateError,
    InvalidInputError,
    InvalidParameterError,
    NumericalFailureError,
)
from .haar import GroupKind, SeedSpec, _Reflectors, as_generator, sample_orthonormal_columns, sample_unit_vector

SIGMA_SQ_FLOOR = 1e-300
LAMBDA_CAP = 690.0
CONTRACTION_SLACK = 1e-10

CONSTRUCTIONS = ("product", "projector")


@dataclass(frozen=True)
class ContractionConfig:
    """One ensemble experiment.

    ``construction="product"`` is C_L, a product of ``chain_length`` truncated
    Haar matrices; ``"projector"`` is Q_L, a product of ``chain_length``
    rank-(n - delta_n) projectors. Q_L is statistically equivalent to
    C_{L-1}, which is why :attr:`tau` counts one extra factor for products.
    """

    n: int
    delta_n: int
    chain_length: int
    group: GroupKind = GroupKind.UNITARY
    seed: SeedSpec = field(default_factory=SeedSpec)
    realizations: int = 1
    construction: str = "product"

    def __post_init__(self):
        check_dimension(self.n)
        check_truncation(self.delta_n, self.n, allow_zero=False)
        check_count(self.chain_length, "chain_length", minimum=0)
        check_count(self.realizations, "realizations", minimum=1)
        if self.construction not in CONSTRUCTIONS:
            raise InvalidParameterError(f"construction must be one of {CONSTRUCTIONS}, got {self.construction!r}")
        object.__setattr__(self, "group", GroupKind.coerce(self.group))
        if not isinstance(self.seed, SeedSpec):
            object.__setattr__(self, "seed", SeedSpec(int(self.seed)))

    @classmethod
    def from_tau(cls, n, delta_n, tau, construction="product", **kwargs):
        """Pick the chain length closest to the requested scaling parameter.

        Products use L = round(tau n / delta_n) - 1, projectors
        L = round(tau n / delta_n); the realized value is :attr:`tau`.
        """
        n = check_dimension(n)
        delta_n = check_truncation(delta_n, n, allow_zero=False)
        tau = check_tau(tau)
        steps = int(round(tau * n / delta_n))
        length = steps - 1 if construction == "product" else steps
        return cls(n, delta_n, max(length, 0), construction=construction, **kwargs)

    @property
    def projections(self):
        """Number of rank-reducing projections in the chain."""
        if self.construction == "product":
            return self.chain_length + 1 if self.chain_length > 0 else 0
        return self.chain_length

    @property
    def tau(self):
        return self.projections * self.delta_n / self.n

    def realization(self, index):
        """Config for realization ``index``, drawing from its own substream."""
        return replace(self, seed=self.seed.stream(index), realizations=1)

    def to_dict(self):
        return {
            "n": self.n,
            "delta_n": self.delta_n,
            "chain_length": self.chain_length,
            "group": self.group.value,
            "master_seed": self.seed.master_seed,
            "realizations": self.realizations,
            "construction": self.construction,
            "tau": self.tau,
        }


@dataclass(frozen=True)
class SingularSpectrum:
    """Squared singular values (descending) and exponents lambda = -ln sigma^2.

    Values below ``SIGMA_SQ_FLOOR`` are clamped before taking the log and
    marked in ``underflow``; they are never dropped.
    """

    sigma_sq: np.ndarray
    lambdas: np.ndarray
    underflow: np.ndarray

    @classmethod
    def from_sigma_sq(cls, sigma_sq):
        s = np.sort(np.asarray(sigma_sq, dtype=float).ravel())[::-1]
        if s.size == 0:
            raise InvalidInputError("empty spectrum")
        if not np.all(np.isfinite(s)):
            raise InvalidInputError("spectrum contains non-finite values")
        if s[-1] < 0:
            raise InvalidInputError("squared singular values must be non-negative")
        if s[0] > 1 + CONTRACTION_SLACK:
            raise InvalidInputError(
                f"largest squared singular value {s[0]!r} exceeds 1; not a contraction"
            )
        underflow = s < SIGMA_SQ_FLOOR
        lam = np.minimum(-np.log(np.maximum(s, SIGMA_SQ_FLOOR)), LAMBDA_CAP)
        s.setflags(write=False)
        lam.setflags(write=False)
        underflow.setflags(write=False)
        return cls(s, lam, underflow)

    @property
    def n(self):
        return self.sigma_sq.size

    def moment(self, p):
        return float(np.mean(self.sigma_sq ** p))


@dataclass(frozen=True)
class DensityMatrixSpectrum:
    """Eigenvalues of rho = C C^dagger / Tr C C^dagger, descending."""

    mu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.size == 0 or np.any(mu < 0) or abs(mu.sum() - 1) > 1e-12:
            raise InvalidInputError("density-matrix eigenvalues must be non-negative and sum to 1")


@dataclass(frozen=True)
class MomentTable:
    p: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    samples: int

    def rows(self):
        return list(zip(self.p.tolist(), self.mean.tolist(), self.se.tolist()))


def truncate(u, delta_n):
    """P U P with P projecting out the first ``delta_n`` basis vectors."""
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {u.shape}")
    delta_n = check_truncation(delta_n, u.shape[0])
    out = u.copy()
    out[:delta_n, :] = 0
    out[:, :delta_n] = 0
    return out


def iter_product_chain(config):
    """Yield C_0 = I, C_1, ..., C_L for one realization.

    The yielded array is the running product and is updated in place by the
    next step, so copy it if you keep it.
    """
    rng = as_generator(config.seed)
    n, dn = config.n, config.delta_n
    kind = config.group
    c = np.eye(n, dtype=kind.dtype)
    yield c
    for _ in range(config.chain_length):
        refl = _Reflectors(n, kind, rng)
        c[:dn, :] = 0
        c = refl.apply(c)
        c[:dn, :] = 0
        yield c


def product_chain(config):
    """C_L = P U_L P ... P U_1 P, dense left-to-right accumulation."""
    for c in iter_product_chain(config):
        pass
    return c


def _project(q, v):
    q -= v @ (v.conj().T @ q)
    return q


def iter_projector_chain(config):
    """Yield Q_1, ..., Q_L with P_n = 1 - V_n V_n^dagger."""
    rng = as_generator(config.seed)
    n, dn = config.n, config.delta_n
    q = np.eye(n, dtype=config.group.dtype)
    for _ in range(config.chain_length):
        v = sample_orthonormal_columns(n, dn, config.group, rng)
        yield _project(q, v)


def projector_chain(config):
    """Q_L = P_L ... P_1, each P_n removing delta_n random orthonormal directions."""
    if config.chain_length < 1:
        raise InvalidParameterError("projector_chain needs chain_length >= 1")
    for q in iter_projector_chain(config):
        pass
    return q


def kaczmarz_chain(n, seed=None):
    """Product of n rank-(n-1) projectors built from real isotropic unit vectors."""
    n = check_dimension(n)
    rng = as_generator(seed)
    q = np.eye(n)
    for _ in range(n):
        u = sample_unit_vector(n, GroupKind.ORTHOGONAL, rng)
        q -= np.outer(u, u @ q)
    return q


def chain_matrix(config):
    """Dispatch on ``config.construction``."""
    if config.construction == "product":
        return product_chain(config)
    return projector_chain(config)


def singular_spectrum(m):
    m = np.asarray(m)
    if m.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix has non-finite entries")
    try:
        s = svdvals(m, check_finite=False)
    except LinAlgError as exc:
        norm = float(np.linalg.norm(m))
        raise NumericalFailureError(
            f"SVD did not converge: {exc}",
            {"shape": m.shape, "frobenius_norm": norm, "condition_1norm": _cond_estimate(m)},
        ) from exc
    return SingularSpectrum.from_sigma_sq(s ** 2)


def _cond_estimate(m):
    try:
        return float(np.linalg.cond(m, p=1))
    except LinAlgError:
        return float("inf")


def empirical_moments(spectra, p_list):
    """Mean over realizations of N^-1 sum_i sigma_i^(2p), with its standard error."""
    spectra = list(spectra)
    if not spectra:
        raise InvalidInputError("need at least one spectrum")
    sizes = {s.n for s in spectra}
    if len(sizes) != 1:
        raise InvalidInputError(f"spectra have different dimensions {sorted(sizes)}")
    p = np.asarray(p_list, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < 1) or np.any(p != np.round(p)):
        raise InvalidInputError("orders must be a non-empty list of integers >= 1")
    per = np.array([[np.mean(s.sigma_sq ** k) for k in p] for s in spectra])
    mean = per.mean(axis=0)
    if len(spectra) > 1:
        se = per.std(axis=0, ddof=1) / np.sqrt(len(spectra))
    else:
        se = np.full_like(mean, np.nan)
    return MomentTable(p.astype(int), mean, se, len(spectra))


def density_matrix_spectrum(spectrum):
    s = np.asarray(spectrum.sigma_sq, dtype=float)
    total = s.sum()
    if not total > 0:
        raise DegenerateStateError("all singular values vanish; the state has zero trace")
    mu = s / total
    mu /= mu.sum()
    return DensityMatrixSpectrum(mu)


def entropy_vn(rho):
    """-sum mu ln mu with 0 ln 0 = 0."""
    mu = np.asarray(rho.mu, dtype=float)
    return float(np.clip(entr(mu).sum(), 0.0, np.log(mu.size)))


def entropy_renyi(rho, alpha):
    alpha = check_alpha(alpha)
    mu = np.asarray(rho.mu, dtype=float)
    mu = mu[mu > 0]
    return float(logsumexp(alpha * np.log(mu)) / (1 - alpha))


def spectrum_entropy(spectrum, alpha=1.0):
    """Entropy of the normalized spectrum; ``alpha=1`` gives von Neumann."""
    rho = density_matrix_spectrum(spectrum)
    if alpha == 1:
        return entropy_vn(rho)
    return entropy_renyi(rho, alpha)


def sample_spectrum(config):
    """Singular spectrum of one realization described by ``config``."""
    return singular_spectrum(chain_matrix(config))


def tau_checkpoints(n, delta_n, taus, construction="product"):
    """Chain lengths matching each requested tau."""
    return [ContractionConfig.from_tau(n, delta_n, t, construction=construction).chain_length for t in taus]
