"""Seeded sampling of Haar-distributed unitary and orthogonal matrices.

Every sampler takes a ``seed`` that is either a :class:`SeedSpec` (fresh,
reproducible stream) or an existing :class:`numpy.random.Generator` (draws
continue from that stream). Chains use the latter so that one realization
consumes a single substream.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import get_lapack_funcs

from ._validation import check_count, check_dimension
from .exceptions import InvalidDimensionError, InvalidParameterError

_MASK64 = (1 << 64) - 1


class GroupKind(str, Enum):
    UNITARY = "unitary"
    ORTHOGONAL = "orthogonal"

    @property
    def dtype(self):
        return np.complex128 if self is GroupKind.UNITARY else np.float64

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidParameterError(
                f"group must be one of {[k.value for k in cls]}, got {value!r}"
            ) from None


@dataclass(frozen=True)
class SeedSpec:
    """A master seed plus the index of one independent substream.

    The substream is derived by hashing ``(master_seed, stream_index)``
    through :class:`numpy.random.SeedSequence`, so realization ``r`` draws the
    same numbers whatever order or process it runs in.
    """

    master_seed: int = 0
    stream_index: int = 0

    def __post_init__(self):
        if self.stream_index < 0:
            raise InvalidParameterError("stream_index must be non-negative")

    def generator(self):
        entropy = [int(self.master_seed) & _MASK64, int(self.stream_index)]
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def stream(self, index):
        return SeedSpec(self.master_seed, int(index))


def as_generator(seed):
    """Turn a SeedSpec, Generator, int or None into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.generator()
    if seed is None:
        return SeedSpec().generator()
    return SeedSpec(int(seed)).generator()


def _ginibre(shape, kind, rng):
    if kind is GroupKind.UNITARY:
        z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        z *= np.sqrt(0.5)
        return z
    return rng.standard_normal(shape)


def sample_ginibre(n, kind=GroupKind.UNITARY, seed=None):
    """n x n matrix of i.i.d. Gaussians with E|z|^2 = 1.

    Real N(0, 1) entries for the orthogonal group, complex entries with
    independent N(0, 1/2) real and imaginary parts for the unitary group.
    """
    n = check_dimension(n)
    return _ginibre((n, n), GroupKind.coerce(kind), as_generator(seed))


class _Reflectors:
    """Householder form of a Haar matrix, U = Q diag(phase).

    Keeping U in factored form lets a chain apply it with one LAPACK call
    instead of building Q and then multiplying.
    """

    __slots__ = ("packed", "tau", "phase", "dtype")

    def __init__(self, n, kind, rng):
        z = _ginibre((n, n), kind, rng)
        geqrf = get_lapack_funcs("geqrf", (z,))
        packed, tau, _, info = geqrf(z, lwork=max(1, 64 * n), overwrite_a=True)
        if info != 0:
            raise np.linalg.LinAlgError(f"geqrf failed with info={info}")
        diag = np.diagonal(packed).copy()
        mod = np.abs(diag)
        # Diagonal of R is nonzero with probability one.
        self.phase = np.where(mod > 0, diag / np.where(mod > 0, mod, 1), 1)
        self.packed = packed
        self.tau = tau
        self.dtype = z.dtype

    def matrix(self):
        name = "ungqr" if np.iscomplexobj(self.packed) else "orgqr"
        orgqr = get_lapack_funcs(name, (self.packed,))
        n = self.packed.shape[0]
        q, _, info = orgqr(self.packed, self.tau, lwork=max(1, 64 * n))
        if info != 0:
            raise np.linalg.LinAlgError(f"{name} failed with info={info}")
        return q * self.phase[None, :]

    def apply(self, x):
        """Return U @ x, overwriting x."""
        name = "unmqr" if np.iscomplexobj(self.packed) else "ormqr"
        ormqr = get_lapack_funcs(name, (self.packed, x))
        x *= self.phase[:, None]
        n = self.packed.shape[0]
        out, _, info = ormqr("L", "N", self.packed, self.tau, x, lwork=max(1, 64 * n), overwrite_c=True)
        if info != 0:
            raise np.linalg.LinAlgError(f"{name} failed with info={info}")
        return out


def sample_haar(n, kind=GroupKind.UNITARY, seed=None):
    """Haar-distributed element of U(n) or O(n).

    QR of a Ginibre matrix with each column j of Q multiplied by
    R_jj / |R_jj|, which makes the factorization unique and the law of Q
    exactly Haar. Without that correction the result is orthonormal but biased.
    """
    n = check_dimension(n)
    return _Reflectors(n, GroupKind.coerce(kind), as_generator(seed)).matrix()


def sample_orthonormal_columns(n, k, kind=GroupKind.UNITARY, seed=None):
    """n x k matrix with orthonormal, isotropically distributed columns."""
    n = check_dimension(n)
    k = check_count(k, "k", minimum=1, error=InvalidDimensionError)
    if k > n:
        raise InvalidDimensionError(f"cannot draw {k} orthonormal columns in dimension {n}")
    z = _ginibre((n, k), GroupKind.coerce(kind), as_generator(seed))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def sample_unit_vector(n, kind=GroupKind.ORTHOGONAL, seed=None):
    """Isotropic unit vector in R^n (orthogonal) or C^n (unitary)."""
    n = check_dimension(n)
    kind = GroupKind.coerce(kind)
    rng = as_generator(seed)
    while True:
        v = _ginibre((n,), kind, rng)
        norm = np.linalg.norm(v)
        if norm > 0:
            return v / norm
