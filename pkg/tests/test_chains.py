import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import LinAlgError

from randcontract import chains
from randcontract.chains import (
    ContractionConfig,
    DensityMatrixSpectrum,
    SingularSpectrum,
    density_matrix_spectrum,
    empirical_moments,
    entropy_renyi,
    entropy_vn,
    iter_product_chain,
    kaczmarz_chain,
    product_chain,
    projector_chain,
    singular_spectrum,
    spectrum_entropy,
    tau_checkpoints,
    truncate,
)
from randcontract.exceptions import (
    DegenerateStateError,
    InvalidDimensionError,
    InvalidInputError,
    InvalidParameterError,
    InvalidTruncationError,
    NumericalFailureError,
)
from randcontract.haar import SeedSpec, sample_haar

spectra_st = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40).filter(lambda v: sum(v) > 1e-6)


def test_config_validation():
    with pytest.raises(InvalidDimensionError):
        ContractionConfig(0, 1, 1)
    with pytest.raises(InvalidTruncationError):
        ContractionConfig(4, 4, 1)
    with pytest.raises(InvalidTruncationError):
        ContractionConfig(4, 0, 1)
    with pytest.raises(InvalidParameterError):
        ContractionConfig(4, 1, -1)
    with pytest.raises(InvalidParameterError):
        ContractionConfig(4, 1, 1, realizations=0)
    with pytest.raises(InvalidParameterError):
        ContractionConfig(4, 1, 1, construction="tree")


def test_tau_conventions():
    c = ContractionConfig.from_tau(300, 1, 1.0)
    assert c.chain_length == 299 and c.tau == 1.0
    q = ContractionConfig.from_tau(300, 1, 1.0, construction="projector")
    assert q.chain_length == 300 and q.tau == 1.0
    c2 = ContractionConfig.from_tau(300, 2, 0.5)
    assert c2.chain_length == 74 and c2.tau == pytest.approx(0.5)
    assert ContractionConfig(10, 1, 0).tau == 0
    assert tau_checkpoints(300, 1, [0.5, 1, 2]) == [149, 299, 599]
    d = c.to_dict()
    assert d["chain_length"] == 299 and d["group"] == "unitary" and d["tau"] == 1.0


def test_realization_streams_differ():
    c = ContractionConfig(6, 1, 2, seed=SeedSpec(5), realizations=3)
    a, b = c.realization(0), c.realization(1)
    assert a.seed == SeedSpec(5, 0) and b.seed == SeedSpec(5, 1) and a.realizations == 1
    assert not np.allclose(product_chain(a), product_chain(b))


def test_truncate_examples():
    out = truncate(np.eye(4), 1)
    assert np.array_equal(out, np.diag([0.0, 1, 1, 1]))
    u = sample_haar(6, "unitary", SeedSpec(1))
    assert np.array_equal(truncate(u, 0), u)
    t = truncate(u, 2)
    assert np.all(t[:2, :] == 0) and np.all(t[:, :2] == 0)
    s = np.linalg.svd(t, compute_uv=False)
    assert np.sum(s > 1e-12) <= 4
    with pytest.raises(InvalidTruncationError):
        truncate(u, 6)
    with pytest.raises(InvalidInputError):
        truncate(np.ones((2, 3)), 1)


def test_product_chain_matches_explicit_product():
    config = ContractionConfig(7, 2, 3, group="unitary", seed=SeedSpec(17))
    rng = SeedSpec(17).generator()
    expected = np.eye(7, dtype=complex)
    from randcontract.haar import _Reflectors

    for _ in range(3):
        u = _Reflectors(7, config.group, rng).matrix()
        expected = truncate(u, 2) @ truncate(expected, 2)
    assert np.allclose(product_chain(config), expected, atol=1e-12)


def test_product_chain_identity_and_contraction():
    assert np.array_equal(product_chain(ContractionConfig(5, 1, 0)), np.eye(5))
    for group in ("unitary", "orthogonal"):
        c = product_chain(ContractionConfig(40, 3, 12, group=group, seed=SeedSpec(2)))
        s = singular_spectrum(c)
        assert s.sigma_sq[0] <= 1 + 1e-10
        # Every factor removes the same delta_n directions on the right.
        assert np.sum(s.sigma_sq > 1e-20) <= 37


def test_iter_product_chain_yields_every_step():
    mats = [m.copy() for m in iter_product_chain(ContractionConfig(5, 1, 3, seed=SeedSpec(1)))]
    assert len(mats) == 4 and np.array_equal(mats[0], np.eye(5))


def test_first_moment_small_oracle():
    # E Tr(C C^dagger)/N for L=1, N=4, delta_n=1: (N - delta_n)^2 / N^2 = 9/16.
    base = ContractionConfig(4, 1, 1, seed=SeedSpec(99))
    m = np.array([np.sum(np.abs(product_chain(base.realization(i))) ** 2) / 4 for i in range(20_000)])
    assert abs(m.mean() - 0.5625) <= 4 * m.std(ddof=1) / np.sqrt(m.size)


def test_projector_chain_properties():
    q = projector_chain(ContractionConfig(9, 2, 1, construction="projector", seed=SeedSpec(3)))
    assert np.max(np.abs(q @ q - q)) <= 1e-10
    assert np.allclose(q, q.conj().T)
    with pytest.raises(InvalidParameterError):
        projector_chain(ContractionConfig(9, 2, 0, construction="projector"))
    q5 = projector_chain(ContractionConfig(30, 2, 5, construction="projector", group="unitary"))
    assert singular_spectrum(q5).sigma_sq[0] <= 1 + 1e-10


def test_projector_matches_shorter_product():
    n, dn, L, runs = 100, 2, 5, 150
    qc = ContractionConfig(n, dn, L, construction="projector", seed=SeedSpec(1))
    cc = ContractionConfig(n, dn, L - 1, seed=SeedSpec(2))
    q = empirical_moments([singular_spectrum(projector_chain(qc.realization(i))) for i in range(runs)], range(1, 6))
    c = empirical_moments([singular_spectrum(product_chain(cc.realization(i))) for i in range(runs)], range(1, 6))
    assert np.all(np.abs(q.mean - c.mean) <= 3 * np.hypot(q.se, c.se))


def test_singular_spectrum_examples():
    assert np.allclose(singular_spectrum(np.eye(3)).sigma_sq, 1)
    s = singular_spectrum(np.diag([0.0, 0.5]))
    assert np.allclose(s.sigma_sq, [0.25, 0.0])
    assert s.underflow.tolist() == [False, True]
    assert s.lambdas[1] == chains.LAMBDA_CAP or s.lambdas[1] == pytest.approx(-np.log(1e-300))
    u = sample_haar(30, "unitary", SeedSpec(4))
    assert np.max(np.abs(singular_spectrum(u).sigma_sq - 1)) <= 1e-10
    with pytest.raises(InvalidInputError):
        singular_spectrum(np.array([[np.nan]]))
    with pytest.raises(InvalidInputError):
        singular_spectrum(np.ones(3))


def test_spectrum_rejects_non_contraction():
    with pytest.raises(InvalidInputError):
        SingularSpectrum.from_sigma_sq([1.1, 0.2])
    s = SingularSpectrum.from_sigma_sq([1 + 1e-12, 0.5, 1e-320])
    assert s.underflow.tolist() == [False, False, True]
    assert np.all(np.isfinite(s.lambdas)) and np.all(s.lambdas >= -1e-10)


def test_svd_failure_is_numerical(monkeypatch):
    def broken(*args, **kwargs):
        raise LinAlgError("no convergence")

    monkeypatch.setattr(chains, "svdvals", broken)
    with pytest.raises(NumericalFailureError) as info:
        singular_spectrum(np.eye(3))
    assert "condition_1norm" in info.value.diagnostics


def test_empirical_moments_examples():
    eye = SingularSpectrum.from_sigma_sq(np.ones(4))
    t = empirical_moments([eye, eye], [1, 2, 3])
    assert np.allclose(t.mean, 1) and np.allclose(t.se, 0)
    assert len(t.rows()) == 3
    single = empirical_moments([eye], [1])
    assert np.isnan(single.se[0])
    with pytest.raises(InvalidInputError):
        empirical_moments([], [1])
    with pytest.raises(InvalidInputError):
        empirical_moments([eye, SingularSpectrum.from_sigma_sq(np.ones(3))], [1])
    with pytest.raises(InvalidInputError):
        empirical_moments([eye], [0])


@given(spectra_st)
def test_moments_non_increasing(values):
    s = SingularSpectrum.from_sigma_sq(values)
    m = empirical_moments([s], range(1, 8)).mean
    assert np.all(np.diff(m) <= 1e-15)


def test_density_matrix_examples():
    rho = density_matrix_spectrum(SingularSpectrum.from_sigma_sq([1, 1]))
    assert np.allclose(rho.mu, 0.5)
    pure = density_matrix_spectrum(SingularSpectrum.from_sigma_sq([1, 0, 0]))
    assert np.allclose(pure.mu, [1, 0, 0])
    assert entropy_vn(pure) == 0
    with pytest.raises(DegenerateStateError):
        density_matrix_spectrum(SingularSpectrum.from_sigma_sq([0, 0]))
    with pytest.raises(InvalidInputError):
        DensityMatrixSpectrum(np.array([0.7, 0.7]))


def test_entropy_examples():
    n = 50
    mixed = density_matrix_spectrum(SingularSpectrum.from_sigma_sq(np.full(n, 0.3)))
    assert entropy_vn(mixed) == pytest.approx(np.log(n), abs=1e-12)
    for alpha in (0.5, 2, 7.5):
        assert entropy_renyi(mixed, alpha) == pytest.approx(np.log(n), abs=1e-12)
    half = density_matrix_spectrum(SingularSpectrum.from_sigma_sq([1, 1]))
    assert entropy_vn(half) == pytest.approx(np.log(2), abs=1e-15)
    assert entropy_renyi(half, 2) == pytest.approx(np.log(2), abs=1e-15)
    with pytest.raises(InvalidParameterError):
        entropy_renyi(half, 1)
    with pytest.raises(InvalidParameterError):
        entropy_renyi(half, 0)


@given(spectra_st)
def test_entropy_bounds_and_renyi_order(values):
    s = SingularSpectrum.from_sigma_sq(values)
    rho = density_matrix_spectrum(s)
    assert abs(rho.mu.sum() - 1) <= 1e-12
    vn = entropy_vn(rho)
    assert -1e-12 <= vn <= np.log(len(values)) + 1e-12
    r = [entropy_renyi(rho, a) for a in (0.3, 0.9, 1.5, 3.0)]
    assert np.all(np.diff(r) <= 1e-10)
    assert r[1] + 1e-10 >= vn >= r[2] - 1e-10


def test_renyi_central_difference_gives_vn(rng):
    for _ in range(10):
        s = SingularSpectrum.from_sigma_sq(rng.uniform(0, 1, 30))
        rho = density_matrix_spectrum(s)
        mid = 0.5 * (entropy_renyi(rho, 1 - 1e-4) + entropy_renyi(rho, 1 + 1e-4))
        assert mid == pytest.approx(entropy_vn(rho), abs=1e-6)
        assert spectrum_entropy(s, 2.0) == pytest.approx(entropy_renyi(rho, 2.0))


def test_kaczmarz_chain():
    assert np.array_equal(kaczmarz_chain(1, SeedSpec(1)), np.zeros((1, 1)))
    q = kaczmarz_chain(40, SeedSpec(1))
    assert np.isrealobj(q)
    assert singular_spectrum(q).sigma_sq[0] <= 1 + 1e-10
    assert np.array_equal(q, kaczmarz_chain(40, SeedSpec(1)))
