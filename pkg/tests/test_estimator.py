import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialcrlb.channel import (SpatialCorrelation, SystemConfig, build_sigma, freq_cross_corr,
                                 sample_channel_matrices, sample_complex_normal)
from spatialcrlb.errors import InvalidArgumentError
from spatialcrlb.estimator import (SampleCorrelation, avg_mse, combine_partials, mle_spatial,
                                   partial_autocorrelation, sample_autocorrelation, significant_order)
from spatialcrlb.pilots import effective_A

from conftest import crandn


def test_partial_sums_combine_to_full(rng):
    v = crandn(rng, 100, 6)
    full = sample_autocorrelation(v, vectors=True)
    parts = combine_partials([partial_autocorrelation(v[:37]), partial_autocorrelation(v[37:])])
    np.testing.assert_allclose(parts.sigma_hat, full.sigma_hat, atol=1e-13)
    assert parts.n_samples == 100


def test_sample_autocorrelation_from_matrices(rng):
    m = crandn(rng, 50, 4, 2)
    v = m.transpose(0, 2, 1).reshape(50, -1)
    a = sample_autocorrelation(m).sigma_hat
    np.testing.assert_allclose(a, np.einsum("ni,nj->ij", v, v.conj()) / 50, atol=1e-13)
    np.testing.assert_allclose(a, a.conj().T)
    with pytest.raises(InvalidArgumentError):
        sample_autocorrelation([])


def test_significant_order(eva_setup):
    cfg, sp, pat, prof, A, omega = eva_setup
    assert significant_order(A, omega, 0.0)[0] == 9
    counts = [significant_order(A, omega, 0.1, t)[0] for t in (-20, -10, 0, 10, 20)]
    assert counts == sorted(counts, reverse=True)
    assert significant_order(A, omega, 1.0, -np.inf)[0] == 16
    n, idx = significant_order(A, omega, 0.01, 0.0)
    np.testing.assert_array_equal(idx, np.arange(n))


@pytest.mark.parametrize("sigma_n2", [0.0, 0.3])
@pytest.mark.parametrize("L_s", [1, 4, 9])
def test_plug_in_exact_covariance_recovers_truth(eva_setup, sigma_n2, L_s):
    cfg, sp, pat, prof, A, omega = eva_setup
    cfg = SystemConfig(sigma_n2=sigma_n2)
    S = build_sigma(cfg, sp, A, omega)
    res = mle_spatial(SampleCorrelation(S, 1), A, omega, sigma_n2, L_s)
    # the 9th singular value of A is ~1e-11 of the first, which amplifies rounding
    np.testing.assert_allclose(res.xi_hat, sp.xi_s(), atol=1e-8 if L_s < 9 else 1e-5)
    assert res.L_s == L_s
    assert res.per_entry_diagnostics["max_diag_imag"] < (1e-8 if L_s < 9 else 1e-5)


def test_plug_in_exact_with_cross_terms(eva_setup):
    cfg, sp, pat, prof, A, omega = eva_setup
    x = pat.x_p
    cross = {s: effective_A(x, freq_cross_corr(prof, 128, pat.tones[0], s)) for s in range(-3, 4)}
    S = build_sigma(cfg, sp, A, omega, cross_A=cross)
    res = mle_spatial(SampleCorrelation(S, 1), A, omega, 0.0, 9, n_R=4, cross_A=cross)
    np.testing.assert_allclose(res.xi_hat, sp.xi_s(), atol=1e-5)
    res = mle_spatial(SampleCorrelation(S, 1), A, omega, 0.0, 4, n_R=4, cross_A=cross)
    np.testing.assert_allclose(res.xi_hat, sp.xi_s(), atol=1e-8)
    # ignoring the cross terms biases the off-antenna blocks
    naive = mle_spatial(SampleCorrelation(S, 1), A, omega, 0.0, 9)
    assert np.max(np.abs(naive.xi_hat - sp.xi_s())) > 1e-3


@given(st.floats(0.1, 10.0), st.integers(1, 9))
@settings(max_examples=25, deadline=None)
def test_scale_equivariance(eva_setup, c, L_s):
    cfg, sp, pat, prof, A, omega = eva_setup
    S = build_sigma(cfg, sp, A, omega) + 0.01 * np.eye(256)
    a = mle_spatial(SampleCorrelation(S, 1), A, omega, 0.0, L_s).xi_hat
    b = mle_spatial(SampleCorrelation(c * S, 1), A, omega, 0.0, L_s).xi_hat
    assert np.linalg.norm(b - c * a) <= 1e-10 * np.linalg.norm(c * a)


def test_hermitian_option_and_weights(eva_setup):
    cfg, sp, pat, prof, A, omega = eva_setup
    v = sample_channel_matrices(cfg, sp, pat, prof, "iid", seed=0, N_t=300, as_vectors=True)
    sc = sample_autocorrelation(v, vectors=True)
    h = mle_spatial(sc, A, omega, 0.0, 4, hermitian=True).xi_hat
    np.testing.assert_allclose(h, h.conj().T)
    w = mle_spatial(sc, A, omega, 0.0, 2, weights=[1.0, 0.0]).xi_hat
    np.testing.assert_allclose(w, mle_spatial(sc, A, omega, 0.0, 1).xi_hat)
    with pytest.raises(InvalidArgumentError):
        mle_spatial(sc, A, omega, 0.0, 2, weights=[0.5, 0.6])
    with pytest.raises(InvalidArgumentError):
        mle_spatial(sc, A, omega, 0.0, 10)


def test_mle_is_unbiased(eva_setup):
    cfg, sp, pat, prof, A, omega = eva_setup
    est = []
    for seed in range(40):
        v = sample_channel_matrices(cfg, sp, pat, prof, "iid", seed=seed, N_t=200, as_vectors=True)
        est.append(mle_spatial(sample_autocorrelation(v, vectors=True), A, omega, 0.0, 9).xi_hat)
    est = np.array(est)
    z = (est.mean(0) - sp.xi_s()) / (est.std(0, ddof=1) / np.sqrt(len(est)))
    assert np.mean(np.abs(z) < 3) > 0.97


def test_wishart_mean_and_variance(rng):
    g = crandn(rng, 3, 3)
    S = g @ g.conj().T / 3
    n, trials = 20, 3000
    est = np.array([sample_autocorrelation(sample_complex_normal(S, n, seed=t), vectors=True).sigma_hat
                    for t in range(trials)])
    se = np.sqrt(np.real(np.outer(np.diag(S), np.diag(S))) / n / trials)
    assert np.all(np.abs(est.mean(0) - S) < 4 * se)
    # Var[S_hat_ij] = S_ii S_jj / n for complex Wishart
    var = est.var(0)
    np.testing.assert_allclose(var, np.real(np.outer(np.diag(S), np.diag(S))) / n, rtol=0.1)


def test_avg_mse():
    assert avg_mse(np.eye(2), np.zeros((2, 2))) == 0.5
    with pytest.raises(InvalidArgumentError):
        avg_mse(np.eye(2), np.eye(3))
