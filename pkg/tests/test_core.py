import numpy as np
import pytest

from ampsde import (
    ModelSpec,
    SpectralField,
    effective_covariance,
    project_fast,
    project_slow,
    sobolev_norm,
    validate_spec,
)


def spec_of(lam, q, nu=0.0, alpha=0.0, scales=None):
    return ModelSpec(
        eigenvalues=lam, noise_amplitudes=q, nu=nu, alpha=alpha, basis_scales=scales
    )


def test_validate_accepts_burgers_like_spec():
    report = validate_spec(spec_of([0.0, 3.0, 8.0], [0.0, 1.0, 1.0]))
    assert report.ok
    assert report.violations == []


def test_validate_flags_slow_mode_forcing():
    report = validate_spec(spec_of([0.0, 3.0, 8.0], [0.5, 1.0, 1.0]))
    assert not report.ok
    assert any("q_1" in v for v in report.violations)


def test_validate_flags_degenerate_second_eigenvalue():
    report = validate_spec(spec_of([0.0, 0.0, 8.0], [0.0, 1.0, 1.0]))
    assert any("lambda_2" in v for v in report.violations)


def test_validate_reports_regularity_partial_sum():
    spec = spec_of([0.0, 3.0, 8.0], [0.0, 1.0, 2.0], alpha=1.0)
    report = validate_spec(spec)
    assert report.noise_regularity_sum == pytest.approx(1.0 + 4.0)


def test_sobolev_norm_alpha_zero_is_euclidean():
    spec = spec_of([0.0, 3.0, 8.0], [0.0, 0.0, 0.0])
    assert sobolev_norm(SpectralField([3.0, 4.0, 0.0]), spec, alpha=0.0) == 5.0


def test_sobolev_norm_weights_by_one_plus_eigenvalue():
    spec = spec_of([0.0, 3.0], [0.0, 0.0])
    value = sobolev_norm(SpectralField([1.0, 1.0]), spec, alpha=1.0)
    assert value == pytest.approx(np.sqrt(5.0), abs=1e-15)


def test_sobolev_norm_zero_field():
    spec = spec_of([0.0, 3.0, 8.0], [0.0, 0.0, 0.0], alpha=1.3)
    assert sobolev_norm(SpectralField(np.zeros(3)), spec) == 0.0


def test_sobolev_norm_length_mismatch():
    spec = spec_of([0.0, 3.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        sobolev_norm(SpectralField([1.0, 2.0, 3.0]), spec)


def test_projections_split_and_recompose(rng):
    f = SpectralField([2.0, 5.0, 7.0])
    assert np.array_equal(project_slow(f).coeffs, [2.0, 0.0, 0.0])
    assert np.array_equal(project_fast(f).coeffs, [0.0, 5.0, 7.0])
    for _ in range(20):
        g = SpectralField(rng.normal(size=6))
        total = project_slow(g) + project_fast(g)
        assert np.array_equal(total.coeffs, g.coeffs)
        assert np.all(project_slow(project_fast(g)).coeffs == 0.0)
        # both projections are idempotent
        assert np.array_equal(project_slow(project_slow(g)).coeffs, project_slow(g).coeffs)
        assert np.array_equal(project_fast(project_fast(g)).coeffs, project_fast(g).coeffs)


def test_effective_covariance_single_mode():
    sigma = 0.7
    cov = effective_covariance(spec_of([0.0, 3.0, 8.0], [0.0, sigma, 0.0]))
    assert np.allclose(cov.diag, [0.0, sigma**2 / 6.0, 0.0], atol=0, rtol=0)


def test_effective_covariance_zero_noise():
    cov = effective_covariance(spec_of([0.0, 3.0, 8.0], [0.0, 0.0, 0.0]))
    assert np.all(cov.diag == 0.0)


def test_effective_covariance_direct_substitution():
    cov = effective_covariance(spec_of([0.0, 3.0, 8.0], [0.0, 1.0, 1.0]))
    assert cov.diag[1] == pytest.approx(1.0 / 6.0, abs=1e-16)
    assert cov.diag[2] == pytest.approx(1.0 / 16.0, abs=1e-16)
    assert cov.diag[0] == 0.0


def test_effective_covariance_requires_valid_spec():
    with pytest.raises(ValueError):
        effective_covariance(spec_of([0.0, 0.0], [0.0, 1.0]))


def test_effective_covariance_rescaling_round_trip(rng):
    # q transforms as q / c; the covariance entries follow the squared rule and
    # a c then 1/c round trip restores them exactly.
    lam = [0.0, 3.0, 8.0, 15.0]
    q = np.array([0.0, 1.0, 0.5, 2.0])
    c = rng.uniform(0.5, 2.0, 4)
    base = effective_covariance(spec_of(lam, q)).diag
    scaled = effective_covariance(spec_of(lam, q / c)).diag
    assert np.allclose(scaled, base / c**2, rtol=1e-14, atol=0)
    back = effective_covariance(spec_of(lam, (q / c) / (1.0 / c))).diag
    assert np.allclose(back, base, rtol=1e-14, atol=0)
