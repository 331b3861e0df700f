import json
import math

import numpy as np
import pytest
from scipy.linalg import hadamard

from newma.errors import ConfigurationError, DegenerateBandwidthError, InputError, UnsupportedOperationError
from newma.feature_map import (
    FeatureMapSpec,
    build_feature_map,
    fwht,
    gaussian_kernel,
    kernel_estimate,
    median_trick_bandwidth,
)


def test_identity_map_is_passthrough():
    fmap = build_feature_map(FeatureMapSpec("identity", 3))
    assert fmap.output_dim == 3
    assert fmap.bound is None
    np.testing.assert_array_equal(fmap.embed([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


def test_moments_count_and_values():
    fmap = build_feature_map(FeatureMapSpec("moments", 2, order=2))
    # x, y, x^2, xy, y^2
    assert fmap.output_dim == 5
    np.testing.assert_allclose(fmap.embed([2.0, 3.0]), [2, 3, 4, 6, 9])


def test_histogram_indicators():
    bins = (((0.0,), (1.0,)), ((1.0,), (2.0,)))
    fmap = build_feature_map(FeatureMapSpec("histogram", 1, bins=bins))
    np.testing.assert_array_equal(fmap.embed([0.5]), [1, 0])
    np.testing.assert_array_equal(fmap.embed([1.0]), [0, 1])
    assert fmap.bound == pytest.approx(math.sqrt(2))


def test_rff_unit_norm_and_packing():
    fmap = build_feature_map(FeatureMapSpec("rff", 2, m=4, sigma=1.0, seed=7))
    assert fmap.output_dim == 8
    x = np.array([0.3, -1.2])
    v = fmap.embed(x)
    assert abs(np.linalg.norm(v) - 1) < 1e-12
    phase = fmap.params["W"] @ x
    np.testing.assert_allclose(v[0::2], np.cos(phase) / 2)
    np.testing.assert_allclose(v[1::2], np.sin(phase) / 2)


def test_zero_frequency_gives_constant_feature():
    fmap = build_feature_map(FeatureMapSpec("rff", 3, m=1, sigma=1.0))
    fmap.params["W"][:] = 0.0
    np.testing.assert_array_equal(fmap.embed([5.0, -2.0, 1.0]), [1.0, 0.0])


def test_fastfood_padding_and_blocks():
    spec = FeatureMapSpec("fastfood", 5, m=16, sigma=2.0, seed=1)
    assert spec.padded_dim == 8
    fmap = build_feature_map(spec)
    assert fmap.params["G"].shape == (2, 8)
    assert fmap.output_dim == 32


def test_fastfood_rejects_non_multiple():
    with pytest.raises(ConfigurationError):
        FeatureMapSpec("fastfood", 5, m=12, sigma=1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="rff", d=2, m=0, sigma=1.0),
        dict(kind="rff", d=2, m=4, sigma=0.0),
        dict(kind="rff", d=0, m=4, sigma=1.0),
        dict(kind="moments", d=2),
        dict(kind="nope", d=2),
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(ConfigurationError):
        FeatureMapSpec(**kwargs)


def test_dimension_mismatch():
    fmap = build_feature_map(FeatureMapSpec("rff", 3, m=4, sigma=1.0))
    with pytest.raises(InputError):
        fmap.embed([1.0, 2.0])
    with pytest.raises(InputError):
        fmap.embed_batch(np.zeros((2, 4)))


def test_fwht_matches_dense_hadamard():
    x = np.random.default_rng(0).standard_normal((3, 16))
    np.testing.assert_allclose(fwht(x), x @ hadamard(16).T, atol=1e-12)


def test_fastfood_frequencies_match_projection():
    fmap = build_feature_map(FeatureMapSpec("fastfood", 6, m=16, sigma=1.5, seed=3))
    X = np.random.default_rng(1).standard_normal((4, 6))
    np.testing.assert_allclose(fmap.project(X), X @ fmap.frequencies().T, atol=1e-12)


def test_fastfood_rows_have_gaussian_norms():
    # rows of V behave like N(0, sigma^-2 I) rows: E ||w||^2 = d' / sigma^2
    fmap = build_feature_map(FeatureMapSpec("fastfood", 16, m=16 * 256, sigma=2.0, seed=4))
    sq = (fmap.frequencies() ** 2).sum(axis=1)
    assert sq.mean() == pytest.approx(16 / 4, rel=0.05)


def test_spec_json_round_trip():
    spec = FeatureMapSpec("rff", 100, m=3000, sigma=14.2, seed=7)
    text = spec.to_json()
    assert json.loads(text) == {"kind": "rff", "m": 3000, "sigma": 14.2, "seed": 7, "d": 100}
    assert FeatureMapSpec.from_json(text) == spec
    a = build_feature_map(spec).embed(np.ones(100))
    b = build_feature_map(FeatureMapSpec.from_json(text)).embed(np.ones(100))
    np.testing.assert_array_equal(a, b)


def test_spec_rejects_unknown_fields():
    with pytest.raises(ConfigurationError):
        FeatureMapSpec.from_dict({"kind": "identity", "d": 2, "colour": "red"})


def test_kernel_estimate_self_is_one():
    fmap = build_feature_map(FeatureMapSpec("rff", 4, m=64, sigma=1.0))
    assert kernel_estimate(fmap, np.ones(4), np.ones(4)) == pytest.approx(1.0, abs=1e-12)


def test_kernel_estimate_far_points_bounded():
    fmap = build_feature_map(FeatureMapSpec("rff", 2, m=64, sigma=1.0))
    assert abs(kernel_estimate(fmap, [0.0, 0.0], [1e3, -1e3])) <= 1.0


def test_kernel_estimate_unsupported():
    with pytest.raises(UnsupportedOperationError):
        kernel_estimate(build_feature_map(FeatureMapSpec("identity", 2)), [0, 0], [1, 1])


def test_kernel_estimate_matches_kernel_at_m2000():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((50, 5))
    sigma = median_trick_bandwidth(X)
    fmap = build_feature_map(FeatureMapSpec("rff", 5, m=2000, sigma=sigma, seed=11))
    x, y = X[0], X[1]
    assert abs(kernel_estimate(fmap, x, y) - gaussian_kernel(x, y, sigma)) <= 3 / math.sqrt(2000)


def test_kernel_estimate_unbiased_at_half():
    sigma = 1.3
    x = np.zeros(3)
    y = np.array([sigma * math.sqrt(2 * math.log(2)), 0.0, 0.0])
    est = [kernel_estimate(build_feature_map(FeatureMapSpec("rff", 3, m=256, sigma=sigma, seed=s)), x, y) for s in range(50)]
    assert np.mean(est) == pytest.approx(0.5, abs=0.05)


def test_kernel_variance_decays_with_m():
    x, y = np.zeros(4), np.full(4, 0.5)

    def spread(m):
        return np.std([kernel_estimate(build_feature_map(FeatureMapSpec("rff", 4, m=m, sigma=1.0, seed=s)), x, y) for s in range(50)])

    assert spread(4096) < 0.5 * spread(1024)


def test_median_trick_examples():
    assert median_trick_bandwidth(np.array([[0.0], [1.0]])) == 1.0
    assert median_trick_bandwidth(np.array([0.0, 1.0, 3.0])) == 2.0


def test_median_trick_high_dimension():
    X = np.random.default_rng(0).standard_normal((1000, 100))
    assert median_trick_bandwidth(X) == pytest.approx(math.sqrt(200), rel=0.1)


def test_median_trick_deterministic_and_degenerate():
    X = np.random.default_rng(0).standard_normal((800, 3))
    assert median_trick_bandwidth(X, seed=5) == median_trick_bandwidth(X, seed=5)
    with pytest.raises(DegenerateBandwidthError):
        median_trick_bandwidth(np.ones((10, 2)))
    with pytest.raises(ConfigurationError):
        median_trick_bandwidth(np.ones((1, 2)))
