"""Generator determinism, contamination accounting, and support laws."""

import numpy as np
import pytest

from robust_adrf import dgp


ALL_LABELS = [
    "parabola",
    "sinusoidal",
    "sinusoidal_region",
    "sinusoidal_asymmetric",
    "sinusoidal_heavytail",
    "t_family_nu3",
    "ihdp_like",
]


@pytest.mark.parametrize("label", ALL_LABELS)
def test_determinism_bit_identical(label):
    a = dgp.generate(dgp.parse_kind(label), n=300, p_contam=0.15, seed=7)
    b = dgp.generate(dgp.parse_kind(label), n=300, p_contam=0.15, seed=7)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.t, b.t)
    assert np.array_equal(a.y, b.y)
    assert np.array_equal(a.outlier_mask, b.outlier_mask)


def test_different_seeds_differ():
    a = dgp.generate(dgp.SINUSOIDAL, n=300, seed=0)
    b = dgp.generate(dgp.SINUSOIDAL, n=300, seed=1)
    assert not np.array_equal(a.y, b.y)


@pytest.mark.parametrize("label", ALL_LABELS)
@pytest.mark.parametrize("p", [0.0, 0.05, 0.15, 0.25])
def test_contamination_count_exact(label, p):
    n = 777
    ds = dgp.generate(dgp.parse_kind(label), n=n, p_contam=p, seed=3)
    assert int(ds.outlier_mask.sum()) == int(np.floor(p * n))


def test_clean_sample_noise_sd():
    ds = dgp.generate(dgp.SINUSOIDAL, n=4000, p_contam=0.25, seed=0)
    clean = ~ds.outlier_mask
    resid = ds.y[clean] - ds.true_curve(ds.t[clean]) - dgp.confounder(ds.x[clean])
    assert 0.45 <= float(np.std(resid)) <= 0.55


def test_region_support_restriction():
    for seed in range(5):
        ds = dgp.generate(dgp.SINUSOIDAL_REGION, n=800, p_contam=0.25, seed=seed)
        flagged_t = ds.t[ds.outlier_mask]
        assert np.all(flagged_t >= 0.0)
        assert np.all(flagged_t <= 1.0)


def test_asymmetric_jumps_positive():
    ds = dgp.generate(dgp.SINUSOIDAL_ASYMMETRIC, n=800, p_contam=0.25, seed=2)
    assert np.all(ds.jumps[ds.outlier_mask] > 0)


def test_t_family_jump_sign_symmetry():
    ds = dgp.generate(dgp.DgpKind("t_family", nu=3), n=8000, p_contam=0.25, seed=0)
    signs = np.sign(ds.jumps[ds.outlier_mask] / 6.0)
    assert abs(float(np.mean(signs))) < 0.06


def test_contamination_is_additive():
    clean = dgp.generate(dgp.SINUSOIDAL, n=400, p_contam=0.0, seed=5)
    dirty = dgp.generate(dgp.SINUSOIDAL, n=400, p_contam=0.25, seed=5)
    # same child stream up to the contamination draws: t and x coincide
    assert np.array_equal(clean.t, dirty.t)
    delta = dirty.y - clean.y
    assert np.allclose(delta[~dirty.outlier_mask], 0.0)
    assert np.all(np.abs(delta[dirty.outlier_mask]) > 0)


def test_parse_kind_roundtrip():
    for label in ALL_LABELS:
        assert dgp.parse_kind(label).label == label
    assert dgp.parse_kind("t_family_nu10").nu == 10


def test_kind_validation():
    with pytest.raises(ValueError):
        dgp.DgpKind("no_such_kind")
    with pytest.raises(ValueError):
        dgp.DgpKind("t_family")  # nu required
    with pytest.raises(ValueError):
        dgp.DgpKind("parabola", nu=3)
    with pytest.raises(ValueError):
        dgp.generate(dgp.PARABOLA, n=100, p_contam=0.7)
    with pytest.raises(ValueError):
        dgp.generate(dgp.PARABOLA, n=5)


def test_true_theta_shapes():
    t = np.linspace(-2, 2, 11)
    assert np.allclose(dgp.true_theta(dgp.PARABOLA, t), 0.5 * t**2)
    assert np.allclose(dgp.true_theta(dgp.SINUSOIDAL, t),
                       np.sin(np.pi * t / 2) + 0.5 * t)


def test_ihdp_covariate_block():
    ds = dgp.generate(dgp.IHDP_LIKE, n=747, p_contam=0.15, seed=0)
    assert ds.x.shape == (747, 25)
    binary_block = ds.x[:, 6:]
    assert set(np.unique(binary_block)) <= {0.0, 1.0}


def test_multi_determinism_and_count():
    a = dgp.generate_multi(2, n=400, p_contam=0.15, seed=1)
    b = dgp.generate_multi(2, n=400, p_contam=0.15, seed=1)
    assert np.array_equal(a.y, b.y)
    assert a.t.shape == (400, 2)
    assert int(a.outlier_mask.sum()) == int(np.floor(0.15 * 400))
    with pytest.raises(ValueError):
        dgp.generate_multi(4)


def test_ts_contiguous_block():
    ds = dgp.generate_ts(n=600, rho=0.7, p_contam=0.1, seed=0)
    idx = np.flatnonzero(ds.outlier_mask)
    assert idx.shape[0] == 60
    assert np.all(np.diff(idx) == 1)  # one contiguous block
    with pytest.raises(ValueError):
        dgp.generate_ts(rho=1.0)


def test_binary_dataset_contract():
    ds = dgp.generate_binary(n=500, p_contam=0.1, seed=4)
    assert ds.x.shape == (500, 10)
    assert ds.treat.dtype == bool
    assert 0 < ds.treat.sum() < 500
    assert int(ds.outlier_mask.sum()) == 50
    expected_tau = 1.0 + 0.5 * ds.x[:, 0] - 0.3 * ds.x[:, 1] ** 2
    assert np.allclose(ds.true_tau, expected_tau)
