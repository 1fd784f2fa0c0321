import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import crandn, inner
from mivarnet import kspace as ks
from mivarnet.errors import ParameterError, ShapeError
from mivarnet.phantom import forward_acquire


def dft_matrix(n):
    # centered orthonormal DFT built from the definition
    idx = np.arange(n) - n // 2
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


@pytest.mark.parametrize("n", [8, 16])
def test_fft2c_matches_explicit_dft(rng, n):
    x = crandn(rng, n, n)
    f = dft_matrix(n)
    np.testing.assert_allclose(ks.fft2c(x), f @ x @ f.T, atol=1e-10)


def test_fft2c_of_constant_is_center_impulse():
    k = ks.fft2c(np.ones((8, 8)))
    expected = np.zeros((8, 8))
    expected[4, 4] = 8.0
    np.testing.assert_allclose(k, expected, atol=1e-12)


def test_ifft2c_of_center_impulse_is_constant():
    k = np.zeros((8, 8), complex)
    k[4, 4] = 1.0
    np.testing.assert_allclose(ks.ifft2c(k), np.full((8, 8), 1 / 8), atol=1e-12)


@pytest.mark.parametrize("n", [8, 16, 64])
def test_parseval_and_roundtrip(rng, n):
    x = crandn(rng, 3, n, n)
    k = ks.fft2c(x)
    assert abs(np.linalg.norm(k) - np.linalg.norm(x)) < 1e-10
    np.testing.assert_allclose(ks.ifft2c(k), x, atol=1e-10)


def test_ifft2c_linearity(rng):
    k1, k2 = crandn(rng, 16, 16), crandn(rng, 16, 16)
    a = 0.7 - 1.3j
    np.testing.assert_allclose(ks.ifft2c(a * k1 + k2), a * ks.ifft2c(k1) + ks.ifft2c(k2), atol=1e-10)


def test_fft2c_rejects_tiny_frames():
    with pytest.raises(ShapeError):
        ks.fft2c(np.ones((1, 8)))


def test_mask_center_block_and_count():
    m = ks.make_equispaced_mask(320, 4, 0.08, seed=0)
    block = ks.center_block(320, 0.08)
    assert block.stop - block.start == 26
    assert m.columns[block].all()
    assert 80 <= m.columns.sum() <= 80 + 26


def test_mask_center_contains_dc():
    for w in (16, 64, 320):
        block = ks.center_block(w, 0.08)
        assert block.start <= w // 2 < block.stop


def test_mask_accel_one_is_full():
    assert ks.make_equispaced_mask(64, 1, 0.08, seed=5).columns.all()


def test_mask_is_deterministic_per_seed():
    a = ks.make_equispaced_mask(64, 4, 0.08, seed=11)
    b = ks.make_equispaced_mask(64, 4, 0.08, seed=11)
    np.testing.assert_array_equal(a.columns, b.columns)


def test_mask_offsets_vary_with_seed():
    offsets = {int(np.argmax(ks.make_equispaced_mask(64, 4, 0.08, seed=s).columns)) for s in range(40)}
    assert offsets == {0, 1, 2, 3}


def test_mask_expansion_constant_along_rows():
    m = ks.make_equispaced_mask(32, 4, 0.1, seed=2)
    full = m.expand(16)
    assert full.shape == (16, 32)
    assert (full == full[0]).all()


@pytest.mark.parametrize("kw", [dict(accel=0), dict(accel=2.5), dict(center_fraction=0.0), dict(center_fraction=1.0)])
def test_mask_rejects_bad_parameters(kw):
    args = dict(w=64, accel=4, center_fraction=0.08, seed=0)
    args.update(kw)
    with pytest.raises(ParameterError):
        ks.make_equispaced_mask(**args)


def test_apply_mask_projection(rng):
    m = ks.make_equispaced_mask(16, 4, 0.125, seed=1)
    k1, k2 = crandn(rng, 2, 16, 16), crandn(rng, 2, 16, 16)
    mk = ks.apply_mask(k1, m)
    np.testing.assert_array_equal(ks.apply_mask(mk, m), mk)
    assert np.all(mk[..., ~m.columns] == 0)
    np.testing.assert_array_equal(mk[..., m.columns], k1[..., m.columns])
    a = 2.0 - 0.5j
    np.testing.assert_allclose(ks.apply_mask(a * k1 + k2, m), a * mk + ks.apply_mask(k2, m), atol=1e-12)


def test_apply_mask_full_is_identity(rng):
    k = crandn(rng, 2, 8, 8)
    np.testing.assert_array_equal(ks.apply_mask(k, ks.make_equispaced_mask(8, 1, 0.25)), k)


def test_apply_mask_width_mismatch(rng):
    with pytest.raises(ShapeError):
        ks.apply_mask(crandn(rng, 1, 8, 8), ks.make_equispaced_mask(16, 2, 0.25))


def test_rss_three_four_five():
    imgs = np.array([[[3.0]], [[4.0j]]])
    assert ks.rss_combine(imgs)[0, 0] == 5.0


def test_rss_single_coil_is_magnitude(rng):
    y = crandn(rng, 1, 8, 8)
    np.testing.assert_allclose(ks.rss_combine(y), np.abs(y[0]))


def test_rss_of_normalized_expansion_is_magnitude(rng, maps64):
    x = crandn(rng, 64, 64)
    np.testing.assert_allclose(ks.rss_combine(ks.sense_expand(x, maps64)), np.abs(x), atol=1e-10)


@pytest.mark.parametrize("n", [8, 16, 64])
def test_sense_adjointness(rng, n):
    maps = crandn(rng, 3, n, n)
    x, y = crandn(rng, n, n), crandn(rng, 3, n, n)
    lhs = inner(ks.sense_expand(x, maps), y)
    rhs = inner(x, ks.sense_combine(y, maps))
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


def test_sense_expand_matches_elementwise_loop(rng):
    maps, x = crandn(rng, 3, 8, 8), crandn(rng, 8, 8)
    out = ks.sense_expand(x, maps)
    for c in range(3):
        for i in range(8):
            for j in range(8):
                assert abs(out[c, i, j] - maps[c, i, j] * x[i, j]) < 1e-12


def test_sense_roundtrip_with_normalized_maps(rng, maps64):
    x = crandn(rng, 64, 64)
    np.testing.assert_allclose(ks.sense_combine(ks.sense_expand(x, maps64), maps64), x, atol=1e-12)


def test_sense_single_coil_phase_rotation(rng):
    x = crandn(rng, 8, 8)
    maps = np.exp(1j * 0.3) * np.ones((1, 8, 8))
    np.testing.assert_allclose(ks.sense_expand(x, maps)[0], np.exp(1j * 0.3) * x)


def test_sense_shape_errors(rng):
    with pytest.raises(ShapeError):
        ks.sense_expand(crandn(rng, 8, 8), crandn(rng, 2, 8, 9))
    with pytest.raises(ShapeError):
        ks.sense_combine(crandn(rng, 3, 8, 8), crandn(rng, 2, 8, 8))


def test_sense_combine_zero():
    assert not ks.sense_combine(np.zeros((2, 8, 8), complex), np.ones((2, 8, 8))).any()


def test_estimate_maps_recovers_constant_maps(phantom64):
    c = 4
    maps = np.full((c, 64, 64), 1 / np.sqrt(c), dtype=complex)
    est = ks.estimate_sens_maps(forward_acquire(phantom64, maps), 0.08)
    support = np.abs(est).sum(axis=0) > 0
    assert support.any()
    np.testing.assert_allclose(np.abs(est[:, support]), 1 / np.sqrt(c), atol=0.05)


def test_estimate_maps_invariant(phantom64, maps64):
    est = ks.estimate_sens_maps(forward_acquire(phantom64, maps64), 0.08)
    power = np.sum(np.abs(est) ** 2, axis=0)
    inside = power > 0
    np.testing.assert_allclose(power[inside], 1.0, atol=1e-6)
    assert np.all(power[~inside] == 0)


def test_estimate_maps_single_coil(phantom64):
    k = forward_acquire(phantom64, np.ones((1, 64, 64), complex))
    est = ks.estimate_sens_maps(k, 0.08)
    mag = np.abs(est[0])
    assert set(np.unique(mag)) <= {0.0, 1.0}
    assert mag.sum() > 0


@settings(max_examples=25, deadline=None)
@given(n=st.sampled_from([8, 16, 64]), seed=st.integers(0, 2**31))
def test_parseval_property(n, seed):
    x = crandn(np.random.default_rng(seed), n, n)
    assert abs(np.linalg.norm(ks.fft2c(x)) - np.linalg.norm(x)) < 1e-10
