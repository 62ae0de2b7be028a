import itertools

import numpy as np
import pytest
import scipy.fft as sfft

from fnoconv import oracles
from fnoconv.grids import ParityError, dft, freqs, is_hermitian, symmetrize
from fnoconv.resample import (
    bilinear_resample,
    nyquist_merge,
    nyquist_split,
    pad_spectrum_odd,
    resize_matrix,
    resize_spectrum,
    trig_resample,
    trig_resample_matrix,
    zero_embed,
)


def hermitian(rng, n):
    return symmetrize(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))


def at(s, k1, k2):
    n = s.shape[-1]
    return s[k1 % n, k2 % n]


def test_pad_identity(rng):
    s = hermitian(rng, 5)
    np.testing.assert_array_equal(pad_spectrum_odd(s, 5), s)


def test_pad_dc():
    out = pad_spectrum_odd(np.array([[2.0 + 0j]]), 3)
    expected = np.zeros((3, 3))
    expected[0, 0] = 2.0
    np.testing.assert_array_equal(out, expected)


def test_pad_keeps_interpolant(rng):
    s = hermitian(rng, 3)
    padded = pad_spectrum_odd(s, 5)
    assert is_hermitian(padded)
    pts = rng.random((20, 2))
    np.testing.assert_allclose(oracles.trig_eval(padded, pts), oracles.trig_eval(s, pts), atol=1e-12)


@pytest.mark.parametrize("m, n", [(2, 3), (3, 4), (4, 6)])
def test_pad_rejects_even(m, n):
    with pytest.raises(ParityError):
        pad_spectrum_odd(np.zeros((m, m), dtype=complex), n)


def test_split_corner_quarters():
    s = np.zeros((2, 2), dtype=complex)
    s[-1 % 2, -1 % 2] = 4.0
    out = nyquist_split(s)
    for k1, k2 in itertools.product((-1, 0, 1), repeat=2):
        expected = 1.0 if k1 and k2 else 0.0
        assert at(out, k1, k2) == expected


def test_split_edge_halves():
    s = np.zeros((2, 2), dtype=complex)
    s[1, 0] = 2.0          # frequency (-1, 0)
    out = nyquist_split(s)
    assert at(out, -1, 0) == 1.0 and at(out, 1, 0) == 1.0
    assert np.sum(np.abs(out)) == 2.0


def test_split_round_trip_through_resample(rng):
    v = rng.normal(size=(4, 4))
    lifted = nyquist_split(dft(v))
    grid = sfft.ifft2(lifted).real * 25
    np.testing.assert_allclose(trig_resample(grid, 4), v, atol=1e-12)


def test_split_agrees_on_samples(rng):
    # the split interpolant takes the original values on J_N
    v = rng.normal(size=(6, 6))
    lifted = nyquist_split(dft(v))
    j = np.arange(6) / 6
    pts = np.stack(np.meshgrid(j, j, indexing="ij"), -1)
    np.testing.assert_allclose(oracles.trig_eval(lifted, pts).reshape(6, 6), v, atol=1e-12)


def test_split_is_plain_hermitian(rng):
    assert is_hermitian(nyquist_split(dft(rng.normal(size=(8, 8)))), 1e-14)


def test_split_rejects_odd():
    with pytest.raises(ParityError):
        nyquist_split(np.zeros((3, 3), dtype=complex))


@pytest.mark.parametrize("n", [2, 4, 6, 10])
def test_merge_inverts_split_exactly(n, rng):
    s = dft(rng.normal(size=(n, n)))
    np.testing.assert_array_equal(nyquist_merge(nyquist_split(s)), s)


def test_merge_corner():
    s = np.zeros((3, 3), dtype=complex)
    for k1, k2 in itertools.product((-1, 1), repeat=2):
        s[k1 % 3, k2 % 3] = 1.0
    out = nyquist_merge(s)
    assert out[1, 1] == 4.0
    assert np.sum(np.abs(out)) == 4.0


def test_merge_output_hermitian(rng):
    assert is_hermitian(nyquist_merge(hermitian(rng, 5)), 1e-14)


def test_split_mass_preserved(rng):
    s = dft(rng.normal(size=(6, 6)))
    out = nyquist_split(s)
    nyq = 3
    # every input coefficient equals the sum of the pieces it was split into
    for k1, k2 in itertools.product(freqs(6), repeat=2):
        targets1 = (-nyq, nyq) if k1 == -nyq else (k1,)
        targets2 = (-nyq, nyq) if k2 == -nyq else (k2,)
        total = sum(at(out, a, b) for a in targets1 for b in targets2)
        assert total == at(s, k1, k2)


def test_naive_zero_padding_counterexample():
    s = np.zeros((2, 2), dtype=complex)
    s[1, 0] = 2.0          # Hermitian on I_2 in the aliased sense
    assert is_hermitian(s)
    assert not is_hermitian(zero_embed(s, 3))
    assert is_hermitian(resize_spectrum(s, 3))


def test_trig_identity(rng):
    v = rng.normal(size=(5, 5))
    np.testing.assert_array_equal(trig_resample(v, 5), v)


@pytest.mark.parametrize("m, n", [(3, 7), (4, 9), (6, 4), (5, 2), (1, 4)])
def test_trig_constant(m, n):
    np.testing.assert_allclose(trig_resample(np.full((m, m), 0.37), n), np.full((n, n), 0.37), atol=1e-14)


@pytest.mark.parametrize("n", [5, 6, 7, 8])
def test_trig_up_down_from_four(n, rng):
    v = rng.normal(size=(4, 4))
    assert np.max(np.abs(trig_resample(trig_resample(v, n), 4) - v)) <= 1e-10


@pytest.mark.parametrize("m", range(1, 9))
def test_value_preservation_all_parities(m, rng):
    for n in range(m, 13):
        v = rng.normal(size=(m, m))
        assert np.max(np.abs(trig_resample(trig_resample(v, n), m) - v)) <= 1e-10


@pytest.mark.parametrize("m, n", [(4, 8), (3, 9), (5, 10)])
def test_upsample_keeps_shared_samples(m, n, rng):
    v = rng.normal(size=(m, m))
    step = n // m
    np.testing.assert_allclose(trig_resample(v, n)[::step, ::step], v, atol=1e-12)


def test_realness_all_parities(rng):
    for m, n in itertools.product(range(1, 9), range(1, 13)):
        s = resize_spectrum(dft(rng.normal(size=(m, m))), n)
        assert np.max(np.abs((sfft.ifft2(s) * n * n).imag)) <= 1e-10


def test_downsample_truncates_and_merges():
    # cos at frequency 2 on an 8-grid lands on the Nyquist bin of a 4-grid
    j = np.arange(8)
    v = np.cos(2 * np.pi * 2 * j / 8)[:, None] * np.ones(8)
    np.testing.assert_allclose(trig_resample(v, 4), np.array([1, -1, 1, -1.0])[:, None] * np.ones(4), atol=1e-12)


@pytest.mark.parametrize("m, n", [(4, 7), (7, 4), (6, 6), (3, 8)])
def test_resample_matrices(m, n, rng):
    v = rng.normal(size=(m, m))
    r = trig_resample_matrix(m, n)
    np.testing.assert_allclose(r @ v @ r.T, trig_resample(v, n), atol=1e-12)
    s = dft(v)
    p = resize_matrix(m, n)
    np.testing.assert_allclose(p @ s @ p.T, resize_spectrum(s, n), atol=1e-14)


def test_bilinear_identity(rng):
    v = rng.normal(size=(6, 6))
    np.testing.assert_array_equal(bilinear_resample(v, 6), v)


def test_bilinear_constant():
    np.testing.assert_allclose(bilinear_resample(np.full((3, 3), 2.5), 7), np.full((7, 7), 2.5))


def test_bilinear_hand_example():
    out = bilinear_resample(np.array([[0.0, 1.0], [2.0, 3.0]]), 4)
    assert out[0, 0] == 0.0
    assert out[1, 1] == 1.5
    # right neighbour wraps around the torus
    assert out[0, 3] == 0.5


def test_bilinear_exact_on_linear_segments():
    # linear between adjacent samples along one axis (and constant along the other)
    v = np.array([0.0, 2.0, 4.0, 6.0])[:, None] * np.ones(4)
    out = bilinear_resample(v, 8)
    np.testing.assert_allclose(out[:7, 0], [0, 1, 2, 3, 4, 5, 6], atol=1e-14)
