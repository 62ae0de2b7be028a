"""Spectral zero-padding, Nyquist splitting and trigonometric resampling.

Every operation here acts independently on the last two axes, so each is
written once for a single axis and applied twice.  Spectra follow the FFT
storage convention of :mod:`fnoconv.grids`.
"""

from __future__ import annotations

import functools

import numpy as np
import scipy.fft as sfft

from fnoconv.grids import ParityError, dft, freqs, idft


def _along(a: np.ndarray, axis: int, fn) -> np.ndarray:
    return np.moveaxis(fn(np.moveaxis(a, axis, -1)), -1, axis)


def _both_axes(a: np.ndarray, fn) -> np.ndarray:
    return _along(_along(a, -2, fn), -1, fn)


# -- single-axis primitives (operate on the last axis) -----------------------

def _embed_1d(a: np.ndarray, n: int) -> np.ndarray:
    """Copy coefficients of ``I_m`` into ``I_n`` (m <= n), zeros elsewhere."""
    m = a.shape[-1]
    out = np.zeros(a.shape[:-1] + (n,), dtype=complex)
    out[..., freqs(m) % n] = a
    return out


def _restrict_1d(a: np.ndarray, n: int) -> np.ndarray:
    """Keep only the coefficients of ``I_n`` (n <= m)."""
    m = a.shape[-1]
    return a[..., freqs(n) % m].astype(complex)


def _split_1d(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    out = _embed_1d(a, n + 1)
    half = 0.5 * out[..., (-(n // 2)) % (n + 1)]
    out[..., (-(n // 2)) % (n + 1)] = half
    out[..., n // 2] = half
    return out


def _merge_1d(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1] - 1
    out = _restrict_1d(a, n)
    out[..., n // 2] = out[..., n // 2] + a[..., n // 2]
    return out


def _resize_1d(a: np.ndarray, n: int) -> np.ndarray:
    m = a.shape[-1]
    if m == n:
        return a.astype(complex)
    if m % 2 == 0:
        a = _split_1d(a)
        m += 1
    target = n if n % 2 else n + 1
    a = _embed_1d(a, target) if target >= m else _restrict_1d(a, target)
    return a if n % 2 else _merge_1d(a)


# -- public two-dimensional operations ---------------------------------------

def pad_spectrum_odd(s: np.ndarray, n: int) -> np.ndarray:
    """Zero-embed a spectrum over ``I_M`` into ``I_n``; both sizes must be odd."""
    m = s.shape[-1]
    if m % 2 == 0 or n % 2 == 0:
        raise ParityError(f"plain spectral padding needs odd sizes, got {m} -> {n}")
    if m > n:
        raise ValueError(f"cannot pad from {m} down to {n}")
    return _both_axes(np.asarray(s), lambda a: _embed_1d(a, n))


def zero_embed(s: np.ndarray, n: int) -> np.ndarray:
    """Naive zero-embedding for any parities.

    Breaks Hermitian symmetry whenever an even source carries Nyquist
    content; kept for demonstrating exactly that.
    """
    return _both_axes(np.asarray(s), lambda a: _embed_1d(a, n))


def nyquist_split(s: np.ndarray) -> np.ndarray:
    """Lift an even-size spectrum over ``I_N`` to ``I_{N+1}``.

    Each coefficient with a component at ``-N/2`` is shared equally between
    ``-N/2`` and ``+N/2`` in that component (corners split in four).
    """
    n = s.shape[-1]
    if n % 2:
        raise ParityError(f"Nyquist splitting needs an even size, got {n}")
    return _both_axes(np.asarray(s), _split_1d)


def nyquist_merge(s: np.ndarray) -> np.ndarray:
    """Inverse of :func:`nyquist_split`: fold ``+N/2`` back onto ``-N/2``."""
    n1 = s.shape[-1]
    if n1 % 2 == 0:
        raise ParityError(f"Nyquist merging needs an odd source size, got {n1}")
    return _both_axes(np.asarray(s), _merge_1d)


def resize_spectrum(s: np.ndarray, n: int) -> np.ndarray:
    """Adapt a Hermitian spectrum over ``I_M`` to ``I_n`` for any parities.

    Even sizes are routed through the next odd size: split on the way in,
    pad or truncate among odd sizes, merge on the way out.
    """
    if n < 1:
        raise ValueError(f"target size must be positive, got {n}")
    return _both_axes(np.asarray(s), lambda a: _resize_1d(a, n))


@functools.lru_cache(maxsize=256)
def resize_matrix(m: int, n: int) -> np.ndarray:
    """Real ``n x m`` matrix ``P`` with ``resize_spectrum(s, n) == P @ s @ P.T``."""
    return _resize_1d(np.eye(m), n).T.real.copy()


def trig_resample(v: np.ndarray, n: int) -> np.ndarray:
    """Real trigonometric interpolation of a grid onto ``J_n``.

    The transform pair uses the full normalization with lambda taken from
    the grid each transform acts on, so values are preserved wherever the
    two grids share sample positions.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[-1] == n:
        return v.copy()
    return idft(resize_spectrum(dft(v, "full"), n), "full")


@functools.lru_cache(maxsize=256)
def trig_resample_matrix(m: int, n: int) -> np.ndarray:
    """Real ``n x m`` matrix ``R`` with ``trig_resample(v, n) == R @ v @ R.T``."""
    cols = sfft.fft(np.eye(m), axis=0) / m
    return (sfft.ifft(_resize_1d(cols.T, n).T, axis=0) * n).real.copy()


@functools.lru_cache(maxsize=256)
def bilinear_matrix(m: int, n: int) -> np.ndarray:
    """Periodic linear interpolation weights, sample ``j`` taken at ``j*m/n``."""
    out = np.zeros((n, m))
    pos = np.arange(n) * m / n
    lo = np.floor(pos).astype(int)
    t = pos - lo
    out[np.arange(n), lo % m] += 1.0 - t
    out[np.arange(n), (lo + 1) % m] += t
    return out


def bilinear_resample(v: np.ndarray, n: int) -> np.ndarray:
    """Bilinear resampling on the torus (right/bottom neighbours wrap around)."""
    v = np.asarray(v, dtype=float)
    b = bilinear_matrix(v.shape[-1], n)
    return b @ v @ b.T
