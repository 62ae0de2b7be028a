"""Spatial (CNN) and spectral (FNO) implementations of periodic convolution.

A :class:`SpatialKernel` of size ``M`` stores weights for the centered
offsets ``I_M = {-ceil((M-1)/2), ..., floor((M-1)/2)}^2`` in ascending
order, so index ``j`` holds offset ``j - M//2``.  On an ``N`` grid offset
``o`` lands at ``o mod N``.

A :class:`SpectralKernel` stores Fourier coefficients over ``I_M`` in FFT
order and acts by pointwise multiplication of the input's spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from fnoconv.grids import dft, freqs, hermitian_defect, idft
from fnoconv.resample import resize_matrix, resize_spectrum, trig_resample


class ChannelMismatchError(ValueError):
    pass


class KernelSizeError(ValueError):
    pass


@dataclass(frozen=True)
class SpatialKernel:
    """Real weights of shape ``(c_out, c_in, m, m)``."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim == 2:
            w = w[None, None]
        if w.ndim != 4 or w.shape[-1] != w.shape[-2] or w.shape[-1] < 1:
            raise KernelSizeError(f"spatial kernel must have shape (c_out, c_in, m, m), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("kernel weights must be finite")
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.weights.shape[-1]

    @property
    def c_out(self) -> int:
        return self.weights.shape[0]

    @property
    def c_in(self) -> int:
        return self.weights.shape[1]

    kind = "spatial"


@dataclass(frozen=True)
class SpectralKernel:
    """Complex coefficients of shape ``(c_out, c_in, m, m)``, Hermitian per slice."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == 2:
            c = c[None, None]
        if c.ndim != 4 or c.shape[-1] != c.shape[-2] or c.shape[-1] < 1:
            raise KernelSizeError(f"spectral kernel must have shape (c_out, c_in, m, m), got {c.shape}")
        scale = max(1.0, float(np.max(np.abs(c))))
        if hermitian_defect(c) > 1e-10 * scale:
            raise ValueError("spectral kernel slices must be Hermitian-symmetric")
        object.__setattr__(self, "coeffs", c)

    @property
    def m(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def c_out(self) -> int:
        return self.coeffs.shape[0]

    @property
    def c_in(self) -> int:
        return self.coeffs.shape[1]

    kind = "spectral"


def offsets(m: int) -> np.ndarray:
    """Centered offsets of a size-``m`` spatial kernel, in storage order."""
    return np.arange(m) - m // 2


def lay_out(weights: np.ndarray, n: int) -> np.ndarray:
    """Place centered kernel weights on ``J_n`` (offset ``o`` -> ``o mod n``)."""
    m = weights.shape[-1]
    if m > n:
        raise KernelSizeError(f"kernel of size {m} does not fit a grid of size {n}")
    out = np.zeros(weights.shape[:-2] + (n, n))
    p = offsets(m) % n
    out[..., p[:, None], p[None, :]] = weights
    return out


def centered(grid: np.ndarray, m: int | None = None) -> np.ndarray:
    """Inverse of :func:`lay_out`: read a ``J_n`` grid as centered weights of size ``m``."""
    n = grid.shape[-1]
    m = n if m is None else m
    p = offsets(m) % n
    return grid[..., p[:, None], p[None, :]]


def pad_kernel_spatial(kernel: SpatialKernel, n: int) -> SpatialKernel:
    if n < kernel.m:
        raise KernelSizeError(f"spatial kernels cannot be truncated ({kernel.m} -> {n})")
    return SpatialKernel(centered(lay_out(kernel.weights, n), n))


def _squeeze_like(out: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Drop the channel axis again for a bare 2-D input and a single output channel."""
    return out[0] if np.ndim(v) == 2 and out.shape[0] == 1 else out


def _as_input(v: np.ndarray, c_in: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 2:
        v = v[None]
    if v.shape[-3] != c_in:
        raise ChannelMismatchError(f"kernel expects {c_in} input channels, got {v.shape[-3]}")
    return v


def mix_channels(xh: np.ndarray, mult: np.ndarray) -> np.ndarray:
    """``out[..., o, :, :] = sum_i mult[o, i] * xh[..., i, :, :]`` per frequency."""
    lead = xh.shape[:-3]
    c_in, h, w = xh.shape[-3:]
    x = np.moveaxis(xh.reshape((-1, c_in, h * w)), -1, 0)      # (hw, B, i)
    k = np.moveaxis(mult.reshape(mult.shape[0], c_in, h * w), -1, 0)  # (hw, o, i)
    out = np.matmul(x, np.swapaxes(k, -1, -2))                  # (hw, B, o)
    return np.moveaxis(out, 0, -1).reshape(lead + (mult.shape[0], h, w))


def apply_multiplier(mult: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``out[..., o] = sum_i ifft2(mult[o, i] * fft2(v[..., i]))`` (real part)."""
    return sfft.ifft2(mix_channels(sfft.fft2(v), mult)).real


def spatial_multiplier(kernel: SpatialKernel, n: int) -> np.ndarray:
    """Spectrum ``T(theta^{M->n})`` of the laid-out kernel, shape ``(c_out, c_in, n, n)``."""
    return sfft.fft2(lay_out(kernel.weights, n))


def conv_spatial(kernel: SpatialKernel, v: np.ndarray) -> np.ndarray:
    """Periodic convolution ``C(theta)(v)_j = sum_j' theta_{j-j'} v_j'`` per channel pair.

    ``v`` has shape ``(..., c_in, N, N)``; the kernel is zero-padded (centered)
    to ``N``.  Computed through the FFT.
    """
    x = _as_input(v, kernel.c_in)
    return _squeeze_like(apply_multiplier(spatial_multiplier(kernel, x.shape[-1]), x), v)


def lift_size(n: int) -> int:
    """The odd size an ``n`` grid is processed at: ``n`` if odd, else ``n + 1``."""
    return n if n % 2 else n + 1


def _spectral_odd(coeffs: np.ndarray, v: np.ndarray) -> np.ndarray:
    n = v.shape[-1]
    theta = resize_spectrum(coeffs, n)
    vh = dft(v, "full")
    return idft(mix_channels(vh, theta), "full")


def conv_spectral(kernel: SpectralKernel, v: np.ndarray, fused: bool = False) -> np.ndarray:
    """FNO convolution ``F^-1(theta * F v)`` restricted to the kernel's modes.

    Odd ``N`` multiplies on ``I_M`` directly.  Even ``N`` lifts the input to
    ``N+1`` by trigonometric interpolation, the kernel by Nyquist splitting,
    convolves there and interpolates back to ``N``.  With ``fused=True`` the
    even pipeline is folded into a single multiplier on ``I_N`` (see
    :func:`spectral_multiplier`).
    """
    x = _as_input(v, kernel.c_in)
    n = x.shape[-1]
    if fused:
        out = apply_multiplier(spectral_multiplier(kernel, n), x)
    elif n % 2:
        out = _spectral_odd(kernel.coeffs, x)
    else:
        out = trig_resample(_spectral_odd(kernel.coeffs, trig_resample(x, n + 1)), n)
    return _squeeze_like(out, v)


def _nyquist_weights(n: int) -> np.ndarray:
    """Per-axis weights of the split all-ones spectrum on ``I_{n+1}`` (n even)."""
    w = np.ones(n + 1)
    w[n // 2] = w[n // 2 + 1] = 0.5
    return w


def multiplier_matrix(m: int, n: int) -> np.ndarray:
    """Real ``n x m`` matrix ``P`` with effective multiplier ``P @ theta @ P.T``.

    Odd ``n``: ``P`` is the spectral resize ``I_m -> I_n``.  Even ``n``: the
    kernel is resized to ``I_{n+1}``, weighted by the split all-ones spectrum
    (the input's Nyquist share) and merged back to ``I_n``.
    """
    if n % 2:
        return resize_matrix(m, n)
    lift = resize_matrix(m, n + 1)
    merge = resize_matrix(n + 1, n)
    return merge @ (_nyquist_weights(n)[:, None] * lift)


def spectral_multiplier(kernel: SpectralKernel, n: int) -> np.ndarray:
    """Effective multiplier on ``I_n`` (FFT order) of a spectral kernel at grid size ``n``."""
    p = multiplier_matrix(kernel.m, n)
    return p @ kernel.coeffs @ p.T


def frequency_grid(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer frequency coordinates ``(k1, k2)`` of an ``n x n`` spectrum in FFT order."""
    f = freqs(n)
    return np.meshgrid(f, f, indexing="ij")
