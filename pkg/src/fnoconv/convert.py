"""Exact conversion between spatial and spectral kernel parametrizations."""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from fnoconv.conv import (
    SpatialKernel,
    SpectralKernel,
    centered,
    lay_out,
    multiplier_matrix,
    spectral_multiplier,
)
from fnoconv.grids import ParityError, symmetrize


def cnn_to_fno(kernel: SpatialKernel, n: int | None = None) -> SpectralKernel:
    """Spectral kernel over ``I_n`` acting exactly like ``kernel`` on ``n`` grids.

    For odd ``n`` this is ``T(theta^{M->n}) = lambda F(theta^{M->n})``, which
    does not depend on the normalization.  For even ``n`` the FNO pipeline
    halves the effective multiplier on each Nyquist axis, so those rows and
    columns are scaled up to compensate.
    """
    n = kernel.m if n is None else n
    t = sfft.fft2(lay_out(kernel.weights, n))
    if n % 2 == 0:
        gain = np.diag(multiplier_matrix(n, n))
        t = t / gain[:, None] / gain[None, :]
    return SpectralKernel(symmetrize(t))


def fno_to_cnn(kernel: SpectralKernel, n: int, m: int | None = None) -> SpatialKernel:
    """Spatial kernel on ``J_n`` with ``C(theta)(v) == K(theta_hat)(v)`` for ``n x n`` inputs.

    ``m`` optionally crops the result to its central ``m x m`` offsets; this
    is exact only when the discarded offsets are zero.
    """
    if n < 1:
        raise ValueError(f"target size must be positive, got {n}")
    mult = spectral_multiplier(kernel, n)
    grid = sfft.ifft2(mult).real
    return SpatialKernel(centered(grid, n if m is None else m))


def _spatial_jacobian(v: np.ndarray) -> np.ndarray:
    """``d C(theta)(v)_l / d theta_j = v_{(l - j) mod N}``, rows ``l``, columns ``j``."""
    n = v.shape[-1]
    idx = np.arange(n)
    rows = (idx[:, None] - idx[None, :]) % n
    # [l1, l2, j1, j2] -> v[(l1-j1) mod n, (l2-j2) mod n]
    jac = v[rows[:, None, :, None], rows[None, :, None, :]]
    return jac.reshape(n * n, n * n)


def _spectral_jacobian(v: np.ndarray) -> np.ndarray:
    """Gradient of ``K(theta_hat)(v)_l`` in ``theta_hat_k``, rows ``l``, columns ``k``.

    The map is evaluated on unit perturbations of the real and imaginary part
    of each coefficient separately and combined as
    ``(conj(d/dRe) + i conj(d/dIm)) / 2``.
    """
    n = v.shape[-1]
    vh = sfft.fft2(v)
    basis = np.eye(n * n).reshape(n * n, n, n)
    d_re = sfft.ifft2(basis * vh)
    d_im = sfft.ifft2(1j * basis * vh)
    grad = 0.5 * (np.conj(d_re) + 1j * np.conj(d_im))
    return grad.reshape(n * n, n * n).T


def grad_convert_check(kernel: SpatialKernel, v: np.ndarray) -> float:
    """Max deviation from ``grad_theta_hat K = (1/|J_N|) T(grad_theta C)``.

    Single channel; ``kernel`` and ``v`` must share one odd size ``N``.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 2:
        v = v.reshape(v.shape[-2:])
    n = v.shape[-1]
    if n % 2 == 0:
        raise ParityError(f"gradient scaling holds for odd sizes only, got {n}")
    if kernel.m != n:
        raise ValueError(f"kernel size {kernel.m} does not match grid size {n}")
    jac_c = _spatial_jacobian(v)
    jac_k = _spectral_jacobian(v)
    t_jac_c = sfft.fft2(jac_c.reshape(n * n, n, n)).reshape(n * n, n * n)
    return float(np.max(np.abs(jac_k - t_jac_c / (n * n))))
