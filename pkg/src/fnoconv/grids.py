"""Frequency index sets and the normalized discrete Fourier transform pair.

Grids are real arrays whose last two axes form the square grid
``J_N = {0, ..., N-1}^2``; any leading axes (channels, batch) are carried
along untouched.  Spectra are complex arrays over ``I_N`` stored in FFT
order: the coefficient of frequency ``k`` lives at position ``k mod N`` in
each axis.  Because ``I_N`` is a set of ``N`` consecutive integers this
storage is a bijection for every ``N``, even or odd.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.fft as sfft

Convention = Literal["unit", "sqrt", "full"]
CONVENTIONS: tuple[str, ...] = ("unit", "sqrt", "full")

#: Imaginary residue / symmetry violation accepted when returning to real grids.
HERMITIAN_TOL = 1e-10


class FourierError(ValueError):
    """Base class for invalid transform inputs."""


class InvalidDimensionError(FourierError):
    pass


class NonHermitianSpectrumError(FourierError):
    pass


class ParityError(FourierError):
    """An operation was called with a grid dimension of the wrong parity."""


@dataclass(frozen=True)
class FreqIndexSet:
    """The index set ``I_N = {-ceil((N-1)/2), ..., floor((N-1)/2)}^2``."""

    n: int

    @property
    def low(self) -> int:
        return -(self.n // 2)

    @property
    def high(self) -> int:
        return (self.n - 1) // 2

    @property
    def axis(self) -> np.ndarray:
        """One-dimensional frequencies in ascending order."""
        return np.arange(self.low, self.high + 1)

    @property
    def indices(self) -> list[tuple[int, int]]:
        ax = self.axis.tolist()
        return [(k1, k2) for k1 in ax for k2 in ax]

    def __contains__(self, k) -> bool:
        k1, k2 = k
        return self.low <= k1 <= self.high and self.low <= k2 <= self.high

    def __len__(self) -> int:
        return self.n * self.n


def freq_index_set(n: int) -> FreqIndexSet:
    if int(n) != n or n < 1:
        raise InvalidDimensionError(f"grid dimension must be a positive integer, got {n!r}")
    return FreqIndexSet(int(n))


def freqs(n: int) -> np.ndarray:
    """Integer frequencies of ``I_n`` (one axis) in FFT storage order."""
    return np.fft.fftfreq(n, d=1.0 / n).round().astype(int)


def position(k: int, n: int) -> int:
    """Storage position of frequency ``k`` along one axis of a size-``n`` spectrum."""
    return k % n


def lam(convention: Convention, n: int) -> float:
    """Normalization factor lambda for an ``n x n`` grid."""
    if convention == "unit":
        return 1.0
    if convention == "sqrt":
        return float(n)
    if convention == "full":
        return float(n * n)
    raise ValueError(f"unknown normalization convention {convention!r}; expected one of {CONVENTIONS}")


def _check_square(a: np.ndarray) -> int:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise InvalidDimensionError(f"expected square grid in the last two axes, got shape {a.shape}")
    if a.shape[-1] < 1:
        raise InvalidDimensionError("grid dimension must be at least 1")
    return a.shape[-1]


def conj_reflect(s: np.ndarray) -> np.ndarray:
    """Return ``conj(s[(-k) mod N])`` over the last two axes."""
    n = s.shape[-1]
    idx = (-np.arange(n)) % n
    return np.conj(s[..., idx[:, None], idx[None, :]])


def hermitian_defect(s: np.ndarray) -> float:
    """Largest aliased-Hermitian symmetry violation of a spectrum."""
    s = np.asarray(s)
    if s.size == 0:
        return 0.0
    return float(np.max(np.abs(s - conj_reflect(s))))


def is_hermitian(s: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    """True iff ``max_k |s_k - conj(s_{(-k) mod N})| <= tol``."""
    return hermitian_defect(s) <= tol


def symmetrize(s: np.ndarray) -> np.ndarray:
    """Project onto the aliased-Hermitian spectra (exactly symmetric result)."""
    return 0.5 * (s + conj_reflect(s))


def dft(v: np.ndarray, convention: Convention = "full") -> np.ndarray:
    """Forward transform ``(Fv)_k = (1/lambda) sum_j v_j exp(-2 pi i <k, j/N>)``.

    Args:
        v: real array, grid in the last two axes.
        convention: normalization; lambda is taken from the size of ``v``.

    Returns:
        Complex spectrum in FFT order, exactly Hermitian.
    """
    v = np.asarray(v, dtype=float)
    n = _check_square(v)
    if not np.all(np.isfinite(v)):
        raise FourierError("grid values must be finite")
    s = sfft.fft2(v) / lam(convention, n)
    # fft2 of real input is Hermitian only up to rounding; make it exact
    return symmetrize(s)


def idft(s: np.ndarray, convention: Convention = "full", tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Inverse transform ``(F^-1 s)_j = (lambda/|J_N|) sum_k s_k exp(2 pi i <k, j/N>)``.

    The symmetry tolerance is relative to the largest coefficient magnitude
    (absolute for spectra of magnitude below one).
    """
    s = np.asarray(s, dtype=complex)
    n = _check_square(s)
    scale = max(1.0, float(np.max(np.abs(s)))) if s.size else 1.0
    defect = hermitian_defect(s)
    if defect > tol * scale:
        raise NonHermitianSpectrumError(
            f"spectrum violates Hermitian symmetry by {defect:.3e} (tolerance {tol * scale:.1e})"
        )
    # ifft2 already divides by |J_N| = n^2
    return (lam(convention, n) * sfft.ifft2(s)).real
