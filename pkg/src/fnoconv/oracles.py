"""Slow reference implementations used to check the fast paths.

Nothing here calls an FFT: every transform and convolution is the literal
double sum, and derivatives are central finite differences.
"""

from __future__ import annotations

import numpy as np

from fnoconv.grids import freqs, lam


def _phase(n: int, sign: float) -> np.ndarray:
    """``exp(sign 2 pi i <k, j/N>)`` as a 4-D table indexed ``[k1, k2, j1, j2]`` (FFT order in k)."""
    k = freqs(n)
    j = np.arange(n)
    kj = k[:, None, None, None] * j[None, None, :, None] + k[None, :, None, None] * j[None, None, None, :]
    return np.exp(sign * 2j * np.pi * kj / n)


def direct_dft(v: np.ndarray, convention: str = "full") -> np.ndarray:
    """``(1/lambda) sum_j v_j exp(-2 pi i <k, j/N>)`` as a literal O(N^4) sum."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    return np.tensordot(v, _phase(n, -1.0), axes=([-2, -1], [2, 3])) / lam(convention, n)


def direct_idft(s: np.ndarray, convention: str = "full") -> np.ndarray:
    """``(lambda/|J_N|) sum_k s_k exp(2 pi i <k, j/N>)``, real part."""
    s = np.asarray(s, dtype=complex)
    n = s.shape[-1]
    out = np.tensordot(s, _phase(n, 1.0), axes=([-2, -1], [0, 1]))
    return (out * lam(convention, n) / (n * n)).real


def direct_conv(weights: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Circular convolution with centered kernel offsets, summed over input channels.

    ``weights`` is ``(c_out, c_in, m, m)`` (or ``(m, m)``), ``v`` is
    ``(c_in, n, n)`` (or ``(n, n)``).
    """
    w = np.asarray(weights, dtype=float)
    x = np.asarray(v, dtype=float)
    single = x.ndim == 2
    if w.ndim == 2:
        w = w[None, None]
    if single:
        x = x[None]
    c_out, c_in, m, _ = w.shape
    n = x.shape[-1]
    out = np.zeros((c_out, n, n))
    half = m // 2
    for o in range(c_out):
        for i in range(c_in):
            for a in range(m):
                for b in range(m):
                    # out[j] += w[o] * v[j - o]
                    out[o] += w[o, i, a, b] * np.roll(x[i], (a - half, b - half), axis=(0, 1))
    return out[0] if single and c_out == 1 else out


def trig_eval(s: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric polynomial ``sum_k s_k exp(2 pi i <k, x>)`` at points ``x`` in [0,1)^2."""
    n = s.shape[-1]
    f = freqs(n)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    e1 = np.exp(2j * np.pi * np.outer(pts[:, 0], f))
    e2 = np.exp(2j * np.pi * np.outer(pts[:, 1], f))
    return np.einsum("pa,ab,pb->p", e1, s, e2)


def central_difference(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Jacobian of ``fn`` (array-valued) at ``x`` by central differences.

    Returns an array of shape ``fn(x).shape + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    base = np.asarray(fn(x))
    jac = np.zeros(base.shape + x.shape)
    flat = x.reshape(-1)
    for idx in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[idx] += h
        xm[idx] -= h
        d = (np.asarray(fn(xp.reshape(x.shape))) - np.asarray(fn(xm.reshape(x.shape)))) / (2 * h)
        jac[(...,) + np.unravel_index(idx, x.shape)] = d
    return jac


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> float:
    """``max |a - b| / max(|a|, |b|, floor)`` entrywise."""
    a = np.asarray(a)
    b = np.asarray(b)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0
