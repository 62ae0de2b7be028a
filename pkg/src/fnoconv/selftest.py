"""Invariant suites for the numerical core, each checked against an oracle.

Every suite returns a :class:`Check` holding the measured worst-case error
and the tolerance it is held to.  ``run_all`` is what ``fnoconv selftest``
executes; the acceptance tests call the same suites with full sizes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from fnoconv import nn, oracles
from fnoconv.conv import (
    SpatialKernel,
    SpectralKernel,
    centered,
    conv_spatial,
    conv_spectral,
    lay_out,
    multiplier_matrix,
    pad_kernel_spatial,
)
from fnoconv.convert import _spatial_jacobian, _spectral_jacobian, cnn_to_fno, fno_to_cnn, grad_convert_check
from fnoconv.grids import CONVENTIONS, dft, idft, symmetrize
from fnoconv.resample import nyquist_merge, nyquist_split, resize_spectrum, trig_resample


@dataclass
class Check:
    name: str
    error: float
    tol: float
    seconds: float = 0.0
    detail: str = ""
    must_exceed: bool = False   # witnesses pass when the defect is large

    @property
    def passed(self) -> bool:
        return bool(self.error > self.tol) if self.must_exceed else bool(self.error <= self.tol)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        op = ">" if self.must_exceed else "<="
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status} {self.name}: {self.error:.3e} {op} {self.tol:.0e}{extra} [{self.seconds:.1f}s]"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        checks = fn(*args, **kwargs)
        for c in checks:
            c.seconds = time.perf_counter() - t0
        return checks
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def random_hermitian(rng: np.random.Generator, m: int, lead: tuple[int, ...] = ()) -> np.ndarray:
    shape = lead + (m, m)
    return symmetrize(rng.normal(size=shape) + 1j * rng.normal(size=shape))


@_timed
def dft_suite(max_n: int = 16, seed: int = 0) -> list[Check]:
    """Round trip and direct-sum agreement for every size up to ``max_n`` and every convention."""
    rng = np.random.default_rng(seed)
    round_trip = oracle = 0.0
    for n in range(1, max_n + 1):
        v = rng.normal(size=(2, n, n))
        for c in CONVENTIONS:
            s = dft(v, c)
            round_trip = max(round_trip, np.max(np.abs(idft(s, c) - v)))
            oracle = max(oracle, np.max(np.abs(s - oracles.direct_dft(v, c))))
            oracle = max(oracle, np.max(np.abs(idft(s, c) - oracles.direct_idft(s, c))))
    return [Check("dft round trip", round_trip, 1e-10), Check("dft vs direct sum", oracle, 1e-10)]


@_timed
def conversion_suite(instances: int = 100, max_n: int = 15, seed: int = 1) -> list[Check]:
    """Both directions of the spatial/spectral equivalence on random odd ``M <= N``."""
    rng = np.random.default_rng(seed)
    fwd = back = 0.0
    odd = np.arange(1, max_n + 1, 2)
    for _ in range(instances):
        m = int(rng.choice(odd))
        n = int(rng.choice(odd[odd >= m]))
        v = rng.normal(size=(n, n))
        theta = SpatialKernel(rng.normal(size=(m, m)))
        lhs = oracles.direct_conv(theta.weights, v)
        rhs = conv_spectral(cnn_to_fno(pad_kernel_spatial(theta, n)), v)
        fwd = max(fwd, np.max(np.abs(lhs - rhs)))
        theta_hat = SpectralKernel(random_hermitian(rng, m))
        lhs = conv_spectral(theta_hat, v)
        rhs = oracles.direct_conv(fno_to_cnn(theta_hat, n).weights, v)
        back = max(back, np.max(np.abs(lhs - rhs)))
    return [Check("C(theta) = K(T(theta))", fwd, 1e-9), Check("K(theta_hat) = C(T^-1(theta_hat))", back, 1e-9)]


def _normwise(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


@_timed
def gradient_scaling_suite(sizes=(1, 3, 5, 7, 9), instances: int = 50, fd_instances: int = 2,
                           h: float = 1e-5, seed: int = 2) -> list[Check]:
    """Spectral Jacobian equals the transformed spatial Jacobian over ``|J_N|``.

    Both Jacobians are also compared with central differences (normwise
    relative error); the spectral one is differenced in the real and
    imaginary part of each coefficient separately.
    """
    rng = np.random.default_rng(seed)
    scaling = fd_spatial = fd_spectral = 0.0
    for n in sizes:
        for i in range(instances):
            theta = SpatialKernel(rng.normal(size=(n, n)))
            v = rng.normal(size=(n, n))
            scaling = max(scaling, grad_convert_check(theta, v))
            if i >= fd_instances:
                continue
            # the Jacobian is indexed by grid position j, i.e. the laid-out kernel
            grid = lay_out(theta.weights[0, 0], n)
            fd = oracles.central_difference(lambda w: oracles.direct_conv(centered(w), v), grid, h)
            fd_spatial = max(fd_spatial, _normwise(_spatial_jacobian(v), fd.reshape(n * n, n * n)))
            theta_hat = cnn_to_fno(theta).coeffs[0, 0]
            vh = sfft.fft2(v)

            def k_re(re):
                return sfft.ifft2((re + 1j * theta_hat.imag) * vh)

            def k_im(im):
                return sfft.ifft2((theta_hat.real + 1j * im) * vh)

            d_re = _complex_difference(k_re, theta_hat.real, h)
            d_im = _complex_difference(k_im, theta_hat.imag, h)
            fd_k = 0.5 * (np.conj(d_re) + 1j * np.conj(d_im))
            fd_spectral = max(fd_spectral, _normwise(_spectral_jacobian(v), fd_k.reshape(n * n, n * n)))
    return [
        Check("spectral grad = T(spatial grad)/|J_N|", scaling, 1e-9),
        Check("spatial Jacobian vs finite differences", fd_spatial, 1e-6),
        Check("spectral Jacobian vs finite differences", fd_spectral, 1e-6),
    ]


def _complex_difference(fn, x: np.ndarray, h: float) -> np.ndarray:
    re = oracles.central_difference(lambda y: fn(y).real, x, h)
    im = oracles.central_difference(lambda y: fn(y).imag, x, h)
    return re + 1j * im


@_timed
def equivariance_suite(draws: int = 20, max_m: int = 6, max_n: int = 12, seed: int = 3) -> list[Check]:
    """Spectral convolution commutes with trigonometric resampling, all parities of (M, N, L)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for pm in (0, 1):
        for pn in (0, 1):
            for pl in (0, 1):
                ms = [m for m in range(1, max_m + 1) if m % 2 == pm]
                for _ in range(draws):
                    m = int(rng.choice(ms))
                    n = int(rng.choice([x for x in range(m, max_n + 1) if x % 2 == pn]))
                    ell = int(rng.choice([x for x in range(m, max_n + 1) if x % 2 == pl]))
                    kernel = SpectralKernel(random_hermitian(rng, m, (2, 2)))
                    v = rng.normal(size=(2, n, n))
                    lhs = conv_spectral(kernel, trig_resample(v, ell))
                    rhs = trig_resample(conv_spectral(kernel, v), ell)
                    worst = max(worst, np.max(np.abs(lhs - rhs)))
    return [Check("K(v resampled) = K(v) resampled", worst, 1e-9, detail="8 parity combinations")]


def cnn_witness(seed: int = 4, n: int = 7, ell: int = 14) -> float:
    """Equivariance defect of a 3x3 spatially zero-padded kernel (expected to be large)."""
    rng = np.random.default_rng(seed)
    kernel = SpatialKernel(rng.normal(size=(3, 3)))
    v = rng.normal(size=(n, n))
    lhs = conv_spatial(kernel, trig_resample(v, ell))
    rhs = trig_resample(conv_spatial(kernel, v), ell)
    return float(np.max(np.abs(lhs - rhs)))


@_timed
def nyquist_suite(max_m: int = 8, max_n: int = 12, seed: int = 5) -> list[Check]:
    rng = np.random.default_rng(seed)
    merge_err = 0.0
    for n in range(2, max_n + 1, 2):
        s = dft(rng.normal(size=(3, n, n)))
        merge_err = max(merge_err, np.max(np.abs(nyquist_merge(nyquist_split(s)) - s)))
    round_trip = residue = 0.0
    for m in range(1, max_m + 1):
        for n in range(m, max_n + 1):
            v = rng.normal(size=(m, m))
            up = trig_resample(v, n)
            round_trip = max(round_trip, np.max(np.abs(trig_resample(up, m) - v)))
            for src, dst in ((v, n), (up, m)):
                grid = sfft.ifft2(resize_spectrum(dft(src), dst)) * dst * dst
                residue = max(residue, np.max(np.abs(grid.imag)))
    return [
        Check("merge o split = id", merge_err, 0.0),
        Check("trig resample round trip", round_trip, 1e-10),
        Check("resampled imaginary residue", residue, 1e-10),
    ]


def _fd_model_error(model: nn.Model, x: np.ndarray, labels: np.ndarray, h: float) -> float:
    _, grads, _, _ = nn.loss_and_grads(model, x, labels)
    params = nn.parameters(model)
    flat = nn.flatten(params)
    analytic = nn.flatten(grads)
    worst = 0.0
    for idx in range(flat.size):
        plus = flat.copy()
        minus = flat.copy()
        plus[idx] += h
        minus[idx] -= h
        lp, _, _, _ = nn.loss_and_grads(nn.with_parameters(model, nn.unflatten(plus, params)), x, labels)
        lm, _, _, _ = nn.loss_and_grads(nn.with_parameters(model, nn.unflatten(minus, params)), x, labels)
        fd = (lp - lm) / (2 * h)
        g = analytic[idx]
        # an absolute floor keeps exactly-zero gradients from dividing by rounding noise
        worst = max(worst, abs(g - fd) / max(abs(g), abs(fd), 1e-8))
    return worst


def closed_form_error(model: nn.Model, x: np.ndarray, labels: np.ndarray) -> float:
    """Spectral-kernel gradients against ``sigma'(Psi) conj(v_hat_k) conj(b_k)`` summed with the cotangent.

    The sum is evaluated with the direct-sum DFT.  Layers running on a grid
    larger than their kernel (or even) see ``theta_hat`` through a fixed linear
    map ``P``; the closed form on ``I_N`` is pulled back through it.
    """
    _, _, _, layer_grads = nn.loss_and_grads(model, x, labels)
    worst = 0.0
    v = x
    for i, (layer, lg) in enumerate(zip(model.layers, layer_grads)):
        out, cache = nn._layer_forward(layer, v)
        if isinstance(layer.kernel, SpectralKernel):
            n = v.shape[-1]
            g = lg.upstream * nn.activate_prime(layer.activation, cache.z)
            vh = oracles.direct_dft(v, "full")                  # (B, i, N, N)
            gb = oracles.direct_dft(g, "unit")                  # sum_j g_j conj(b_k(j))
            on_grid = np.einsum("bokl,bikl->oikl", gb, np.conj(vh))
            p = multiplier_matrix(layer.kernel.m, n)
            expected = p.T @ on_grid @ p
            worst = max(worst, float(np.max(np.abs(expected - lg.kernel_full))))
        v = out
        if i in model.downsample_points:
            v = trig_resample(v, -(-v.shape[-1] // 2))
    return worst


def gradient_models(seed: int = 6) -> list[tuple[str, nn.Model]]:
    """Two-layer, two-channel models exercising every parameter group."""
    out = []
    for kind, size in (("spatial", 3), ("spectral", 5), ("spectral", 4)):
        m = nn.init_model(kind, channels=(2, 2), kernel_size=size, in_channels=2, n_classes=3,
                          pool_size=2, activation="gelu", residual=True, seed=seed, train_n=8)
        out.append((f"{kind} m={size}", m))
    return out


@_timed
def model_gradient_suite(n: int = 8, batch: int = 3, h: float = 1e-4, seed: int = 7) -> list[Check]:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(batch, 2, n, n))
    labels = rng.integers(0, 3, size=batch)
    fd = closed = 0.0
    for _, model in gradient_models():
        fd = max(fd, _fd_model_error(model, x, labels, h))
        if nn.model_kind(model) == "spectral":
            closed = max(closed, closed_form_error(model, x, labels))
    return [
        Check("model gradients vs finite differences", fd, 1e-4, detail=f"J_{n}, h={h:g}"),
        Check("spectral gradient closed form", closed, 1e-9),
    ]


def run_all(quick: bool = False) -> list[Check]:
    if quick:
        suites = [
            dft_suite(max_n=8),
            conversion_suite(instances=20),
            gradient_scaling_suite(instances=5, fd_instances=1),
            equivariance_suite(draws=3),
            nyquist_suite(),
            model_gradient_suite(),
        ]
    else:
        suites = [dft_suite(), conversion_suite(), gradient_scaling_suite(), equivariance_suite(),
                  nyquist_suite(), model_gradient_suite()]
    checks = [c for suite in suites for c in suite]
    checks.append(Check("spatial kernel breaks equivariance", cnn_witness(), 1e-3, must_exceed=True))
    return checks
