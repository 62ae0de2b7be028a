"""Operator layers ``sigma(W u + K u + b)``, pooling, loss and hand-written gradients.

Batches are arrays of shape ``(B, C, N, N)``.  A model's trainable state is
exposed as a list of real arrays (:func:`parameters`); spectral kernels
enter that list through their half-spectrum parametrization so that any
update applied to it keeps the kernels Hermitian.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
import scipy.fft as sfft
from scipy.special import ndtr

from fnoconv.conv import (
    ChannelMismatchError,
    SpatialKernel,
    SpectralKernel,
    centered,
    mix_channels,
    multiplier_matrix,
    spatial_multiplier,
    spectral_multiplier,
)
from fnoconv.convert import cnn_to_fno, fno_to_cnn
from fnoconv.resample import resize_spectrum, trig_resample, trig_resample_matrix

Kernel = Union[SpatialKernel, SpectralKernel]
ACTIVATIONS = ("relu", "gelu", "identity")

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


# -- activations ---------------------------------------------------------------

def relu(x):
    return np.maximum(x, 0.0)


def relu_prime(x):
    return (np.asarray(x) > 0).astype(float)


def gelu(x):
    """``x * Phi(x)`` with ``Phi`` the standard normal CDF."""
    return x * ndtr(x)


def gelu_prime(x):
    return ndtr(x) + x * _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


def activate(name: str, x):
    if name == "relu":
        return relu(x)
    if name == "gelu":
        return gelu(x)
    if name == "identity":
        return np.asarray(x, dtype=float)
    raise ValueError(f"unknown activation {name!r}")


def activate_prime(name: str, x):
    if name == "relu":
        return relu_prime(x)
    if name == "gelu":
        return gelu_prime(x)
    if name == "identity":
        return np.ones_like(x, dtype=float)
    raise ValueError(f"unknown activation {name!r}")


# -- half-spectrum parametrization ----------------------------------------------

@functools.lru_cache(maxsize=64)
def hermitian_pairs(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Canonical half of ``I_m``.

    Returns flat positions ``canon``, their conjugate partners, and a mask of
    the self-conjugate ones (DC and, for even ``m``, the aliased Nyquist
    corners and edges), which carry a real part only.
    """
    idx = np.arange(m * m)
    p1, p2 = np.divmod(idx, m)
    partner = ((-p1) % m) * m + (-p2) % m
    canon = idx[idx <= partner]
    return canon, partner[canon], canon == partner[canon]


def half_size(m: int) -> int:
    canon, _, self_conj = hermitian_pairs(m)
    return len(canon) + int(np.count_nonzero(~self_conj))


def spectral_to_half(coeffs: np.ndarray) -> np.ndarray:
    """Real parameter vector ``[Re over the half, Im over its non-self-conjugate part]``."""
    m = coeffs.shape[-1]
    canon, _, self_conj = hermitian_pairs(m)
    flat = coeffs.reshape(coeffs.shape[:-2] + (m * m,))
    return np.concatenate([flat[..., canon].real, flat[..., canon[~self_conj]].imag], axis=-1)


def half_to_spectral(params: np.ndarray, m: int) -> np.ndarray:
    canon, partner, self_conj = hermitian_pairs(m)
    nc = len(canon)
    re, im = params[..., :nc], params[..., nc:]
    flat = np.zeros(params.shape[:-1] + (m * m,), dtype=complex)
    full_im = np.zeros(re.shape)
    full_im[..., ~self_conj] = im
    flat[..., canon] = re + 1j * full_im
    flat[..., partner] = re - 1j * full_im
    return flat.reshape(params.shape[:-1] + (m, m))


def half_gradient(grad: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. independent coefficients down to the half parameters.

    ``grad`` holds ``dL/dRe + i dL/dIm`` for every coefficient of ``I_m``.
    """
    m = grad.shape[-1]
    canon, partner, self_conj = hermitian_pairs(m)
    flat = grad.reshape(grad.shape[:-2] + (m * m,))
    g_re = flat[..., canon].real + np.where(self_conj, 0.0, flat[..., partner].real)
    g_im = flat[..., canon].imag - flat[..., partner].imag
    return np.concatenate([g_re, g_im[..., ~self_conj]], axis=-1)


# -- layers -------------------------------------------------------------------

@dataclass
class LayerParams:
    kernel: Kernel
    bias: np.ndarray
    w_mix: np.ndarray | None = None
    activation: str = "gelu"

    def __post_init__(self):
        self.bias = np.asarray(self.bias, dtype=float).reshape(-1)
        if self.bias.shape != (self.kernel.c_out,):
            raise ChannelMismatchError(f"bias must have length {self.kernel.c_out}, got {self.bias.shape}")
        if self.w_mix is not None:
            self.w_mix = np.asarray(self.w_mix, dtype=float)
            if self.w_mix.shape != (self.c_out, self.c_in):
                raise ChannelMismatchError(f"w_mix must be {self.c_out}x{self.c_in}, got {self.w_mix.shape}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def c_in(self) -> int:
        return self.kernel.c_in

    @property
    def c_out(self) -> int:
        return self.kernel.c_out


def kernel_multiplier(kernel: Kernel, n: int) -> np.ndarray:
    if isinstance(kernel, SpatialKernel):
        return spatial_multiplier(kernel, n)
    return spectral_multiplier(kernel, n)


@dataclass
class _LayerCache:
    v: np.ndarray
    vh: np.ndarray
    mult: np.ndarray
    z: np.ndarray


def _as_batch(v: np.ndarray) -> tuple[np.ndarray, bool]:
    v = np.asarray(v, dtype=float)
    if v.ndim == 3:
        return v[None], True
    if v.ndim != 4:
        raise ValueError(f"expected (C, N, N) or (B, C, N, N) input, got shape {v.shape}")
    return v, False


def _layer_forward(p: LayerParams, v: np.ndarray) -> tuple[np.ndarray, _LayerCache]:
    if v.shape[1] != p.c_in:
        raise ChannelMismatchError(f"layer expects {p.c_in} channels, got {v.shape[1]}")
    n = v.shape[-1]
    mult = kernel_multiplier(p.kernel, n)
    vh = sfft.fft2(v)
    z = sfft.ifft2(mix_channels(vh, mult)).real
    if p.w_mix is not None:
        z += np.einsum("oi,bihw->bohw", p.w_mix, v)
    z += p.bias[None, :, None, None]
    return activate(p.activation, z), _LayerCache(v, vh, mult, z)


def layer_forward(p: LayerParams, v: np.ndarray) -> np.ndarray:
    """``sigma(W v + K v + b)`` for a single grid ``(C, N, N)`` or a batch."""
    x, single = _as_batch(v)
    out, _ = _layer_forward(p, x)
    return out[0] if single else out


@dataclass
class LayerGrads:
    """Gradients of one layer.

    ``kernel`` is real: spatial weights, or the half-spectrum parameters of a
    spectral kernel.  ``kernel_full`` holds ``dL/dRe + i dL/dIm`` for every
    spectral coefficient treated as independent (``None`` for spatial).
    ``upstream`` is the cotangent that arrived at the layer output.
    """

    kernel: np.ndarray
    bias: np.ndarray
    w_mix: np.ndarray | None
    kernel_full: np.ndarray | None = None
    upstream: np.ndarray | None = None


def _outer_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``out[o, i] = sum_b a[b, o] * b[b, i]`` per frequency, shape ``(O, I, H, W)``."""
    bsz, c_o, h, w = a.shape
    a2 = np.moveaxis(a.reshape(bsz, c_o, h * w), -1, 0)    # (hw, B, o)
    b2 = np.moveaxis(b.reshape(bsz, -1, h * w), -1, 0)     # (hw, B, i)
    out = np.matmul(np.swapaxes(a2, -1, -2), b2)           # (hw, o, i)
    return np.moveaxis(out, 0, -1).reshape(c_o, -1, h, w)


def _layer_backward(p: LayerParams, cache: _LayerCache, upstream: np.ndarray) -> tuple[LayerGrads, np.ndarray]:
    v, n = cache.v, cache.v.shape[-1]
    gz = upstream * activate_prime(p.activation, cache.z)
    gh = sfft.fft2(gz)
    g_bias = gz.sum(axis=(0, 2, 3))
    g_mix = None if p.w_mix is None else np.einsum("bohw,bihw->oi", gz, v)
    # dL/dRe(mult) + i dL/dIm(mult)
    g_mult = _outer_sum(gh, np.conj(cache.vh)) / (n * n)
    cot = sfft.ifft2(mix_channels(gh, np.conj(np.swapaxes(cache.mult, 0, 1)))).real
    if p.w_mix is not None:
        cot += np.einsum("oi,bohw->bihw", p.w_mix, gz)
    if isinstance(p.kernel, SpatialKernel):
        grid = (sfft.ifft2(g_mult) * (n * n)).real
        return LayerGrads(centered(grid, p.kernel.m), g_bias, g_mix), cot
    pm = multiplier_matrix(p.kernel.m, n)
    g_full = pm.T @ g_mult @ pm
    return LayerGrads(half_gradient(g_full), g_bias, g_mix, g_full), cot


def layer_backward(p: LayerParams, v: np.ndarray, upstream: np.ndarray) -> tuple[LayerGrads, np.ndarray]:
    """Parameter gradients and input cotangent for upstream cotangent ``upstream``."""
    x, single = _as_batch(v)
    up, _ = _as_batch(upstream)
    _, cache = _layer_forward(p, x)
    grads, cot = _layer_backward(p, cache, up)
    grads.upstream = up
    return grads, (cot[0] if single else cot)


# -- pooling, resampling, loss --------------------------------------------------

@functools.lru_cache(maxsize=128)
def pool_matrix(n: int, s: int) -> np.ndarray:
    """Averaging weights: row ``i`` covers ``[floor(i n/s), ceil((i+1) n/s))``."""
    a = np.zeros((s, n))
    for i in range(s):
        lo = (i * n) // s
        hi = -((-(i + 1) * n) // s)
        a[i, lo:hi] = 1.0 / (hi - lo)
    return a


def adaptive_avg_pool(v: np.ndarray, s: int) -> np.ndarray:
    if s < 1:
        raise ValueError(f"pool size must be positive, got {s}")
    n = np.shape(v)[-1]
    if s > n:
        warnings.warn(f"pool size {s} exceeds grid size {n}; cells repeat samples", stacklevel=2)
    a = pool_matrix(n, s)
    return a @ np.asarray(v, dtype=float) @ a.T


def trig_downsample_layer(v: np.ndarray, factor: int = 2) -> np.ndarray:
    """Trigonometric downsampling to ``ceil(N / factor)``; replaces striding."""
    n = np.shape(v)[-1]
    if n < 2:
        raise ValueError("downsampling needs a grid of size at least 2")
    return trig_resample(v, -(-n // factor))


def cross_entropy(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Loss ``-log softmax(logits)[label]`` and its gradient."""
    z = np.asarray(logits, dtype=float)
    shifted = z - z.max()
    log_norm = np.log(np.exp(shifted).sum())
    probs = np.exp(shifted - log_norm)
    grad = probs.copy()
    grad[label] -= 1.0
    return float(log_norm - shifted[label]), grad


def _batch_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(len(labels))
    losses = log_norm - shifted[rows, labels]
    grad = np.exp(shifted - log_norm[:, None])
    grad[rows, labels] -= 1.0
    return losses, grad


# -- model ----------------------------------------------------------------------

@dataclass
class Model:
    """Operator layers, adaptive pooling to ``pool_size``, linear classifier.

    Features are flattened channel-major, then row-major.  ``downsample_points``
    lists layer indices after which the feature map is trigonometrically
    halved.  ``train_n`` records the resolution the model was fitted at.
    """

    layers: list[LayerParams]
    pool_size: int
    classifier: np.ndarray
    classifier_bias: np.ndarray
    downsample_points: tuple[int, ...] = ()
    train_n: int = 28
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.classifier = np.asarray(self.classifier, dtype=float)
        self.classifier_bias = np.asarray(self.classifier_bias, dtype=float)
        self.downsample_points = tuple(int(i) for i in self.downsample_points)
        for a, b in zip(self.layers, self.layers[1:]):
            if a.c_out != b.c_in:
                raise ChannelMismatchError(f"layer channels do not chain: {a.c_out} -> {b.c_in}")
        c_last = self.layers[-1].c_out if self.layers else self.in_channels
        expected = self.pool_size ** 2 * c_last
        if self.classifier.ndim != 2 or self.classifier.shape[1] != expected:
            raise ChannelMismatchError(f"classifier must have {expected} inputs, got shape {self.classifier.shape}")
        if self.classifier_bias.shape != (self.classifier.shape[0],):
            raise ChannelMismatchError("classifier bias length must equal the number of classes")

    @property
    def in_channels(self) -> int:
        if self.layers:
            return self.layers[0].c_in
        return self.meta.get("in_channels", 1)

    @property
    def n_classes(self) -> int:
        return self.classifier.shape[0]


def _forward(model: Model, x: np.ndarray):
    caches = []
    shapes = []
    for i, layer in enumerate(model.layers):
        x, cache = _layer_forward(layer, x)
        caches.append(cache)
        shapes.append(x.shape[-1])
        if i in model.downsample_points:
            r = trig_resample_matrix(x.shape[-1], -(-x.shape[-1] // 2))
            x = r @ x @ r.T
    n_feat = x.shape[-1]
    a = pool_matrix(n_feat, model.pool_size)
    pooled = a @ x @ a.T
    flat = pooled.reshape(len(pooled), -1)
    logits = flat @ model.classifier.T + model.classifier_bias
    return logits, (caches, shapes, n_feat, flat)


def model_forward(model: Model, v: np.ndarray) -> np.ndarray:
    """Logits for one grid ``(C, N, N)`` or a batch ``(B, C, N, N)``; any ``N``."""
    x, single = _as_batch(v)
    if x.shape[1] != model.in_channels:
        raise ChannelMismatchError(f"model expects {model.in_channels} channels, got {x.shape[1]}")
    logits, _ = _forward(model, x)
    return logits[0] if single else logits


def loss_and_grads(model: Model, x: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over a batch and gradients for :func:`parameters` order.

    Returns ``(loss, grads, logits, layer_grads)``.
    """
    x, _ = _as_batch(x)
    labels = np.asarray(labels, dtype=int)
    logits, (caches, shapes, n_feat, flat) = _forward(model, x)
    losses, g_logits = _batch_cross_entropy(logits, labels)
    batch = len(labels)
    g_logits /= batch
    g_cls = g_logits.T @ flat
    g_cls_bias = g_logits.sum(axis=0)
    g = (g_logits @ model.classifier).reshape(batch, -1, model.pool_size, model.pool_size)
    a = pool_matrix(n_feat, model.pool_size)
    g = a.T @ g @ a
    layer_grads: list[LayerGrads] = [None] * len(model.layers)
    for i in reversed(range(len(model.layers))):
        if i in model.downsample_points:
            r = trig_resample_matrix(shapes[i], -(-shapes[i] // 2))
            g = r.T @ g @ r
        upstream = g
        layer_grads[i], g = _layer_backward(model.layers[i], caches[i], g)
        layer_grads[i].upstream = upstream
    grads = []
    for lg in layer_grads:
        grads.extend(_layer_arrays(lg.kernel, lg.bias, lg.w_mix))
    grads += [g_cls, g_cls_bias]
    return float(losses.mean()), grads, logits, layer_grads


def _layer_arrays(kernel, bias, w_mix) -> list[np.ndarray]:
    return [kernel, bias] + ([] if w_mix is None else [w_mix])


def parameters(model: Model) -> list[np.ndarray]:
    """Trainable real arrays; spectral kernels appear as half-spectrum parameters."""
    out = []
    for layer in model.layers:
        k = layer.kernel
        kp = k.weights if isinstance(k, SpatialKernel) else spectral_to_half(k.coeffs)
        out.extend(a.copy() for a in _layer_arrays(kp, layer.bias, layer.w_mix))
    return out + [model.classifier.copy(), model.classifier_bias.copy()]


def with_parameters(model: Model, params: list[np.ndarray]) -> Model:
    """A copy of ``model`` with arrays from ``params`` (same order as :func:`parameters`)."""
    it = iter(params)
    layers = []
    for layer in model.layers:
        kp = next(it)
        if isinstance(layer.kernel, SpatialKernel):
            kernel = SpatialKernel(kp)
        else:
            kernel = SpectralKernel(half_to_spectral(kp, layer.kernel.m))
        bias = next(it)
        w_mix = None if layer.w_mix is None else next(it)
        layers.append(LayerParams(kernel, bias, w_mix, layer.activation))
    return replace(model, layers=layers, classifier=next(it), classifier_bias=next(it), meta=dict(model.meta))


def flatten(arrays: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.ravel(a) for a in arrays])


def unflatten(vec: np.ndarray, like: list[np.ndarray]) -> list[np.ndarray]:
    out, pos = [], 0
    for a in like:
        out.append(np.asarray(vec[pos:pos + a.size]).reshape(a.shape))
        pos += a.size
    return out


# -- construction -----------------------------------------------------------------

def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_model(
    kind: str = "spatial",
    channels: tuple[int, ...] = (8, 16),
    kernel_size: int = 5,
    in_channels: int = 1,
    n_classes: int = 10,
    pool_size: int = 4,
    activation: str = "gelu",
    residual: bool = False,
    seed: int = 0,
    train_n: int = 28,
    downsample_points: tuple[int, ...] = (),
) -> Model:
    """Fresh model; for ``kind="spectral"`` ``kernel_size`` is the number of modes.

    Spectral kernels start as the exact conversion of a freshly drawn spatial
    kernel of the same size.
    """
    if kind not in ("spatial", "spectral"):
        raise ValueError(f"kind must be 'spatial' or 'spectral', got {kind!r}")
    rng = np.random.default_rng(seed)
    layers = []
    c_in = in_channels
    m = kernel_size
    for c_out in channels:
        w = SpatialKernel(_uniform(rng, c_in * m * m, (c_out, c_in, m, m)))
        kernel = w if kind == "spatial" else cnn_to_fno(w, m)
        bias = _uniform(rng, c_in * m * m, c_out)
        w_mix = _uniform(rng, c_in, (c_out, c_in)) if residual else None
        layers.append(LayerParams(kernel, bias, w_mix, activation))
        c_in = c_out
    fan_in = pool_size * pool_size * c_in
    cls = _uniform(rng, fan_in, (n_classes, fan_in))
    cls_bias = _uniform(rng, fan_in, n_classes)
    return Model(layers, pool_size, cls, cls_bias, tuple(downsample_points), train_n,
                 meta={"in_channels": in_channels})


def convert_model(model: Model, to: str, n: int | None = None, modes: int | None = None,
                  kernel_size: int | None = None) -> Model:
    """Convert every layer's kernel to the other parametrization.

    ``to="spectral"``: spatial kernels become ``cnn_to_fno`` at size ``n``
    (default ``model.train_n``), optionally truncated to ``modes``.
    ``to="spatial"``: spectral kernels become ``fno_to_cnn`` at size ``n``,
    optionally cropped to ``kernel_size``.
    """
    n = model.train_n if n is None else n
    layers = []
    for layer in model.layers:
        k = layer.kernel
        if to == "spectral":
            if isinstance(k, SpatialKernel):
                k = cnn_to_fno(k, n)
            if modes is not None and modes != k.m:
                k = SpectralKernel(resize_spectrum(k.coeffs, modes))
        elif to == "spatial":
            if isinstance(k, SpectralKernel):
                k = fno_to_cnn(k, n, kernel_size)
        else:
            raise ValueError(f"conversion target must be 'spectral' or 'spatial', got {to!r}")
        layers.append(LayerParams(k, layer.bias.copy(), None if layer.w_mix is None else layer.w_mix.copy(),
                                  layer.activation))
    return replace(model, layers=layers, classifier=model.classifier.copy(),
                   classifier_bias=model.classifier_bias.copy(), meta=dict(model.meta))


def model_kind(model: Model) -> str:
    kinds = {layer.kernel.kind for layer in model.layers}
    return kinds.pop() if len(kinds) == 1 else "mixed"

