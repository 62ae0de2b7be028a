"""Self-describing text checkpoints for :class:`fnoconv.nn.Model`.

Layout::

    fnoconv-checkpoint 1
    model pool=<S> classes=<s> train_n=<N> in_channels=<c> downsample=<i,j|->
    layer <i> kind=<spatial|spectral> m=<M> cin=<c> cout=<c> act=<name>
    <c_out * c_in * M rows of M values; spectral values as re,im>
    bias
    <one row of c_out values>
    w_mix                      (only for layers with a residual path)
    <c_out rows of c_in values>
    classifier rows=<s> cols=<S*S*c>
    <s rows>
    classifier_bias
    <one row>
    fnv1a64 <hex>

Values use 17 significant digits, which round-trips doubles exactly.  The
checksum is FNV-1a (64 bit) over the numeric rows joined by newlines.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from fnoconv.conv import SpatialKernel, SpectralKernel
from fnoconv.nn import LayerParams, Model

MAGIC = "fnoconv-checkpoint 1"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


class CheckpointError(ValueError):
    pass


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _rows(a: np.ndarray) -> list[str]:
    a = np.asarray(a)
    a2 = a.reshape(-1, a.shape[-1]) if a.ndim else a.reshape(1, 1)
    if np.iscomplexobj(a2):
        return [" ".join(f"{_fmt(z.real)},{_fmt(z.imag)}" for z in row) for row in a2]
    return [" ".join(_fmt(x) for x in row) for row in a2]


def dumps(model: Model) -> str:
    lines: list[str] = [MAGIC]
    payload: list[str] = []

    def values(a):
        rows = _rows(a)
        payload.extend(rows)
        lines.extend(rows)

    ds = ",".join(str(i) for i in model.downsample_points) or "-"
    lines.append(f"model pool={model.pool_size} classes={model.n_classes} train_n={model.train_n} "
                 f"in_channels={model.in_channels} downsample={ds}")
    for i, layer in enumerate(model.layers):
        k = layer.kernel
        lines.append(f"layer {i} kind={k.kind} m={k.m} cin={k.c_in} cout={k.c_out} act={layer.activation}")
        values(k.weights if isinstance(k, SpatialKernel) else k.coeffs)
        lines.append("bias")
        values(layer.bias)
        if layer.w_mix is not None:
            lines.append("w_mix")
            values(layer.w_mix)
    rows, cols = model.classifier.shape
    lines.append(f"classifier rows={rows} cols={cols}")
    values(model.classifier)
    lines.append("classifier_bias")
    values(model.classifier_bias)
    digest = fnv1a64("\n".join(payload).encode())
    lines.append(f"fnv1a64 {digest:016x}")
    return "\n".join(lines) + "\n"


def save(model: Model, path: str | Path) -> None:
    Path(path).write_text(dumps(model))


def _fields(line: str, head: str) -> dict[str, str]:
    parts = line.split()
    if not parts or parts[0] != head:
        raise CheckpointError(f"expected a '{head}' line, got {line!r}")
    out = {}
    for token in parts[1:]:
        if "=" in token:
            key, val = token.split("=", 1)
            out[key] = val
    return out


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0
        self.payload: list[str] = []

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise CheckpointError("unexpected end of checkpoint")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def peek(self) -> str:
        return self.lines[self.pos] if self.pos < len(self.lines) else ""

    def values(self, n_rows: int, n_cols: int, complex_=False) -> np.ndarray:
        data = []
        for _ in range(n_rows):
            line = self.next()
            self.payload.append(line)
            tokens = line.split()
            if len(tokens) != n_cols:
                raise CheckpointError(f"expected {n_cols} values on line {self.pos}, got {len(tokens)}")
            try:
                if complex_:
                    data.append([complex(*map(float, t.split(","))) for t in tokens])
                else:
                    data.append([float(t) for t in tokens])
            except (TypeError, ValueError) as exc:
                raise CheckpointError(f"malformed number on line {self.pos}: {exc}") from None
        return np.array(data, dtype=complex if complex_ else float)


def loads(text: str) -> Model:
    r = _Reader(text)
    if r.next().strip() != MAGIC:
        raise CheckpointError("not an fnoconv checkpoint")
    try:
        head = _fields(r.next(), "model")
        pool = int(head["pool"])
        train_n = int(head["train_n"])
        in_channels = int(head["in_channels"])
        ds = () if head.get("downsample", "-") == "-" else tuple(int(i) for i in head["downsample"].split(","))
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"bad model header: {exc}") from None
    layers = []
    while r.peek().startswith("layer"):
        info = _fields(r.next(), "layer")
        try:
            kind, m, cin, cout = info["kind"], int(info["m"]), int(info["cin"]), int(info["cout"])
            act = info["act"]
        except (KeyError, ValueError) as exc:
            raise CheckpointError(f"bad layer header: {exc}") from None
        if kind not in ("spatial", "spectral"):
            raise CheckpointError(f"unknown kernel kind {kind!r}")
        raw = r.values(cout * cin * m, m, complex_=kind == "spectral").reshape(cout, cin, m, m)
        kernel = SpatialKernel(raw) if kind == "spatial" else SpectralKernel(raw)
        _fields(r.next(), "bias")
        bias = r.values(1, cout)[0]
        w_mix = None
        if r.peek().strip() == "w_mix":
            r.next()
            w_mix = r.values(cout, cin)
        layers.append(LayerParams(kernel, bias, w_mix, act))
    info = _fields(r.next(), "classifier")
    try:
        rows, cols = int(info["rows"]), int(info["cols"])
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"bad classifier header: {exc}") from None
    cls = r.values(rows, cols)
    _fields(r.next(), "classifier_bias")
    cls_bias = r.values(1, rows)[0]
    digest_line = r.next().split()
    if len(digest_line) != 2 or digest_line[0] != "fnv1a64":
        raise CheckpointError("malformed checksum line")
    try:
        expected = int(digest_line[1], 16)
    except ValueError:
        raise CheckpointError("malformed checksum line") from None
    actual = fnv1a64("\n".join(r.payload).encode())
    if actual != expected:
        raise CheckpointError(f"checksum mismatch: stored {expected:016x}, computed {actual:016x}")
    return Model(layers, pool, cls, cls_bias, ds, train_n, meta={"in_channels": in_channels})


def load(path: str | Path) -> Model:
    return loads(Path(path).read_text())
