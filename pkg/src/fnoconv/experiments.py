"""Dataset ingestion, training, and the resolution / kernel-size sweeps."""

from __future__ import annotations

import csv
import gzip
import io
import logging
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from fnoconv import nn
from fnoconv.conv import SpatialKernel
from fnoconv.resample import bilinear_resample, trig_resample

log = logging.getLogger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

RESIZE_METHODS = ("trig", "bilinear", "none")
IMPLEMENTATIONS = ("cnn", "fno", "trig-first")
CSV_FIELDS = ("experiment", "method", "resize", "kernel_size", "modes", "resolution", "accuracy",
              "mean_loss", "seed")

FASHION_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class IdxFormatError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class Dataset:
    """Images of shape ``(count, channels, n, n)`` scaled to [0, 1] and integer labels."""

    images: np.ndarray
    labels: np.ndarray
    n_classes: int = 10
    native_n: int = 28

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.images.ndim == 3:
            self.images = self.images[:, None]
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, size: int | None, seed: int) -> "Dataset":
        """Seeded random subset (the whole set when ``size`` is None or too large)."""
        if size is None or size >= len(self):
            return self
        idx = np.sort(np.random.default_rng(seed).permutation(len(self))[:size])
        return Dataset(self.images[idx], self.labels[idx], self.n_classes, self.native_n)


def _read(path: str | Path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def _parse_idx(data: bytes, magic: int, name: str) -> np.ndarray:
    if len(data) < 8:
        raise IdxFormatError(f"{name}: truncated header")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise IdxFormatError(f"{name}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IdxFormatError(f"{name}: truncated header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    count = int(np.prod(dims))
    if len(data) - header < count:
        raise IdxFormatError(f"{name}: truncated payload ({len(data) - header} of {count} bytes)")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path: str | Path, labels_path: str | Path, n_classes: int = 10) -> Dataset:
    """Read an IDX image/label file pair (optionally gzip-compressed)."""
    images = _parse_idx(_read(images_path), IMAGE_MAGIC, str(images_path))
    labels = _parse_idx(_read(labels_path), LABEL_MAGIC, str(labels_path))
    if len(images) != len(labels):
        raise IdxFormatError(f"{len(images)} images but {len(labels)} labels")
    if images.shape[1] != images.shape[2]:
        raise IdxFormatError(f"images must be square, got {images.shape[1]}x{images.shape[2]}")
    return Dataset(images.astype(float) / 255.0, labels.astype(int), n_classes, images.shape[1])


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 images ``(count, rows, cols)`` and labels as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    Path(images_path).write_bytes(struct.pack(">IIII", IMAGE_MAGIC, *images.shape) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", LABEL_MAGIC, len(labels)) + labels.tobytes())


def find_split(data_dir: str | Path, split: str) -> tuple[Path, Path]:
    data_dir = Path(data_dir)
    found = []
    for stem in FASHION_FILES[split]:
        for cand in (data_dir / stem, data_dir / f"{stem}.gz"):
            if cand.exists():
                found.append(cand)
                break
        else:
            raise FileNotFoundError(f"missing {stem}[.gz] in {data_dir}")
    return found[0], found[1]


def load_split(data_dir: str | Path, split: str) -> Dataset:
    return load_idx(*find_split(data_dir, split))


# -- training -------------------------------------------------------------------

@dataclass
class TrainConfig:
    epochs: int = 5
    batch_size: int = 64
    lr: float = 0.05
    momentum: float = 0.9
    seed: int = 42
    train_subset: int | None = 6000
    test_subset: int | None = 1000


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    accuracy: float


def train(model: nn.Model, data: Dataset, cfg: TrainConfig) -> tuple[nn.Model, list[EpochMetrics]]:
    """Minibatch SGD with momentum on the mean cross-entropy.

    Deterministic for a given ``cfg.seed``: the data order is the only random
    element and comes from a generator seeded with it.
    """
    rng = np.random.default_rng(cfg.seed)
    params = nn.parameters(model)
    velocity = [np.zeros_like(p) for p in params]
    metrics = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(data))
        total_loss = 0.0
        correct = 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads, logits, _ = nn.loss_and_grads(model, data.images[idx], data.labels[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became {loss} in epoch {epoch} at sample {start}; lower the learning rate")
            for p, v, g in zip(params, velocity, grads):
                v *= cfg.momentum
                v += g
                p -= cfg.lr * v
            model = nn.with_parameters(model, params)
            total_loss += loss * len(idx)
            correct += int(np.sum(np.argmax(logits, axis=1) == data.labels[idx]))
        metrics.append(EpochMetrics(epoch + 1, total_loss / len(data), correct / len(data)))
        log.info("epoch %d: loss %.4f, train accuracy %.4f", epoch + 1, metrics[-1].loss, metrics[-1].accuracy)
    return model, metrics


# -- evaluation -----------------------------------------------------------------

@dataclass
class SweepRow:
    experiment: str
    method: str
    resize: str
    kernel_size: int | str
    modes: int | str
    resolution: int
    accuracy: float
    mean_loss: float
    seed: int


def resize_images(images: np.ndarray, n: int, method: str) -> np.ndarray:
    if method == "none":
        if images.shape[-1] != n:
            raise ValueError(f"resize=none needs the native resolution {images.shape[-1]}, got {n}")
        return images
    if method == "trig":
        return trig_resample(images, n)
    if method == "bilinear":
        return bilinear_resample(images, n)
    raise ValueError(f"unknown resize method {method!r}; expected one of {RESIZE_METHODS}")


def predict(model: nn.Model, images: np.ndarray, batch_size: int = 250) -> np.ndarray:
    out = [nn.model_forward(model, images[i:i + batch_size]) for i in range(0, len(images), batch_size)]
    return np.concatenate(out) if out else np.zeros((0, model.n_classes))


def model_for(model: nn.Model, impl: str) -> nn.Model:
    """The network that ``impl`` runs: spatial kernels for cnn, spectral for fno."""
    kind = nn.model_kind(model)
    if impl in ("cnn", "trig-first"):
        if kind != "spatial":
            raise ValueError(f"implementation {impl!r} needs a spatial-kernel model, got {kind}")
        return model
    if impl == "fno":
        return model if kind == "spectral" else nn.convert_model(model, "spectral")
    raise ValueError(f"unknown implementation {impl!r}; expected one of {IMPLEMENTATIONS}")


def _kernel_label(model: nn.Model) -> tuple[int | str, int | str]:
    k = model.layers[0].kernel if model.layers else None
    if k is None:
        return "", ""
    return (k.m, "") if isinstance(k, SpatialKernel) else ("", k.m)


def evaluate(model: nn.Model, data: Dataset, resolution: int, resize: str = "none", impl: str = "cnn",
             experiment: str = "eval", seed: int = 0, logits_out: list | None = None) -> SweepRow:
    """Accuracy and mean loss on ``data`` resized from its native grid to ``resolution``."""
    net = model_for(model, impl)
    images = resize_images(data.images, resolution, resize)
    if impl == "trig-first":
        images = trig_resample(images, model.train_n)
    logits = predict(net, images)
    if logits_out is not None:
        logits_out.append(logits)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    losses = log_norm - shifted[np.arange(len(data)), data.labels]
    correct = int(np.sum(np.argmax(logits, axis=1) == data.labels))
    ks, modes = _kernel_label(net)
    return SweepRow(experiment, impl, resize, ks, modes, resolution, correct / len(data),
                    float(losses.mean()), seed)


def sweep_resolution(model: nn.Model, data: Dataset, resolutions: Sequence[int],
                     resizes: Sequence[str] = ("trig", "bilinear"),
                     impls: Sequence[str] = IMPLEMENTATIONS, seed: int = 0) -> list[SweepRow]:
    rows = []
    for resize in resizes:
        for impl in impls:
            for n in resolutions:
                rows.append(evaluate(model, data, n, resize, impl, "resolution", seed))
                log.info("%s/%s at %d: %.4f", resize, impl, n, rows[-1].accuracy)
    return rows


def sweep_kernel_size(train_data: Dataset, test_data: Dataset, kernel_sizes: Sequence[int],
                      mode_counts: Sequence[int], cfg: TrainConfig, train_fno: bool = True,
                      fno_modes: Sequence[int] | None = None, channels=(8, 16), pool_size: int = 4,
                      activation: str = "gelu") -> list[SweepRow]:
    """Train one CNN per kernel size, convert it to FNOs with each mode count.

    With ``train_fno`` an FNO is also trained directly for each of
    ``fno_modes`` (default: ``mode_counts``).  All evaluation happens at the
    native resolution.
    """
    n = train_data.native_n
    rows = []

    def build(kind, size):
        return nn.init_model(kind, channels, size, train_data.images.shape[1], train_data.n_classes,
                             pool_size, activation, seed=cfg.seed, train_n=n)

    for ks in kernel_sizes:
        cnn, _ = train(build("spatial", ks), train_data, cfg)
        rows.append(evaluate(cnn, test_data, n, "none", "cnn", "kernel", cfg.seed))
        for modes in mode_counts:
            fno = nn.convert_model(cnn, "spectral", n=n, modes=modes)
            row = evaluate(fno, test_data, n, "none", "fno", "kernel", cfg.seed)
            row.method, row.kernel_size = "converted-fno", ks
            rows.append(row)
            log.info("kernel %d converted to %d modes: %.4f", ks, modes, row.accuracy)
    if train_fno:
        for modes in (mode_counts if fno_modes is None else fno_modes):
            fno, _ = train(build("spectral", modes), train_data, cfg)
            row = evaluate(fno, test_data, n, "none", "fno", "kernel", cfg.seed)
            row.method = "trained-fno"
            rows.append(row)
            log.info("trained FNO with %d modes: %.4f", modes, row.accuracy)
    return rows


# -- CSV --------------------------------------------------------------------------

def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows: Iterable[SweepRow], path: str | Path | None = None, config: dict | None = None) -> str:
    """Serialize rows; ``config`` is echoed as leading ``# key=value`` comment lines."""
    buf = io.StringIO()
    for key, value in (config or {}).items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for row in rows:
        d = asdict(row)
        writer.writerow([_format(d[k]) for k in CSV_FIELDS])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(path: str | Path) -> list[SweepRow]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    out = []
    for rec in csv.DictReader(lines):
        out.append(SweepRow(
            rec["experiment"], rec["method"], rec["resize"],
            int(rec["kernel_size"]) if rec["kernel_size"] else "",
            int(rec["modes"]) if rec["modes"] else "",
            int(rec["resolution"]), float(rec["accuracy"]), float(rec["mean_loss"]), int(rec["seed"])))
    return out


def write_metrics_csv(metrics: Sequence[EpochMetrics], path: str | Path | None = None,
                      config: dict | None = None) -> str:
    buf = io.StringIO()
    for key, value in (config or {}).items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    names = [f.name for f in fields(EpochMetrics)]
    writer.writerow(names)
    for m in metrics:
        writer.writerow([_format(getattr(m, k)) for k in names])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
