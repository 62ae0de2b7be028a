"""Command line: training, evaluation, conversion, sweeps, image resizing, self-test.

Every option can also come from a ``key=value`` file given with ``--config``
(keys use the option names with dashes or underscores); flags on the command
line win.  The resolved configuration is logged and written as ``#`` comment
lines at the top of every CSV.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from fnoconv import checkpoint, experiments, nn, pgm, plot, selftest
from fnoconv.resample import bilinear_resample, trig_resample

log = logging.getLogger("fnoconv")

DEFAULT_DATA_DIR = os.environ.get("FNOCONV_DATA_DIR", "data/fashion-mnist")


class ConfigError(ValueError):
    pass


def int_list(text: str) -> list[int]:
    return [int(t) for t in str(text).replace(" ", "").split(",") if t]


def str_list(text: str) -> list[str]:
    return [t for t in str(text).replace(" ", "").split(",") if t]


def boolean(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Opt:
    name: str
    type: Callable[[str], Any]
    default: Any
    help: str
    choices: tuple | None = None

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


_DATA = Opt("data-dir", str, DEFAULT_DATA_DIR, "directory holding the IDX files")
_SEED = Opt("seed", int, 42, "random seed")
_TEST_SUBSET = Opt("test-subset", int, 1000, "seeded test subset size (0 = all)")
_TRAINING = [
    _DATA, _SEED,
    Opt("epochs", int, 5, "training epochs"),
    Opt("batch-size", int, 64, "minibatch size"),
    Opt("lr", float, 0.05, "learning rate"),
    Opt("momentum", float, 0.9, "SGD momentum"),
    Opt("train-subset", int, 6000, "seeded training subset size (0 = all)"),
    Opt("channels", int_list, [8, 16], "channels per layer, comma separated"),
    Opt("pool-size", int, 4, "adaptive pooling output size"),
    Opt("activation", str, "gelu", "activation function", nn.ACTIVATIONS),
]

COMMANDS: dict[str, list[Opt]] = {
    "train": _TRAINING + [
        Opt("kind", str, "spatial", "kernel parametrization", ("spatial", "spectral")),
        Opt("kernel-size", int, 5, "spatial kernel size"),
        Opt("modes", int, 5, "spectral modes per dimension (kind=spectral)"),
        Opt("residual", boolean, False, "add the pointwise channel-mixing term W"),
        Opt("out", str, "model.ckpt", "checkpoint to write"),
        Opt("metrics", str, "", "per-epoch CSV (default: <out>.metrics.csv)"),
    ],
    "eval": [
        Opt("model", str, "model.ckpt", "checkpoint"), _DATA, _SEED, _TEST_SUBSET,
        Opt("resolution", int, 28, "test resolution"),
        Opt("resize", str, "none", "test resizing", experiments.RESIZE_METHODS),
        Opt("impl", str, "cnn", "implementation", experiments.IMPLEMENTATIONS),
        Opt("out", str, "eval.csv", "CSV to write"),
    ],
    "convert": [
        Opt("model", str, "model.ckpt", "source checkpoint"),
        Opt("to", str, "fno", "target parametrization", ("fno", "cnn")),
        Opt("n", int, 0, "grid size the conversion is exact on (default: training resolution)"),
        Opt("modes", int, 0, "truncate spectral kernels to this many modes (to=fno)"),
        Opt("kernel-size", int, 0, "crop spatial kernels to this size (to=cnn)"),
        Opt("out", str, "converted.ckpt", "checkpoint to write"),
    ],
    "sweep-resolution": [
        Opt("model", str, "model.ckpt", "checkpoint"), _DATA, _SEED, _TEST_SUBSET,
        Opt("resolutions", int_list, [14, 20, 28, 40, 56], "test resolutions"),
        Opt("resizes", str_list, ["trig", "bilinear"], "test resizing methods"),
        Opt("impls", str_list, list(experiments.IMPLEMENTATIONS), "implementations"),
        Opt("out", str, "sweep_resolution.csv", "CSV to write"),
        Opt("plot", str, "", "optional SVG chart"),
    ],
    "sweep-kernel": _TRAINING + [
        _TEST_SUBSET,
        Opt("kernel-sizes", int_list, [3, 5, 7, 9], "CNN kernel sizes"),
        Opt("mode-counts", int_list, [1, 3, 5, 9, 15, 28], "mode counts for converted FNOs"),
        Opt("fno-modes", int_list, [3], "mode counts for directly trained FNOs"),
        Opt("train-fno", boolean, True, "also train FNOs directly"),
        Opt("out", str, "sweep_kernel.csv", "CSV to write"),
        Opt("plot", str, "", "optional SVG chart"),
    ],
    "resize": [
        Opt("input", str, "", "input PGM (P5)"),
        Opt("output", str, "", "output PGM"),
        Opt("to", int, 0, "target size"),
        Opt("method", str, "trig", "interpolation", ("trig", "bilinear")),
    ],
    "selftest": [
        Opt("quick", boolean, False, "smaller sweeps"),
    ],
}


# -- configuration -----------------------------------------------------------------

def read_config(path: str | Path) -> dict[str, str]:
    out = {}
    for num, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _convert(opt: Opt, value: Any) -> Any:
    if not isinstance(value, str):
        return value
    try:
        return opt.type(value)
    except ValueError as exc:
        raise ConfigError(f"invalid value for {opt.name}: {exc}") from None


def resolve(command: str, given: dict[str, Any], config: dict[str, str] | None = None) -> dict[str, Any]:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    opts = {o.dest: o for o in COMMANDS[command]}
    config = config or {}
    unknown = sorted(set(config) - set(opts))
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
    resolved = {}
    for dest, opt in opts.items():
        value = given.get(dest, config.get(dest, opt.default))
        value = _convert(opt, value)
        values = value if isinstance(value, list) else [value]
        if opt.choices is not None and any(v not in opt.choices for v in values):
            raise ConfigError(f"{opt.name} must be one of {', '.join(opt.choices)}, got {value}")
        resolved[dest] = value
    return resolved


def echo(cfg: dict[str, Any]) -> dict[str, str]:
    """Config values as they would be written in a config file."""
    return {k: ",".join(map(str, v)) if isinstance(v, list) else str(v) for k, v in cfg.items()}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fnoconv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name, argument_default=argparse.SUPPRESS, help=HANDLERS[name].__doc__)
        p.add_argument("--config", help="key=value file; command-line flags take precedence")
        for opt in opts:
            # booleans work as bare switches or with an explicit value
            extra = {"nargs": "?", "const": True} if opt.type is boolean else {}
            if opt.choices is not None and opt.type is str:
                extra["choices"] = opt.choices
            p.add_argument(f"--{opt.name}", type=opt.type, dest=opt.dest,
                           help=f"{opt.help} (default: {opt.default})", **extra)
    return parser


# -- helpers ---------------------------------------------------------------------

def _atomic_write(path: str | Path, data: str | bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _subset_size(n: int) -> int | None:
    return None if n <= 0 else n


def _train_config(cfg: dict) -> experiments.TrainConfig:
    return experiments.TrainConfig(cfg["epochs"], cfg["batch_size"], cfg["lr"], cfg["momentum"], cfg["seed"],
                                   _subset_size(cfg["train_subset"]), _subset_size(cfg.get("test_subset", 0)))


def _load_data(cfg: dict, split: str, size_key: str) -> experiments.Dataset:
    data = experiments.load_split(cfg["data_dir"], split)
    return data.subset(_subset_size(cfg[size_key]), cfg["seed"])


def _save_model(model: nn.Model, path: str) -> None:
    _atomic_write(path, checkpoint.dumps(model))


def _plot_rows(rows: list[experiments.SweepRow], x_field: str, xlabel: str, title: str,
               key: Callable[[experiments.SweepRow], str]) -> str:
    series: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        x = getattr(r, x_field)
        if x == "":
            continue
        series.setdefault(key(r), []).append((float(x), r.accuracy))
    return plot.line_chart(series, xlabel, "accuracy", title)


# -- commands ----------------------------------------------------------------------

def cmd_train(cfg: dict) -> int:
    """Train a model and write a checkpoint plus per-epoch metrics."""
    data = _load_data(cfg, "train", "train_subset")
    size = cfg["kernel_size"] if cfg["kind"] == "spatial" else cfg["modes"]
    model = nn.init_model(cfg["kind"], tuple(cfg["channels"]), size, data.images.shape[1], data.n_classes,
                          cfg["pool_size"], cfg["activation"], cfg["residual"], cfg["seed"], data.native_n)
    model, metrics = experiments.train(model, data, _train_config(cfg))
    metrics_path = cfg["metrics"] or f"{cfg['out']}.metrics.csv"
    _save_model(model, cfg["out"])
    _atomic_write(metrics_path, experiments.write_metrics_csv(metrics, None, echo(cfg)))
    log.info("wrote %s and %s", cfg["out"], metrics_path)
    return 0


def cmd_eval(cfg: dict) -> int:
    """Evaluate a checkpoint at one resolution."""
    model = checkpoint.load(cfg["model"])
    data = _load_data(cfg, "test", "test_subset")
    row = experiments.evaluate(model, data, cfg["resolution"], cfg["resize"], cfg["impl"], "eval", cfg["seed"])
    _atomic_write(cfg["out"], experiments.write_csv([row], None, echo(cfg)))
    print(f"accuracy {row.accuracy:.4f}  mean loss {row.mean_loss:.4f}")
    return 0


def cmd_convert(cfg: dict) -> int:
    """Convert a checkpoint between spatial and spectral kernels."""
    model = checkpoint.load(cfg["model"])
    n = cfg["n"] or model.train_n
    if cfg["to"] == "fno":
        out = nn.convert_model(model, "spectral", n=n, modes=cfg["modes"] or None)
    else:
        if n % 2 == 0:
            raise ConfigError(f"fno -> cnn needs an odd grid size, got {n}; use --n {n + 1}")
        out = nn.convert_model(model, "spatial", n=n, kernel_size=cfg["kernel_size"] or None)
    _save_model(out, cfg["out"])
    sizes = sorted({layer.kernel.m for layer in out.layers})
    log.info("wrote %s (%s kernels of size %s)", cfg["out"], nn.model_kind(out), sizes)
    return 0


def cmd_sweep_resolution(cfg: dict) -> int:
    """Accuracy across test resolutions, resize methods and implementations."""
    model = checkpoint.load(cfg["model"])
    data = _load_data(cfg, "test", "test_subset")
    for impl in cfg["impls"]:
        if impl not in experiments.IMPLEMENTATIONS:
            raise ConfigError(f"unknown method tag {impl!r}; expected one of {experiments.IMPLEMENTATIONS}")
    for resize in cfg["resizes"]:
        if resize not in experiments.RESIZE_METHODS:
            raise ConfigError(f"unknown resize method {resize!r}; expected one of {experiments.RESIZE_METHODS}")
    rows = experiments.sweep_resolution(model, data, cfg["resolutions"], cfg["resizes"], cfg["impls"], cfg["seed"])
    _atomic_write(cfg["out"], experiments.write_csv(rows, None, echo(cfg)))
    if cfg["plot"]:
        _atomic_write(cfg["plot"], _plot_rows(rows, "resolution", "resolution", "accuracy vs test resolution",
                                              lambda r: f"{r.method} ({r.resize})"))
    return 0


def cmd_sweep_kernel(cfg: dict) -> int:
    """Train CNNs per kernel size, convert to FNOs with several mode counts."""
    train_data = _load_data(cfg, "train", "train_subset")
    test_data = _load_data(cfg, "test", "test_subset")
    rows = experiments.sweep_kernel_size(train_data, test_data, cfg["kernel_sizes"], cfg["mode_counts"],
                                         _train_config(cfg), cfg["train_fno"], cfg["fno_modes"],
                                         tuple(cfg["channels"]), cfg["pool_size"], cfg["activation"])
    _atomic_write(cfg["out"], experiments.write_csv(rows, None, echo(cfg)))
    if cfg["plot"]:
        def key(r):
            return r.method if r.method != "converted-fno" else f"fno from k={r.kernel_size}"
        _atomic_write(cfg["plot"], _plot_rows(rows, "modes", "modes", "converted and trained FNOs", key))
    return 0


def resize_pixels(pixels: np.ndarray, n: int, method: str) -> np.ndarray:
    """Resample a square uint8 image to ``n x n``; values are clamped and rounded."""
    if pixels.shape[0] != pixels.shape[1]:
        raise pgm.PgmError(f"only square images can be resized, got {pixels.shape[1]}x{pixels.shape[0]}")
    v = pixels.astype(float) / 255.0
    out = trig_resample(v, n) if method == "trig" else bilinear_resample(v, n)
    return np.clip(np.rint(out * 255.0), 0, 255).astype(np.uint8)


def cmd_resize(cfg: dict) -> int:
    """Resize a square binary PGM image."""
    for key in ("input", "output"):
        if not cfg[key]:
            raise ConfigError(f"--{key} is required")
    if cfg["to"] < 1:
        raise ConfigError("--to must be a positive size")
    pixels = pgm.read_pgm(cfg["input"])
    _atomic_write(cfg["output"], pgm.format_pgm(resize_pixels(pixels, cfg["to"], cfg["method"])))
    return 0


def cmd_selftest(cfg: dict) -> int:
    """Run the numerical invariant suites against their oracles."""
    checks = selftest.run_all(quick=cfg["quick"])
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


HANDLERS: dict[str, Callable[[dict], int]] = {
    "train": cmd_train,
    "eval": cmd_eval,
    "convert": cmd_convert,
    "sweep-resolution": cmd_sweep_resolution,
    "sweep-kernel": cmd_sweep_kernel,
    "resize": cmd_resize,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    args = vars(build_parser().parse_args(argv))
    logging.basicConfig(level=logging.DEBUG if args.pop("verbose") else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    command = args.pop("command")
    try:
        config = read_config(args.pop("config")) if "config" in args else {}
        cfg = resolve(command, args, config)
        log.info("%s config: %s", command, " ".join(f"{k}={v}" for k, v in echo(cfg).items()))
        return HANDLERS[command](cfg)
    except (ConfigError, OSError, ValueError, checkpoint.CheckpointError, experiments.TrainingDivergedError) as exc:
        print(f"fnoconv {command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
