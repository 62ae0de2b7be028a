import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fnoconv import checkpoint, cli, experiments as ex, nn, pgm

FAST = ["--epochs", "1", "--batch-size", "32", "--train-subset", "96", "--channels", "3", "--pool-size", "2"]


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def trained(blob_dir, tmp_path_factory):
    d = tmp_path_factory.mktemp("trained")
    out = d / "m.ckpt"
    assert run("train", "--data-dir", blob_dir, "--out", out, *FAST) == 0
    return out


def test_train_writes_checkpoint_and_metrics(trained):
    model = checkpoint.load(trained)
    assert nn.model_kind(model) == "spatial" and model.layers[0].kernel.m == 5
    lines = (trained.parent / "m.ckpt.metrics.csv").read_text().splitlines()
    assert "# epochs=1" in lines and "# channels=3" in lines
    assert lines[-2] == "epoch,loss,accuracy"


def test_train_is_deterministic(blob_dir, tmp_path, trained):
    again = tmp_path / "again.ckpt"
    assert run("train", "--data-dir", blob_dir, "--out", again, *FAST) == 0
    assert again.read_bytes() == trained.read_bytes()


def test_train_zero_epochs_is_initialization(blob_dir, tmp_path):
    out = tmp_path / "init.ckpt"
    assert run("train", "--data-dir", blob_dir, "--out", out, *FAST, "--epochs", "0") == 0
    fresh = nn.init_model("spatial", (3,), 5, pool_size=2, seed=42, train_n=28)
    assert out.read_text() == checkpoint.dumps(fresh)


def test_config_precedence(blob_dir, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# comment\nepochs = 0\nbatch-size=7\nchannels=2,3\n")
    cfg = cli.resolve("train", {"batch_size": 9}, cli.read_config(conf))
    assert cfg["epochs"] == 0 and cfg["batch_size"] == 9 and cfg["channels"] == [2, 3]
    assert cfg["lr"] == 0.05
    out = tmp_path / "c.ckpt"
    assert run("train", "--config", conf, "--data-dir", blob_dir, "--out", out, "--channels", "4") == 0
    assert checkpoint.load(out).layers[0].kernel.c_out == 4
    assert "# batch_size=7" in (tmp_path / "c.ckpt.metrics.csv").read_text()


def test_config_errors(tmp_path, capsys):
    conf = tmp_path / "bad.conf"
    conf.write_text("epochz=3\n")
    assert run("train", "--config", conf) == 1
    assert "unknown config keys" in capsys.readouterr().err
    conf.write_text("just words\n")
    assert run("train", "--config", conf) == 1
    conf.write_text("activation=tanh\n")
    assert run("train", "--config", conf) == 1
    assert "activation must be one of" in capsys.readouterr().err


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        run("train", "--no-such-flag")
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run("eval", "--impl", "cnnn")
    assert exc.value.code == 2


def test_missing_data_is_an_error(tmp_path, capsys):
    assert run("train", "--data-dir", tmp_path / "nowhere") == 1
    assert "missing" in capsys.readouterr().err


def test_corrupt_checkpoint(tmp_path, trained, capsys):
    bad = tmp_path / "bad.ckpt"
    bad.write_text(trained.read_text().replace("bias", "bais", 1))
    assert run("eval", "--model", bad) == 1
    assert "error" in capsys.readouterr().err


def test_convert_round_trip_odd(tmp_path, trained):
    fno, back = tmp_path / "f.ckpt", tmp_path / "b.ckpt"
    assert run("convert", "--model", trained, "--to", "fno", "--out", fno, "--n", 29) == 0
    assert nn.model_kind(checkpoint.load(fno)) == "spectral"
    assert run("convert", "--model", fno, "--to", "cnn", "--n", 29, "--kernel-size", 5, "--out", back) == 0
    a, b = checkpoint.load(trained), checkpoint.load(back)
    for x, y in zip(nn.parameters(a), nn.parameters(b)):
        np.testing.assert_allclose(x, y, atol=1e-12)


def test_convert_modes_and_even_rejection(tmp_path, trained, capsys):
    full, small = tmp_path / "full.ckpt", tmp_path / "small.ckpt"
    assert run("convert", "--model", trained, "--out", full) == 0
    assert run("convert", "--model", trained, "--modes", 3, "--out", small) == 0
    assert checkpoint.load(full).layers[0].kernel.m == 28
    assert checkpoint.load(small).layers[0].kernel.m == 3
    assert small.stat().st_size < full.stat().st_size
    assert run("convert", "--model", full, "--to", "cnn", "--out", tmp_path / "x.ckpt") == 1
    assert "--n 29" in capsys.readouterr().err


def test_eval_matches_single_resolution_sweep(blob_dir, tmp_path, trained, capsys):
    ev, sw = tmp_path / "e.csv", tmp_path / "s.csv"
    common = ["--model", trained, "--data-dir", blob_dir, "--test-subset", 50]
    assert run("eval", *common, "--resolution", 20, "--resize", "trig", "--impl", "fno", "--out", ev) == 0
    assert "accuracy" in capsys.readouterr().out
    assert run("sweep-resolution", *common, "--resolutions", 20, "--resizes", "trig", "--impls", "fno",
               "--out", sw) == 0
    a, b = ex.read_csv(ev)[0], ex.read_csv(sw)[0]
    assert (a.accuracy, a.mean_loss) == (b.accuracy, b.mean_loss)


def test_sweep_resolution_csv_and_plot(blob_dir, tmp_path, trained):
    out, svg = tmp_path / "r.csv", tmp_path / "r.svg"
    assert run("sweep-resolution", "--model", trained, "--data-dir", blob_dir, "--test-subset", 30,
               "--resolutions", "14,28", "--out", out, "--plot", svg) == 0
    rows = ex.read_csv(out)
    assert len(rows) == 2 * 2 * 3
    assert "# resolutions=14,28" in out.read_text()
    root = ET.parse(svg).getroot()
    assert root.tag.endswith("svg")
    assert len(root.findall(".//{http://www.w3.org/2000/svg}polyline")) == 6


def test_sweep_resolution_rejects_unknown_tag(blob_dir, trained, capsys):
    assert run("sweep-resolution", "--model", trained, "--data-dir", blob_dir, "--impls", "cnn,fft") == 1
    assert "unknown method tag" in capsys.readouterr().err


def test_sweep_kernel(blob_dir, tmp_path):
    out = tmp_path / "k.csv"
    assert run("sweep-kernel", "--data-dir", blob_dir, *FAST, "--test-subset", 30, "--kernel-sizes", 3,
               "--mode-counts", "28,1", "--train-fno", "false", "--out", out) == 0
    rows = ex.read_csv(out)
    assert [r.method for r in rows] == ["cnn", "converted-fno", "converted-fno"]
    assert rows[0].accuracy == rows[1].accuracy


# -- resize ---------------------------------------------------------------------

def write_image(path, pixels):
    pgm.write_pgm(path, np.asarray(pixels, dtype=np.uint8))
    return path


def test_resize_same_size_is_identity(tmp_path, rng):
    src = write_image(tmp_path / "a.pgm", rng.integers(0, 256, (9, 9)))
    for method in ("trig", "bilinear"):
        out = tmp_path / f"{method}.pgm"
        assert run("resize", "--input", src, "--output", out, "--to", 9, "--method", method) == 0
        np.testing.assert_array_equal(pgm.read_pgm(out), pgm.read_pgm(src))


def test_resize_constant_stays_constant(tmp_path):
    src = write_image(tmp_path / "c.pgm", np.full((8, 8), 77))
    for n in (5, 8, 13):
        assert run("resize", "--input", src, "--output", tmp_path / "o.pgm", "--to", n) == 0
        out = pgm.read_pgm(tmp_path / "o.pgm")
        assert out.shape == (n, n) and np.all(out == 77)


def test_resize_up_and_down(tmp_path, blob_dir):
    # mid-range pixels keep the 56-point interpolant inside [0, 255], so only rounding acts
    pixels = np.rint(40 + 0.6 * ex.load_split(blob_dir, "test").images[0, 0] * 255).astype(np.uint8)
    src = write_image(tmp_path / "s.pgm", pixels)
    assert run("resize", "--input", src, "--output", tmp_path / "up.pgm", "--to", 56) == 0
    assert run("resize", "--input", tmp_path / "up.pgm", "--output", tmp_path / "down.pgm", "--to", 28) == 0
    up = pgm.read_pgm(tmp_path / "up.pgm")
    np.testing.assert_array_equal(up[::2, ::2], pixels)
    diff = np.abs(pgm.read_pgm(tmp_path / "down.pgm").astype(int) - pixels.astype(int))
    assert diff.max() <= 1


def test_resize_clamps_overshoot(tmp_path):
    step = np.zeros((28, 28), dtype=np.uint8)
    step[:, 14:] = 255
    src = write_image(tmp_path / "step.pgm", step)
    assert run("resize", "--input", src, "--output", tmp_path / "up.pgm", "--to", 56) == 0
    up = pgm.read_pgm(tmp_path / "up.pgm")
    # ringing is clamped, so both extremes are hit and nothing wraps around
    assert up.min() == 0 and up.max() == 255
    np.testing.assert_array_equal(up[::2, ::2], step)


def test_resize_errors(tmp_path, capsys):
    (tmp_path / "p2.pgm").write_text("P2\n2 2\n255\n0 0 0 0\n")
    assert run("resize", "--input", tmp_path / "p2.pgm", "--output", tmp_path / "o.pgm", "--to", 4) == 1
    (tmp_path / "bad.pgm").write_bytes(b"P5\n2 x\n255\n" + bytes(4))
    assert run("resize", "--input", tmp_path / "bad.pgm", "--output", tmp_path / "o.pgm", "--to", 4) == 1
    (tmp_path / "short.pgm").write_bytes(b"P5\n2 2\n255\n" + bytes(3))
    assert run("resize", "--input", tmp_path / "short.pgm", "--output", tmp_path / "o.pgm", "--to", 4) == 1
    write_image(tmp_path / "rect.pgm", np.zeros((2, 3)))
    assert run("resize", "--input", tmp_path / "rect.pgm", "--output", tmp_path / "o.pgm", "--to", 4) == 1
    assert run("resize", "--input", tmp_path / "rect.pgm", "--to", 4) == 1
    assert "--output is required" in capsys.readouterr().err
    assert not (tmp_path / "o.pgm").exists()


def test_pgm_round_trip_with_comments(tmp_path):
    raw = b"P5\n# made by hand\n3 2\n# another\n255\n" + bytes(range(6))
    img = pgm.parse_pgm(raw)
    assert img.shape == (2, 3) and img.tolist() == [[0, 1, 2], [3, 4, 5]]
    assert pgm.parse_pgm(pgm.format_pgm(img)).tolist() == img.tolist()


def test_selftest_quick(capsys):
    assert run("selftest", "--quick") == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out
