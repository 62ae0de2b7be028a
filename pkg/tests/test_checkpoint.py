import numpy as np
import pytest

from fnoconv import checkpoint, nn


def models():
    return [
        nn.init_model("spatial", (3, 4), 5, seed=1),
        nn.init_model("spectral", (2, 3), 4, in_channels=2, n_classes=5, pool_size=2, residual=True, seed=2,
                      train_n=8, downsample_points=(0,)),
    ]


@pytest.mark.parametrize("model", models(), ids=["spatial", "spectral-residual"])
def test_round_trip_exact(model, tmp_path):
    path = tmp_path / "m.ckpt"
    checkpoint.save(model, path)
    back = checkpoint.load(path)
    for a, b in zip(nn.parameters(model), nn.parameters(back)):
        np.testing.assert_array_equal(a, b)
    assert back.pool_size == model.pool_size
    assert back.train_n == model.train_n
    assert back.downsample_points == model.downsample_points
    assert [layer.activation for layer in back.layers] == [layer.activation for layer in model.layers]
    assert checkpoint.dumps(back) == path.read_text()


def test_header_lines():
    text = checkpoint.dumps(models()[1])
    lines = text.splitlines()
    assert lines[0] == checkpoint.MAGIC
    assert "layer 0 kind=spectral m=4 cin=2 cout=2 act=gelu" in lines
    assert lines[-1].startswith("fnv1a64 ")
    # complex values are written as re,im pairs with 17 significant digits
    first_row = lines[lines.index("layer 0 kind=spectral m=4 cin=2 cout=2 act=gelu") + 1]
    assert all("," in tok for tok in first_row.split())


def test_fnv1a_reference_values():
    # published FNV-1a 64-bit test vectors
    assert checkpoint.fnv1a64(b"") == 0xCBF29CE484222325
    assert checkpoint.fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert checkpoint.fnv1a64(b"foobar") == 0x85944171F73967E8


def test_checksum_detects_edits():
    text = checkpoint.dumps(models()[0])
    lines = text.splitlines()
    idx = next(i for i, ln in enumerate(lines) if ln.startswith("layer 0")) + 1
    tokens = lines[idx].split()
    tokens[0] = repr(float(tokens[0]) + 1e-9)
    lines[idx] = " ".join(tokens)
    with pytest.raises(checkpoint.CheckpointError, match="checksum"):
        checkpoint.loads("\n".join(lines) + "\n")


@pytest.mark.parametrize("mangle", [
    lambda t: t.replace(checkpoint.MAGIC, "something else"),
    lambda t: t.rsplit("fnv1a64", 1)[0],
    lambda t: t.replace("pool=", "pol="),
    lambda t: "\n".join(t.splitlines()[:5]),
])
def test_malformed(mangle):
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(mangle(checkpoint.dumps(models()[0])))
