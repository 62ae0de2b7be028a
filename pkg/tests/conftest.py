import numpy as np
import pytest

from fnoconv.experiments import FASHION_FILES, write_idx


def blob_images(rng, count, n=28, noise=0.15):
    """Ten classes told apart by where a Gaussian blob sits; uint8 pixels."""
    labels = rng.integers(0, 10, count)
    x = np.arange(n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    images = np.empty((count, n, n), dtype=np.uint8)
    for i, c in enumerate(labels):
        cx, cy = n / 4 + (n / 2) * (c % 2), n / 7 + (n / 6) * (c // 2)
        blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * (n / 9) ** 2))
        images[i] = np.rint(np.clip(blob + noise * rng.random((n, n)), 0, 1) * 255)
    return images, labels


def write_split(directory, split, images, labels):
    img_name, lbl_name = FASHION_FILES[split]
    write_idx(images, labels, directory / img_name, directory / lbl_name)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def blob_dir(tmp_path_factory):
    """IDX train/test splits of the blob data in the FashionMNIST file layout."""
    d = tmp_path_factory.mktemp("blobs")
    gen = np.random.default_rng(99)
    write_split(d, "train", *blob_images(gen, 400))
    write_split(d, "test", *blob_images(gen, 120))
    return d


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    """Remember a criterion outcome; all of them are repeated in the terminal summary."""
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
