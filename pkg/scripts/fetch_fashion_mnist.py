"""Download the FashionMNIST IDX files into a directory (default data/fashion-mnist).

    python3 scripts/fetch_fashion_mnist.py [target_dir] [--base-url URL]

The files are kept gzip-compressed; fnoconv reads ``.gz`` directly.
Point ``FNOCONV_DATA_DIR`` at the target if it is not the default.
"""

import argparse
import hashlib
import sys
import urllib.request
from pathlib import Path

BASE_URL = "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/"
FILES = {
    "train-images-idx3-ubyte.gz": "8d4fb7e6c68d591d4c3dfef9ec88bf0d",
    "train-labels-idx1-ubyte.gz": "25c81989df183df01b3e8a0aad5dffbe",
    "t10k-images-idx3-ubyte.gz": "bef4ecab320f06d8554ea6380940ec79",
    "t10k-labels-idx1-ubyte.gz": "bb300cfdad3c16e7a12a480ee83cd310",
}


def md5(path):
    return hashlib.md5(path.read_bytes()).hexdigest()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("target", nargs="?", default="data/fashion-mnist")
    parser.add_argument("--base-url", default=BASE_URL)
    args = parser.parse_args()
    target = Path(args.target)
    target.mkdir(parents=True, exist_ok=True)
    for name, digest in FILES.items():
        path = target / name
        if path.exists() and md5(path) == digest:
            print(f"have {path}")
            continue
        print(f"fetching {args.base_url}{name}")
        tmp = path.with_suffix(".part")
        urllib.request.urlretrieve(args.base_url + name, tmp)
        if md5(tmp) != digest:
            tmp.unlink()
            sys.exit(f"checksum mismatch for {name}")
        tmp.replace(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
