#!/usr/bin/env python3
"""Populate data/ with the small benchmark KGs shipped inside the PyKEEN wheel.

Nations, Kinships and UMLS are bundled with PyKEEN; the other datasets used by
the acceptance suite (Countries, CoDExSmall, FB15k-237) must be placed under
data/<name>/ by hand, each with a manifest.toml listing its split files.
"""
import pathlib
import subprocess
import sys
import tempfile
import zipfile

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
BUNDLED = ["nations", "kinships", "umls"]
MANIFEST = """name = "{name}"
format = "tsv"

[[files]]
path = "train.txt"
split = "train"

[[files]]
path = "valid.txt"
split = "valid"

[[files]]
path = "test.txt"
split = "test"
"""


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "pykeen==1.11.1", "--no-deps", "-d", tmp],
            check=True,
        )
        wheel = next(pathlib.Path(tmp).glob("pykeen-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            for name in BUNDLED:
                out = DATA / name
                out.mkdir(parents=True, exist_ok=True)
                for split in ("train", "valid", "test"):
                    member = f"pykeen/datasets/{name}/{split}.txt"
                    (out / f"{split}.txt").write_bytes(zf.read(member))
                (out / "manifest.toml").write_text(MANIFEST.format(name=name))
                print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
