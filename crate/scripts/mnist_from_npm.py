"""Write 10,000 MNIST digits from the npm `mnist` package as IDX files.

Usage: python3 mnist_from_npm.py <package>/src/digits <out_dir>
"""
import json
import random
import struct
import sys
from pathlib import Path

SIDE = 28
COUNT = 10_000
SEED = 20170101


def main(src: Path, out: Path) -> None:
    samples = []
    for label in range(10):
        flat = json.loads((src / f"{label}.json").read_text())["data"]
        size = SIDE * SIDE
        for i in range(len(flat) // size):
            pixels = bytes(round(v * 255) for v in flat[i * size:(i + 1) * size])
            samples.append((pixels, label))
    random.Random(SEED).shuffle(samples)
    samples = samples[:COUNT]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "digits-10k-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(samples), SIDE, SIDE))
        for pixels, _ in samples:
            f.write(pixels)
    with open(out / "digits-10k-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(samples)))
        f.write(bytes(label for _, label in samples))


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
