#!/usr/bin/env python3
"""Regenerates tests/fixtures. Deterministic (fixed seed); the outputs are committed."""

import json
import pathlib
import struct

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"
rng = np.random.default_rng(20261016)


def dense(n_in, n_out, scale=1.0):
    w = rng.normal(0.0, scale / np.sqrt(n_in), size=(n_out, n_in))
    b = rng.normal(0.0, 0.1, size=n_out)
    return {"type": "affine", "weight": np.round(w, 6).tolist(), "bias": np.round(b, 6).tolist()}


def dump(name, obj):
    (OUT / name).write_text(json.dumps(obj, indent=1) + "\n")


def inputs(n, dim, lo=-1.0, hi=1.0):
    return np.round(rng.uniform(lo, hi, size=(n, dim)), 6).tolist()


def main():
    OUT.mkdir(parents=True, exist_ok=True)

    # F(x) = (x1, -x1) + (1, 0): margin 2 x1 + 1, robust radius 0.5 at the origin in every norm.
    dump("affine_margin.json", {"input_dim": 2, "layers": [
        {"type": "affine", "weight": [[1, 0], [-1, 0]], "bias": [1, 0]}]})
    dump("affine_inputs.json", [[0.0, 0.0]])

    # Hand-checked toy: on [-1,1]^2 the hidden pre-activations lie in [-2,2],
    # the ReLU relaxation is 0.5 z + 1 / 0 and the outputs are bounded by [0,3] x [0,2].
    dump("fnn_relu_2x2.json", {"input_dim": 2, "layers": [
        {"type": "affine", "weight": [[1, 1], [1, -1]], "bias": [0, 0]},
        {"type": "relu"},
        {"type": "affine", "weight": [[1, 1], [0, 1]], "bias": [0, 0]}]})

    dump("tanh_fnn.json", {"input_dim": 4, "layers": [
        dense(4, 8, 2.0), {"type": "tanh"}, dense(8, 8, 2.0), {"type": "tanh"}, dense(8, 3, 2.0)]})
    dump("arctan_fnn.json", {"input_dim": 4, "layers": [
        dense(4, 6, 2.0), {"type": "arctan"}, dense(6, 3, 2.0)]})
    dump("relu_pool.json", {"input_dim": 4, "layers": [
        dense(4, 8, 2.0), {"type": "relu"},
        {"type": "maxpool", "windows": [[0, 1], [2, 3], [4, 5], [6, 7]]},
        dense(4, 3, 2.0)]})
    for name, dim in [("tanh", 4), ("arctan", 4), ("relu_pool", 4)]:
        dump(f"{name}_inputs.json", inputs(10, dim))

    # 1x6x6 -> conv 2x3x3 -> 2x4x4 -> batchnorm -> sigmoid -> maxpool 2x2 -> 2x2x2 -> 3 classes.
    kernel = np.round(rng.normal(0.0, 1.0, size=(2, 1, 3, 3)), 6)
    dump("sigmoid_cnn.json", {"input_dim": 36, "layers": [
        {"type": "conv2d", "input_shape": [1, 6, 6], "kernel": kernel.tolist(),
         "bias": np.round(rng.normal(0.0, 0.1, size=2), 6).tolist(), "stride": 1, "padding": 0},
        {"type": "batchnorm", "mean": [0.5, -0.2], "variance": [2.0, 1.5],
         "scale": [1.2, 0.8], "shift": [0.1, -0.1], "epsilon": 1e-5},
        {"type": "sigmoid"},
        {"type": "maxpool", "input_shape": [2, 4, 4], "size": 2, "stride": 2},
        dense(8, 3, 8.0)]})
    images = rng.integers(0, 256, size=(10, 6, 6), dtype=np.uint8)
    with open(OUT / "sigmoid_cnn_images.idx", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, 10, 6, 6))
        f.write(images.tobytes())
    with open(OUT / "sigmoid_cnn_labels.idx", "wb") as f:
        f.write(struct.pack(">II", 0x801, 10))
        f.write(bytes(rng.integers(0, 3, size=10, dtype=np.uint8)))
    with open(OUT / "sigmoid_cnn_inputs.csv", "w") as f:
        f.write(",".join(f"p{i}" for i in range(36)) + "\n")
        for img in images:
            f.write(",".join(repr(float(v) / 255.0) for v in img.reshape(-1)) + "\n")

    # Zero weights with a biased logit: the label never changes.
    dump("constant_classifier.json", {"input_dim": 3, "layers": [
        {"type": "affine", "weight": [[0, 0, 0], [0, 0, 0]], "bias": [1, 0]}]})
    dump("constant_inputs.json", inputs(3, 3))


if __name__ == "__main__":
    main()
