#!/usr/bin/env python3
"""Build the tiny-CNN model, MNIST-subset dataset and golden fixtures.

The 5000-sample MNIST excerpt shipped inside the `mlxtend` wheel is split
per class into 400 training and 100 held-out images. The held-out 1000 form
the dataset fixture. The network is trained with quantization-aware training
on the ternary pixel codes, then the golden logits and accuracies are
computed with an independent float64 numpy reference.

Usage:
    pip download --no-deps -d /tmp/pd mlxtend
    python3 make_mnist_fixture.py --wheel /tmp/pd/mlxtend-*.whl --out ../
"""

import argparse
import glob
import gzip
import hashlib
import io
import json
import os
import zipfile

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

# Pixel front-end defaults; must match PixelConfig/VamConfig defaults.
V_RESET = 1.0
DISCHARGE_GAIN = 0.48
EXPOSURE = 1.0
V_REF_LOW = 0.16
V_REF_HIGH = 0.32
ACT_SCALE = 0.5
OUT1 = 8
OUT2 = 16


def load_mnist(wheel):
    z = zipfile.ZipFile(wheel)
    raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    a = np.loadtxt(io.BytesIO(raw), delimiter=",").astype(np.uint8)
    return a[:, :784].reshape(-1, 28, 28), a[:, 784]


def ternarize(img_u8):
    # Same floating-point operation order as the Rust pixel path.
    x = img_u8.astype(np.float64) / 255.0
    v_pd = V_RESET - (DISCHARGE_GAIN * EXPOSURE) * x
    v_pd = np.minimum(np.maximum(v_pd, 0.0), V_RESET)
    signal = V_RESET - v_pd
    return (signal > V_REF_LOW).astype(np.int64) + (signal > V_REF_HIGH).astype(np.int64)


def quantize(w, bits):
    levels = float(2 ** bits - 1)
    scale = np.max(np.abs(w)) / levels
    q = w / scale
    q = np.sign(q) * np.floor(np.abs(q) + 0.5)
    return q.astype(np.int64), scale


class FakeQuant(torch.autograd.Function):
    @staticmethod
    def forward(ctx, w, bits):
        levels = 2 ** bits - 1
        scale = w.abs().max() / levels
        q = w / scale
        q = torch.sign(q) * torch.floor(q.abs() + 0.5)
        return q * scale

    @staticmethod
    def backward(ctx, g):
        return g, None


class TinyCnn(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, OUT1, 3, padding=1)
        self.conv2 = nn.Conv2d(OUT1, OUT2, 3, padding=1)
        self.fc = nn.Linear(OUT2 * 7 * 7, 10)

    def forward(self, codes, bits):
        x = codes * ACT_SCALE
        w = FakeQuant.apply(self.conv1.weight, bits)
        x = F.conv2d(x, w, self.conv1.bias, padding=1)
        x = F.max_pool2d(F.relu(x), 2)
        x = F.max_pool2d(F.relu(self.conv2(x)), 2)
        return self.fc(x.flatten(1))


def conv2d_ref(x, w, b, pad):
    # x [C,H,W], w [O,C,K,K]
    c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.zeros((c, h + 2 * pad, wd + 2 * pad), dtype=x.dtype)
    xp[:, pad:pad + h, pad:pad + wd] = x
    oh, ow = h + 2 * pad - k + 1, wd + 2 * pad - k + 1
    out = np.zeros((o, oh, ow), dtype=np.result_type(x, w))
    for ky in range(k):
        for kx in range(k):
            patch = xp[:, ky:ky + oh, kx:kx + ow]
            out += np.einsum("oc,chw->ohw", w[:, :, ky, kx], patch)
    if b is not None:
        out = out + b[:, None, None]
    return out


def maxpool2(x):
    c, h, w = x.shape
    return x[:, : h // 2 * 2, : w // 2 * 2].reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def reference_logits(codes, params, bits):
    q, scale = quantize(params["conv1.weight"].astype(np.float64), bits)
    feat = conv2d_ref(codes[None].astype(np.int64), q, None, 1)
    x = feat.astype(np.float64) * (scale * ACT_SCALE) + params["conv1.bias"].astype(np.float64)[:, None, None]
    x = maxpool2(np.maximum(x, 0.0))
    x = conv2d_ref(x, params["conv2.weight"].astype(np.float64), params["conv2.bias"].astype(np.float64), 1)
    x = maxpool2(np.maximum(x, 0.0))
    x = x.reshape(-1)
    return params["fc.weight"].astype(np.float64) @ x + params["fc.bias"].astype(np.float64)


def write_container(path, kind, tensors, meta):
    os.makedirs(path, exist_ok=True)
    entries = []
    for name, (dtype, arr) in tensors.items():
        arr = np.ascontiguousarray(arr.astype(dtype).astype(np.dtype(dtype).newbyteorder("<")))
        blob = arr.tobytes()
        fname = name + ".bin"
        with open(os.path.join(path, fname), "wb") as f:
            f.write(blob)
        entries.append({
            "name": name,
            "dtype": {"float32": "f32", "float64": "f64", "uint8": "u8"}[np.dtype(dtype).name],
            "shape": list(arr.shape),
            "file": fname,
            "sha256": hashlib.sha256(blob).hexdigest(),
        })
    manifest = {"format": "optisense-fixture", "version": 1, "kind": kind, "tensors": entries, "meta": meta}
    with open(os.path.join(path, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wheel", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--epochs", type=int, default=30)
    args = ap.parse_args()

    images, labels = load_mnist(glob.glob(args.wheel)[0])
    train_idx, test_idx = [], []
    for c in range(10):
        idx = np.nonzero(labels == c)[0]
        train_idx.extend(idx[:400])
        test_idx.extend(idx[400:500])
    train_idx = np.array(train_idx)
    # interleave classes so the fixture is not sorted by label
    test_idx = np.array(test_idx).reshape(10, 100).T.reshape(-1)

    codes = np.stack([ternarize(im) for im in images])
    torch.manual_seed(0)
    np.random.seed(0)
    model = TinyCnn()
    opt = torch.optim.Adam(model.parameters(), lr=2e-3)
    xtr = torch.tensor(codes[train_idx][:, None], dtype=torch.float32)
    ytr = torch.tensor(labels[train_idx], dtype=torch.int64)
    for epoch in range(args.epochs):
        perm = torch.randperm(len(xtr))
        for i in range(0, len(xtr), 64):
            b = perm[i:i + 64]
            bits = int(np.random.randint(1, 5))
            loss = F.cross_entropy(model(xtr[b], bits), ytr[b])
            opt.zero_grad()
            loss.backward()
            opt.step()

    params = {k: v.detach().numpy().astype(np.float32) for k, v in model.state_dict().items()}

    test_codes = codes[test_idx]
    test_labels = labels[test_idx]
    accuracy = {}
    logits4 = None
    for bits in (1, 2, 3, 4):
        logits = np.stack([reference_logits(c, params, bits) for c in test_codes])
        accuracy[str(bits)] = int((logits.argmax(axis=1) == test_labels).sum())
        if bits == 4:
            logits4 = logits
        print(f"bits={bits} correct={accuracy[str(bits)]}/1000")

    model_meta = {
        "name": "tiny_cnn",
        "input": {"height": 28, "width": 28},
        "first_layer": {
            "weight": "conv1.weight", "bias": "conv1.bias", "kernel": 3, "stride": 1, "padding": 1,
            "in_channels": 1, "out_channels": OUT1, "bit_width": 4, "activation_scale": ACT_SCALE,
        },
        "layers": [
            {"kind": "relu"},
            {"kind": "max_pool", "size": 2, "stride": 2},
            {"kind": "conv2d", "weight": "conv2.weight", "bias": "conv2.bias", "stride": 1, "padding": 1},
            {"kind": "relu"},
            {"kind": "max_pool", "size": 2, "stride": 2},
            {"kind": "flatten"},
            {"kind": "linear", "weight": "fc.weight", "bias": "fc.bias"},
        ],
    }
    write_container(os.path.join(args.out, "tiny_cnn"), "model",
                    {k: ("float32", v) for k, v in params.items()}, model_meta)
    write_container(os.path.join(args.out, "mnist_subset"), "dataset",
                    {"images": ("uint8", images[test_idx]), "labels": ("uint8", test_labels)},
                    {"name": "mnist_subset", "source": "MNIST 5k excerpt, samples 400..500 of each class",
                     "classes": 10})
    write_container(os.path.join(args.out, "tiny_cnn_golden"), "golden",
                    {"logits_w4": ("float64", logits4)},
                    {"model": "tiny_cnn", "dataset": "mnist_subset", "correct_by_bit_width": accuracy,
                     "samples": int(len(test_idx))})


if __name__ == "__main__":
    main()
