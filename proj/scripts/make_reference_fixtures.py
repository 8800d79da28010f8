#!/usr/bin/env python3
# Copyright 2026 The GRAMC Simulator Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerates the committed MNIST subset and the reference CNN checkpoint.

Source images: the 5000-sample MNIST subset bundled with mlxtend
(500 per class). A seeded permutation holds out 1000 images as the
test subset (written as IDX files); the remaining 4000 train the
network. Output weights use the flat little-endian format read by
gramc::io::read_weights.

    pip install mlxtend torch
    python3 scripts/make_reference_fixtures.py --out data
"""

import argparse
import pathlib
import struct

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from mlxtend.data import mnist_data

WEIGHTS_MAGIC = b"GRMW"
KIND_CONV = 0
KIND_FC = 1


class SmallLeNet(nn.Module):
    # Every layer fits one 128x128 array with its positive and negative
    # planes side by side: conv1 25x(2*4), conv2 100x(2*8), fc1 128x(2*64),
    # fc2 64x(2*32), fc3 32x(2*10).
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 4, 5)
        self.conv2 = nn.Conv2d(4, 8, 5)
        self.fc1 = nn.Linear(128, 64)
        self.fc2 = nn.Linear(64, 32)
        self.fc3 = nn.Linear(32, 10)

    def forward(self, x, record=None):
        layers = [self.conv1, self.conv2, self.fc1, self.fc2, self.fc3]
        for i, layer in enumerate(layers):
            if i == 2:
                x = x.flatten(1)
            if record is not None:
                record[i] = max(record[i], float(x.abs().max()))
            x = layer(x)
            if i < 2:
                x = F.max_pool2d(F.relu(x), 2)
            elif i < 4:
                x = F.relu(x)
        return x


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def write_weights(path, model, act_scales):
    layers = [model.conv1, model.conv2, model.fc1, model.fc2, model.fc3]
    with open(path, "wb") as f:
        f.write(WEIGHTS_MAGIC)
        f.write(struct.pack("<II", 1, len(layers)))
        for layer, scale in zip(layers, act_scales):
            w = layer.weight.detach().numpy().astype("<f4")
            b = layer.bias.detach().numpy().astype("<f4")
            kind = KIND_CONV if isinstance(layer, nn.Conv2d) else KIND_FC
            f.write(struct.pack("<II", kind, w.ndim))
            f.write(struct.pack("<" + "I" * w.ndim, *w.shape))
            f.write(struct.pack("<f", scale))
            f.write(np.ascontiguousarray(w).tobytes())
            f.write(np.ascontiguousarray(b).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    (out / "mnist").mkdir(parents=True, exist_ok=True)

    X, y = mnist_data()
    perm = np.random.default_rng(args.seed).permutation(len(X))
    test_idx, train_idx = perm[:1000], perm[1000:]
    write_idx_images(out / "mnist" / "subset-1k-images-idx3-ubyte", X[test_idx])
    write_idx_labels(out / "mnist" / "subset-1k-labels-idx1-ubyte", y[test_idx])

    torch.manual_seed(args.seed)
    xt = torch.tensor(X[train_idx] / 255.0, dtype=torch.float32).view(-1, 1, 28, 28)
    yt = torch.tensor(y[train_idx], dtype=torch.long)
    xv = torch.tensor(X[test_idx] / 255.0, dtype=torch.float32).view(-1, 1, 28, 28)
    yv = torch.tensor(y[test_idx], dtype=torch.long)

    model = SmallLeNet()
    opt = torch.optim.Adam(model.parameters(), lr=2e-3, weight_decay=1e-4)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, args.epochs)
    for epoch in range(args.epochs):
        model.train()
        order = torch.randperm(len(xt))
        for start in range(0, len(xt), 64):
            idx = order[start:start + 64]
            batch = xt[idx]
            # small random translations
            dx, dy = np.random.randint(-2, 3, size=2)
            batch = torch.roll(batch, shifts=(int(dy), int(dx)), dims=(2, 3))
            loss = F.cross_entropy(model(batch), yt[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
        sched.step()
        model.eval()
        with torch.no_grad():
            acc = (model(xv).argmax(1) == yv).float().mean().item()
        print(f"epoch {epoch:2d} loss {loss.item():.4f} held-out acc {acc:.4f}")

    record = [0.0] * 5
    with torch.no_grad():
        model(xt, record)
    write_weights(out / "reference_cnn.bin", model, record)
    print("activation scales", record)


if __name__ == "__main__":
    main()
