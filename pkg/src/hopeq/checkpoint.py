"""Binary checkpoint format.

Layout (little-endian):

    magic    8 bytes  "HOPDEQ1\\0"
    version  u32      1
    variant  u8       0 = CHN, 1 = HAM
    L        u32      number of layers, input included
    sizes    L x u32  layer sizes
    blocks   W_0 ... W_{L-2}, row-major float64
    biases   b_1 ... b_{L-1}, float64
"""

from __future__ import annotations

import struct

import numpy as np

from .network import CHN, HAM, Architecture, ModelParams

MAGIC = b"HOPDEQ1\x00"
VERSION = 1
_VARIANT_CODE = {CHN: 0, HAM: 1}
_VARIANT_NAME = {0: CHN, 1: HAM}


def save_checkpoint(path, p: ModelParams) -> None:
    sizes = p.arch.layer_sizes
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<B", _VARIANT_CODE[p.variant]))
        fh.write(struct.pack("<I", len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for b in p.blocks:
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
        for b in p.biases:
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"bad checkpoint magic {raw[:len(MAGIC)]!r}")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<I", raw, off)
    off += 4
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (variant_code,) = struct.unpack_from("<B", raw, off)
    off += 1
    if variant_code not in _VARIANT_NAME:
        raise ValueError(f"unknown variant code {variant_code}")
    (num_layers,) = struct.unpack_from("<I", raw, off)
    off += 4
    if num_layers < 2 or num_layers > 1_000_000:
        raise ValueError(f"implausible layer count {num_layers}")
    sizes = struct.unpack_from(f"<{num_layers}I", raw, off)
    off += 4 * num_layers
    arch = Architecture(tuple(sizes))

    want = sum(sizes[i + 1] * sizes[i] for i in range(num_layers - 1))
    want += sum(sizes[1:])
    if len(raw) - off != 8 * want:
        raise ValueError(
            f"checkpoint payload holds {len(raw) - off} bytes, expected {8 * want}"
        )

    def take(shape):
        nonlocal off
        n = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(shape)
        off += 8 * n
        return arr.astype(np.float64)

    blocks = [take((sizes[i + 1], sizes[i])) for i in range(num_layers - 1)]
    biases = [take((sizes[i + 1],)) for i in range(num_layers - 1)]
    return ModelParams(
        arch=arch, blocks=blocks, biases=biases, variant=_VARIANT_NAME[variant_code]
    )
