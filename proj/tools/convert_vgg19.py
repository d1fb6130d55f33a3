#!/usr/bin/env python3
"""Convert a torchvision VGG-19 state dict into a cartoon weight archive.

    python3 tools/convert_vgg19.py vgg19-dcbb9e9d.pth vgg19_prefix.crw

Only the convolutions up to relu4_1 are kept. Run with --torchvision-default
to fetch torchvision's IMAGENET1K_V1 weights through torch.hub instead of
reading a file.
"""
import argparse
import hashlib
import pathlib
import struct
import sys

import numpy as np

ARCHITECTURE = "vgg19-prefix-relu4_1"
# torchvision features index -> layer name
LAYERS = {0: "conv1_1", 2: "conv1_2", 5: "conv2_1", 7: "conv2_2", 10: "conv3_1",
          12: "conv3_2", 14: "conv3_3", 16: "conv3_4", 19: "conv4_1"}
MAGIC = b"CRWARCH\0"
VERSION = 1


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def encode_archive(meta: dict, tensors: dict) -> bytes:
    out = bytearray(MAGIC)
    out += struct.pack("<I", VERSION)
    out += struct.pack("<I", len(meta))
    for key in sorted(meta):
        k, v = key.encode(), meta[key].encode()
        out += struct.pack("<I", len(k)) + k + struct.pack("<I", len(v)) + v
    out += struct.pack("<I", len(tensors))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        n = name.encode()
        out += struct.pack("<I", len(n)) + n
        out += struct.pack("<BB", 1, arr.ndim)
        out += b"".join(struct.pack("<Q", d) for d in arr.shape)
        payload = arr.tobytes()
        out += struct.pack("<Q", len(payload)) + payload
    out += struct.pack("<Q", fnv1a64(bytes(out)))
    return bytes(out)


def convert(state: dict, source_sha256: str) -> bytes:
    tensors = {}
    for idx, name in LAYERS.items():
        w = state[f"features.{idx}.weight"].detach().cpu().numpy().astype(np.float32)
        b = state[f"features.{idx}.bias"].detach().cpu().numpy().astype(np.float32)
        if w.ndim != 4 or w.shape[2:] != (3, 3):
            sys.exit(f"features.{idx}.weight has shape {w.shape}, expected (out,in,3,3)")
        tensors[f"modeling.{name}.weight"] = w
        tensors[f"modeling.{name}.bias"] = b.reshape(1, -1, 1, 1)
    meta = {"architecture": ARCHITECTURE, "source_sha256": source_sha256}
    return encode_archive(meta, tensors)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", nargs="?", help="torchvision vgg19 state dict (.pth)")
    ap.add_argument("output", help="archive to write")
    ap.add_argument("--torchvision-default", action="store_true")
    args = ap.parse_args()

    import torch

    if args.torchvision_default:
        import torchvision
        model = torchvision.models.vgg19(weights=torchvision.models.VGG19_Weights.IMAGENET1K_V1)
        state = model.state_dict()
        digest = "torchvision:IMAGENET1K_V1"
    else:
        if not args.source:
            ap.error("source state dict required unless --torchvision-default")
        raw = pathlib.Path(args.source).read_bytes()
        digest = hashlib.sha256(raw).hexdigest()
        state = torch.load(args.source, map_location="cpu", weights_only=True)
        if "state_dict" in state:
            state = state["state_dict"]

    data = convert(state, digest)
    out = pathlib.Path(args.output)
    tmp = out.with_suffix(out.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(out)
    print(f"wrote {out} ({len(data)} bytes, source {digest})")


if __name__ == "__main__":
    main()
