"""Writes a randomly initialised torchvision VGG-19, converts it with
tools/convert_vgg19.py and records reference activations at the four taps.
The C++ case `converted VGG-19 archive` checks them.

usage: convert_vgg19_check.py <out_dir>
"""
import hashlib
import json
import math
import pathlib
import subprocess
import sys

import torch
import torchvision

TAPS = {1: "relu1_1", 6: "relu2_1", 11: "relu3_1", 20: "relu4_1"}
MEAN = (0.485, 0.456, 0.406)
STD = (0.229, 0.224, 0.225)
H, W = 48, 40


def image():
    y = torch.arange(H, dtype=torch.float32)[:, None]
    x = torch.arange(W, dtype=torch.float32)[None, :]
    chans = [torch.sin(0.21 * y + 0.13 * x + c) * 0.8 for c in range(3)]
    return torch.stack(chans)[None]  # [-1,1]


def main():
    out = pathlib.Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(1234)
    model = torchvision.models.vgg19(weights=None).eval()
    pth = out / "vgg19_random.pth"
    torch.save(model.state_dict(), pth)
    crw = out / "vgg19_random.crw"
    tool = pathlib.Path(__file__).resolve().parents[1] / "tools" / "convert_vgg19.py"
    subprocess.run([sys.executable, str(tool), str(pth), str(crw)], check=True)

    img = image()
    x = ((img + 1) / 2 - torch.tensor(MEAN)[None, :, None, None]) / torch.tensor(STD)[None, :, None, None]
    taps = {}
    with torch.no_grad():
        for i, layer in enumerate(model.features[:21]):
            x = layer(x)
            if i in TAPS:
                flat = x.flatten()
                idx = torch.linspace(0, flat.numel() - 1, 32).long()
                taps[TAPS[i]] = {"shape": list(x.shape), "mean": flat.double().mean().item(),
                                 "idx": idx.tolist(), "values": flat[idx].tolist()}
    doc = {"height": H, "width": W, "sha256": hashlib.sha256(pth.read_bytes()).hexdigest(), "taps": taps}
    (out / "reference.json").write_text(json.dumps(doc))
    print("wrote", out)


if __name__ == "__main__":
    main()
