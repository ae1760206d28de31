"""End-to-end smoke run of the edgepress_py extension module.

Build and install first:

    pip install --no-build-isolation ./crates/python
"""

import io
import math
import os
import random
import sys
import tempfile

import edgepress_py as ep


def write_pgm(path, pixels, height, width):
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (width, height))
        f.write(bytes(pixels))


def scene(height, width, seed):
    rng = random.Random(seed)
    cx, cy, r = rng.uniform(0, width), rng.uniform(0, height), rng.uniform(4, min(height, width) / 2)
    out = []
    for y in range(height):
        for x in range(width):
            v = 60 + 120 * x / width
            if (x - cx) ** 2 + (y - cy) ** 2 < r * r:
                v = 220 - v / 2
            v += 20 * math.sin(x / 2.5) * math.cos(y / 3.0)
            out.append(max(0, min(255, int(v + rng.uniform(-4, 4)))))
    return bytes(out)


def check_codec():
    h, w = 24, 40
    px = scene(h, w, 1)
    jpg = ep.jpeg_encode(px, h, w, 75)
    back, bh, bw = ep.jpeg_decode(jpg)
    assert (bh, bw) == (h, w)
    psnr = ep.psnr(px, back, h, w)
    assert psnr > 25, psnr
    try:
        from PIL import Image
    except ImportError:
        print("codec: PIL not available, skipped third-party decode")
        return
    img = Image.open(io.BytesIO(jpg))
    assert img.size == (w, h) and img.mode == "L"
    worst = max(abs(a - b) for a, b in zip(img.tobytes(), back))
    assert worst <= 2, worst
    print(f"codec: {len(jpg)} bytes, psnr {psnr:.2f} dB, PIL max diff {worst}")


def check_workflow(root):
    train = os.path.join(root, "train")
    os.mkdir(train)
    for i in range(3):
        write_pgm(os.path.join(train, f"t{i}.pgm"), scene(40, 40, 10 + i), 40, 40)
    cfg = os.path.join(root, "run.cfg")
    with open(cfg, "w") as f:
        f.write(
            "mode = CR\nqf = 30\nepochs = 1\niterations = 1\nbatch_size = 2\n"
            "warmup_epochs = 1\npon_features = 4\npon_blocks = 1\ncrop_size = 32\n"
            "train_dir = train\nout_dir = out\n"
        )
    ckpt = ep.train(cfg)
    src = os.path.join(root, "photo.pgm")
    write_pgm(src, scene(45, 30, 99), 45, 30)
    jpg = os.path.join(root, "photo.jpg")
    side = ep.compress(ckpt, src, jpg)
    assert side["mode"] == "CR" and side["original_dims"] == (45, 30), side
    dims = ep.decompress(ckpt, jpg, os.path.join(root, "back.pgm"))
    assert dims == (45, 30), dims
    mean = ep.evaluate(ckpt, train, os.path.join(root, "eval.csv"))
    assert mean["bpp"] > 0 and 0 <= mean["miou"] <= 1, mean

    other = os.path.join(root, "other.cfg")
    with open(cfg) as f:
        text = f.read().replace("out_dir = out", "out_dir = out2") + "seed = 5\n"
    with open(other, "w") as f:
        f.write(text)
    ckpt2 = ep.train(other)
    try:
        ep.decompress(ckpt2, jpg, os.path.join(root, "nope.pgm"))
        raise AssertionError("mismatched checkpoint accepted")
    except ep.RefusedError:
        pass
    assert not os.path.exists(os.path.join(root, "nope.pgm"))
    print(f"workflow: sidecar {side['padded_dims']}, eval mean psnr {mean['psnr']:.2f} dB")


def main():
    check_codec()
    with tempfile.TemporaryDirectory() as root:
        check_workflow(root)
    print("smoke OK")
    return 0


if __name__ == "__main__":
    sys.exit(main())
