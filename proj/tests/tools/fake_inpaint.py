#!/usr/bin/env python3
"""Stand-in for the diffusion inpainting process, stdlib only.

Reads --request JSON, checks that every input file exists, and writes a flat
colour PNG of the requested size whose colour encodes the seed. With
FAKE_INPAINT_FAIL set it exits non-zero; with FAKE_INPAINT_SIZE=WxH it writes
that size instead.
"""
import argparse
import json
import os
import struct
import sys
import zlib


def write_png(path, width, height, rgb):
    row = b"\x00" + bytes(rgb) * width
    raw = row * height

    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    png = b"\x89PNG\r\n\x1a\n"
    png += chunk(b"IHDR", struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0))
    png += chunk(b"IDAT", zlib.compress(raw))
    png += chunk(b"IEND", b"")
    with open(path, "wb") as f:
        f.write(png)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--request", required=True)
    args = parser.parse_args()
    with open(args.request) as f:
        req = json.load(f)
    if os.environ.get("FAKE_INPAINT_FAIL"):
        print("simulated failure", file=sys.stderr)
        return 3
    for key in ("image", "mask", "masked_image", "latent_mask"):
        if not os.path.exists(req[key]):
            print("missing input " + key, file=sys.stderr)
            return 4
    if not req["prompt"]:
        return 5
    width, height = req["width"], req["height"]
    override = os.environ.get("FAKE_INPAINT_SIZE")
    if override:
        width, height = (int(v) for v in override.split("x"))
    seed = int(req["seed"])
    colour = ((seed * 37) % 256, (seed * 91 + 17) % 256, (seed * 53 + 101) % 256)
    write_png(req["output"], width, height, colour)
    return 0


if __name__ == "__main__":
    sys.exit(main())
