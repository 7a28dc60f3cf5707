#!/usr/bin/env python3
"""Inpainting adapter for the diffusion backend.

Invoked as `diffusers_inpaint.py --request request.json`. Reads the request
written by the C++ backend and saves the generated image to its "output" path.
Requires torch, diffusers and Pillow.
"""
import argparse
import json
import sys


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--request", required=True)
    args = parser.parse_args()
    with open(args.request) as f:
        req = json.load(f)

    import torch
    from diffusers import StableDiffusionInpaintPipeline
    from PIL import Image

    if req.get("deterministic", True):
        torch.use_deterministic_algorithms(True, warn_only=True)
        torch.backends.cudnn.benchmark = False

    device = req.get("device", "cuda")
    dtype = torch.float16 if device.startswith("cuda") else torch.float32
    pipe = StableDiffusionInpaintPipeline.from_pretrained(req["model"], torch_dtype=dtype)
    pipe = pipe.to(device)
    pipe.set_progress_bar_config(disable=True)

    image = Image.open(req["image"]).convert("RGB")
    mask = Image.open(req["mask"]).convert("L")
    generator = torch.Generator(device=device).manual_seed(int(req["seed"]))
    result = pipe(
        prompt=req["prompt"],
        image=image,
        mask_image=mask,
        width=int(req["width"]),
        height=int(req["height"]),
        num_inference_steps=int(req["steps"]),
        guidance_scale=float(req["guidance_scale"]),
        generator=generator,
    ).images[0]
    result.convert("RGB").save(req["output"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
