#!/usr/bin/env python3
"""Feature extractor adapter: Inception-v3 pool features and CLIP embeddings.

Invoked as `clip_inception_extract.py [--clip-model NAME] [--device DEV]
--request request.json`. Request modes:
  features          2048-d Inception-v3 pool features per image
  image_embeddings  CLIP image embeddings
  text_embeddings   CLIP text embeddings
Requires torch, torchvision, transformers and Pillow.
"""
import argparse
import json
import sys


def inception_features(paths, device):
    import torch
    from PIL import Image
    from torchvision import models, transforms

    model = models.inception_v3(weights=models.Inception_V3_Weights.IMAGENET1K_V1, aux_logits=True)
    model.fc = torch.nn.Identity()
    model.eval().to(device)
    prep = transforms.Compose([
        transforms.Resize((299, 299)),
        transforms.ToTensor(),
        transforms.Normalize(mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]),
    ])
    out = []
    with torch.no_grad():
        for start in range(0, len(paths), 32):
            batch = torch.stack([prep(Image.open(p).convert("RGB")) for p in paths[start:start + 32]])
            out.extend(model(batch.to(device)).double().cpu().tolist())
    return out


def clip_model(name, device):
    from transformers import CLIPModel, CLIPProcessor

    model = CLIPModel.from_pretrained(name).eval().to(device)
    return model, CLIPProcessor.from_pretrained(name)


def clip_images(paths, name, device):
    import torch
    from PIL import Image

    model, processor = clip_model(name, device)
    out = []
    with torch.no_grad():
        for start in range(0, len(paths), 32):
            images = [Image.open(p).convert("RGB") for p in paths[start:start + 32]]
            inputs = processor(images=images, return_tensors="pt").to(device)
            emb = model.get_image_features(**inputs)
            out.extend(torch.nn.functional.normalize(emb, dim=-1).double().cpu().tolist())
    return out


def clip_texts(texts, name, device):
    import torch

    model, processor = clip_model(name, device)
    with torch.no_grad():
        inputs = processor(text=texts, return_tensors="pt", padding=True, truncation=True).to(device)
        emb = model.get_text_features(**inputs)
    return torch.nn.functional.normalize(emb, dim=-1).double().cpu().tolist()


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--request", required=True)
    parser.add_argument("--clip-model", default="openai/clip-vit-base-patch32")
    parser.add_argument("--device", default="cuda")
    args = parser.parse_args()
    with open(args.request) as f:
        req = json.load(f)

    mode = req["mode"]
    if mode == "features":
        out = {"features": inception_features(req["images"], args.device)}
    elif mode == "image_embeddings":
        out = {"image_embeddings": clip_images(req["images"], args.clip_model, args.device)}
    elif mode == "text_embeddings":
        out = {"text_embeddings": clip_texts(req["texts"], args.clip_model, args.device)}
    else:
        print(f"unknown mode {mode!r}", file=sys.stderr)
        return 2
    with open(req["output"], "w") as f:
        json.dump(out, f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
