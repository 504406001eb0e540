#!/usr/bin/env python3
"""Generates the tiny-ViT test fixtures and their golden values.

This is an independent reference written against torch/numpy only. It shares
no code with the C++ library: the archive writer, the image writer, the
forward pass and the greedy discarding search are all re-implemented here.

Outputs (in tests/fixtures/):
  tiny.tnsa            seed-42 weights for the 32/8/64/2/4 configuration, M=2
  tiny_input.ppm       fixed 32x32 input image
  batch/img_{a,b,c}.ppm three more fixture images for batch runs
  constant.ppm         constant-colour image for the occlusion no-op case
  golden.json          embedding, logits, probs, and greedy trace of tiny_input
"""

import json
import math
import pathlib
import struct

import numpy as np
import torch
import torch.nn.functional as F

IMAGE, PATCH, DIM, DEPTH, HEADS, CLASSES = 32, 8, 64, 2, 4, 2
GRID = IMAGE // PATCH
TOKENS = GRID * GRID
MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)
EPS = 1e-6

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def make_weights(seed=42):
    rng = np.random.RandomState(seed)

    def normal(shape, scale):
        return (rng.standard_normal(shape) * scale).astype(np.float32)

    d, h = DIM, 4 * DIM
    w = {}
    w["patch_embed.weight"] = normal((d, PATCH * PATCH * 3), 1.0 / math.sqrt(PATCH * PATCH * 3))
    w["patch_embed.bias"] = normal((d,), 0.1)
    w["cls_token"] = normal((d,), 0.5)
    w["pos_embed"] = normal((TOKENS + 1, d), 0.5)
    for i in range(DEPTH):
        p = f"blocks.{i}."
        w[p + "ln1.weight"] = (1.0 + normal((d,), 0.1)).astype(np.float32)
        w[p + "ln1.bias"] = normal((d,), 0.1)
        w[p + "attn.qkv.weight"] = normal((3 * d, d), 1.0 / math.sqrt(d))
        w[p + "attn.qkv.bias"] = normal((3 * d,), 0.1)
        w[p + "attn.proj.weight"] = normal((d, d), 1.0 / math.sqrt(d))
        w[p + "attn.proj.bias"] = normal((d,), 0.1)
        w[p + "ln2.weight"] = (1.0 + normal((d,), 0.1)).astype(np.float32)
        w[p + "ln2.bias"] = normal((d,), 0.1)
        w[p + "mlp.fc1.weight"] = normal((h, d), 1.0 / math.sqrt(d))
        w[p + "mlp.fc1.bias"] = normal((h,), 0.1)
        w[p + "mlp.fc2.weight"] = normal((d, h), 1.0 / math.sqrt(h))
        w[p + "mlp.fc2.bias"] = normal((d,), 0.1)
    w["ln_final.weight"] = (1.0 + normal((d,), 0.1)).astype(np.float32)
    w["ln_final.bias"] = normal((d,), 0.1)
    w["head.weight"] = normal((CLASSES, d), 1.0 / math.sqrt(d))
    w["head.bias"] = np.array([1.0, -1.0], dtype=np.float32)
    return w


def write_tnsa(path, tensors):
    header = {}
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        header[name] = {"shape": list(arr.shape), "offset": offset, "nbytes": len(raw)}
        offset += len(raw)
        blobs.append(raw)
    text = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(b"TNSA")
        f.write(struct.pack("<Q", len(text)))
        f.write(text)
        for b in blobs:
            f.write(b)


def write_ppm(path, rgb_u8):
    h, w, _ = rgb_u8.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(rgb_u8.astype(np.uint8).tobytes())


def write_png(path, rows, color_type, bit_depth):
    """rows: list of raw scanline bytes without filter bytes."""
    import struct
    import zlib

    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    height = len(rows)
    samples = {0: 1, 2: 3}[color_type]
    width = len(rows[0]) // (samples * bit_depth // 8)
    ihdr = struct.pack(">IIBBBBB", width, height, bit_depth, color_type, 0, 0, 0)
    raw = b"".join(b"\x00" + r for r in rows)
    with open(path, "wb") as f:
        f.write(b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b""))


def make_image(seed):
    rng = np.random.RandomState(seed)
    yy, xx = np.mgrid[0:IMAGE, 0:IMAGE].astype(np.float32)
    base = np.stack([
        0.5 + 0.4 * np.sin(xx / 5.0 + seed),
        0.5 + 0.4 * np.cos(yy / 7.0 - seed),
        (xx + yy) / (2.0 * IMAGE),
    ], axis=-1)
    noise = rng.uniform(-0.15, 0.15, size=base.shape)
    # a bright blob whose placement depends on the seed
    cy, cx = rng.randint(4, IMAGE - 4, size=2)
    blob = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / 30.0))[..., None]
    img = np.clip(base + noise + 0.6 * blob, 0.0, 1.0)
    return np.round(img * 255.0).astype(np.uint8)


def to_input(rgb_u8):
    x = rgb_u8.astype(np.float32) / 255.0
    x = (x - MEAN) / STD
    return torch.from_numpy(np.ascontiguousarray(x.transpose(2, 0, 1)))


def embed(w, img_chw):
    # conv with stride=kernel is the patch projection; token order is row-major
    weight = torch.from_numpy(w["patch_embed.weight"]).reshape(DIM, 3, PATCH, PATCH)
    bias = torch.from_numpy(w["patch_embed.bias"])
    tok = F.conv2d(img_chw[None].double(), weight.double(), bias.double(), stride=PATCH)
    tok = tok.flatten(2).transpose(1, 2)[0]  # [N, D]
    pos = torch.from_numpy(w["pos_embed"]).double()
    tokens = tok + pos[1:]
    cls = torch.from_numpy(w["cls_token"]).double() + pos[0]
    return tokens, cls


def encoder(w, x):
    t = lambda k: torch.from_numpy(w[k]).double()
    hd = DIM // HEADS
    for i in range(DEPTH):
        p = f"blocks.{i}."
        y = F.layer_norm(x, (DIM,), t(p + "ln1.weight"), t(p + "ln1.bias"), EPS)
        qkv = F.linear(y, t(p + "attn.qkv.weight"), t(p + "attn.qkv.bias"))
        qkv = qkv.reshape(x.shape[0], 3, HEADS, hd).permute(1, 2, 0, 3)
        q, k, v = qkv[0], qkv[1], qkv[2]
        att = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(hd), dim=-1)
        o = (att @ v).permute(1, 0, 2).reshape(x.shape[0], DIM)
        x = x + F.linear(o, t(p + "attn.proj.weight"), t(p + "attn.proj.bias"))
        y = F.layer_norm(x, (DIM,), t(p + "ln2.weight"), t(p + "ln2.bias"), EPS)
        y = F.gelu(F.linear(y, t(p + "mlp.fc1.weight"), t(p + "mlp.fc1.bias")))
        x = x + F.linear(y, t(p + "mlp.fc2.weight"), t(p + "mlp.fc2.bias"))
    x = F.layer_norm(x, (DIM,), t("ln_final.weight"), t("ln_final.bias"), EPS)
    return F.linear(x[0], t("head.weight"), t("head.bias"))


def logits_for(w, tokens, cls, retained):
    seq = torch.cat([cls[None], tokens[list(retained)]], dim=0)
    return encoder(w, seq)


def greedy(w, tokens, cls):
    retained = list(range(TOKENS))
    probs = torch.softmax(logits_for(w, tokens, cls, retained), -1)
    c = int(torch.argmax(probs))
    prev = float(probs[c])
    trace = {"target_class": c, "initial_confidence": prev, "steps": [], "status": "exhausted"}
    min_gap = math.inf
    i = 0
    while retained:
        i += 1
        cands = []
        for s in retained:
            sub = [r for r in retained if r != s]
            p = torch.softmax(logits_for(w, tokens, cls, sub), -1)
            cands.append((float(p[c]), s, int(torch.argmax(p))))
        cands.sort()
        if len(cands) > 1:
            min_gap = min(min_gap, cands[1][0] - cands[0][0])
        conf, tok, top = cands[0]
        retained.remove(tok)
        trace["steps"].append({"i": i, "token": tok, "confidence": conf, "drop": prev - conf})
        prev = conf
        if top != c:
            trace["status"] = "flipped"
            break
    return trace, min_gap


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "batch").mkdir(exist_ok=True)
    w = make_weights()
    write_tnsa(OUT / "tiny.tnsa", w)

    img = make_image(7)
    write_ppm(OUT / "tiny_input.ppm", img)
    for name, seed in (("img_a", 11), ("img_b", 12), ("img_c", 13)):
        write_ppm(OUT / "batch" / f"{name}.ppm", make_image(seed))
    write_ppm(OUT / "constant.ppm", np.full((IMAGE, IMAGE, 3), (120, 60, 200), dtype=np.uint8))

    # 2x2 grayscale 8-bit: 0, 255 / 128, 64
    write_png(OUT / "gray2x2.png", [bytes([0, 255]), bytes([128, 64])], 0, 8)
    # 1x1 RGB 16-bit: (65535, 0, 32896) reads back as (255, 0, 128) / 255
    write_png(OUT / "rgb16.png", [bytes([0xFF, 0xFF, 0, 0, 0x80, 0x80])], 2, 16)

    tokens, cls = embed(w, to_input(img))
    logits = logits_for(w, tokens, cls, range(TOKENS))
    probs = torch.softmax(logits, -1)
    trace, min_gap = greedy(w, tokens, cls)

    golden = {
        "config": {"image_size": IMAGE, "patch_size": PATCH, "dim": DIM, "depth": DEPTH,
                   "heads": HEADS, "num_classes": CLASSES},
        "tokens0": tokens[0].tolist(),
        "tokens_last": tokens[-1].tolist(),
        "cls": cls.tolist(),
        "logits": logits.tolist(),
        "probs": probs.tolist(),
        "trace": trace,
        "trace_min_candidate_gap": min_gap,
    }
    with open(OUT / "golden.json", "w") as f:
        json.dump(golden, f, indent=1)
    print("logits", logits.tolist(), "probs", probs.tolist())
    print("trace", [(s["token"], round(s["confidence"], 4)) for s in trace["steps"]], trace["status"])
    print("min candidate gap", min_gap)


if __name__ == "__main__":
    main()
