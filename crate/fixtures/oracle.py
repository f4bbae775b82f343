#!/usr/bin/env python3
"""Regenerates the test fixtures and their expected outputs.

Everything here is computed with numpy in float64, independently of the Rust
implementation: direct-loop convolution, unfolded batch norm, bilinear
resize, decoding, greedy suppression and box mapping. Run from any
directory; outputs land next to this script.
"""

import json
import math
import struct
from pathlib import Path

import numpy as np
from PIL import Image

HERE = Path(__file__).resolve().parent
CONF_THRESH = 0.25
NMS_THRESH = 0.45
LEAKY = 0.1
EPS = 1e-5
MARGIN = 1e-3

TINY_CFG = """\
# Five-layer network used by the end-to-end tests.
[net]
width=16
height=16
channels=3

[convolutional]
batch_normalize=1
filters=4
size=3
stride=2
pad=1
activation=leaky

[convolutional]
batch_normalize=1
filters=4
size=1
stride=1
pad=1
activation=leaky

[shortcut]
from=-2
activation=linear

[convolutional]
filters=6
size=1
stride=1
pad=1
activation=linear

[yolo]
mask=0
anchors=6,8
classes=1
num=1
"""


def tiny_params():
    """Hand-set parameters. Feature 0 responds to red, 1 to brightness,
    2 and 3 to horizontal/vertical gradients."""
    w0 = np.zeros((4, 3, 3, 3))
    w0[0, 0, 1, 1] = 2.0
    w0[0, 1, 1, 1] = -1.0
    w0[0, 2, 1, 1] = -1.0
    w0[0, 0] += 0.05
    w0[1, :, :, :] = 1.0 / 9.0
    w0[2, 0, :, 0] = -0.5
    w0[2, 0, :, 2] = 0.5
    w0[3, 1, 0, :] = -0.5
    w0[3, 1, 2, :] = 0.5
    bn0 = dict(
        beta=np.array([0.1, -0.2, 0.0, 0.05]),
        gamma=np.array([1.5, 0.8, 1.2, 0.9]),
        mean=np.array([0.05, 0.4, 0.0, -0.02]),
        var=np.array([0.5, 0.25, 1.0, 2.0]),
    )
    w1 = np.array(
        [
            [0.9, 0.1, 0.0, 0.0],
            [0.0, 1.1, 0.1, -0.1],
            [0.2, 0.0, 0.8, 0.0],
            [0.0, -0.1, 0.0, 1.0],
        ]
    ).reshape(4, 4, 1, 1)
    bn1 = dict(
        beta=np.array([0.0, 0.1, -0.05, 0.0]),
        gamma=np.array([1.0, 0.9, 1.1, 1.2]),
        mean=np.array([0.1, 0.0, 0.0, 0.05]),
        var=np.array([1.0, 0.5, 0.8, 1.5]),
    )
    w3 = np.array(
        [
            [0.1, 0.0, 0.6, 0.0],
            [0.0, 0.1, 0.0, 0.6],
            [0.05, 0.1, 0.0, 0.0],
            [0.05, -0.1, 0.0, 0.0],
            [0.6, 0.1, 0.0, 0.0],
            [0.2, 0.8, 0.1, 0.1],
        ]
    ).reshape(6, 4, 1, 1)
    b3 = np.array([0.0, 0.0, -0.2, 0.0, -2.5, 0.3])
    return [
        dict(w=w0, bn=bn0, stride=2, pad=1, act="leaky"),
        dict(w=w1, bn=bn1, stride=1, pad=0, act="leaky"),
        None,
        dict(w=w3, bias=b3, stride=1, pad=0, act="linear"),
        None,
    ]


# ---------------------------------------------------------------- forward


def conv_direct(x, w, stride, pad):
    c_in, h, wd = x.shape
    c_out, _, k, _ = w.shape
    xp = np.zeros((c_in, h + 2 * pad, wd + 2 * pad))
    xp[:, pad : pad + h, pad : pad + wd] = x
    oh = (h + 2 * pad - k) // stride + 1
    ow = (wd + 2 * pad - k) // stride + 1
    out = np.zeros((c_out, oh, ow))
    for o in range(c_out):
        for y in range(oh):
            for xx in range(ow):
                acc = 0.0
                for c in range(c_in):
                    for dy in range(k):
                        for dx in range(k):
                            acc += w[o, c, dy, dx] * xp[c, y * stride + dy, xx * stride + dx]
                out[o, y, xx] = acc
    return out


def leaky(x):
    return np.where(x >= 0, x, LEAKY * x)


def forward_tiny(x):
    p = tiny_params()
    y0 = conv_direct(x, p[0]["w"], 2, 1)
    bn = p[0]["bn"]
    y0 = leaky(
        bn["gamma"][:, None, None] * (y0 - bn["mean"][:, None, None]) / np.sqrt(bn["var"][:, None, None] + EPS)
        + bn["beta"][:, None, None]
    )
    y1 = conv_direct(y0, p[1]["w"], 1, 0)
    bn = p[1]["bn"]
    y1 = leaky(
        bn["gamma"][:, None, None] * (y1 - bn["mean"][:, None, None]) / np.sqrt(bn["var"][:, None, None] + EPS)
        + bn["beta"][:, None, None]
    )
    y2 = y1 + y0
    y3 = conv_direct(y2, p[3]["w"], 1, 0) + p[3]["bias"][:, None, None]
    return y3


# ------------------------------------------------------------- preprocess


def taps(src, dst):
    scale = src / dst
    out = []
    for d in range(dst):
        pos = min(max((d + 0.5) * scale - 0.5, 0.0), src - 1)
        i0 = math.floor(pos)
        i1 = min(i0 + 1, src - 1)
        out.append((i0, i1, pos - i0))
    return out


def resize(img, w, h):
    """img: H x W x 3 uint8 -> 3 x h x w in [0,1]."""
    src = img.astype(np.float64) / 255.0
    xs = taps(img.shape[1], w)
    ys = taps(img.shape[0], h)
    out = np.zeros((3, h, w))
    for y, (y0, y1, fy) in enumerate(ys):
        for x, (x0, x1, fx) in enumerate(xs):
            top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
            bot = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
            out[:, y, x] = top * (1 - fy) + bot * fy
    return out


def preprocess(img, nw, nh, letterbox):
    sh, sw = img.shape[:2]
    if not letterbox:
        return resize(img, nw, nh), dict(sx=nw / sw, sy=nh / sh, px=0.0, py=0.0)
    scale = min(nw / sw, nh / sh)
    iw = min(max(math.floor(sw * scale + 0.5), 1), nw)
    ih = min(max(math.floor(sh * scale + 0.5), 1), nh)
    px, py = (nw - iw) // 2, (nh - ih) // 2
    t = np.full((3, nh, nw), 0.5)
    t[:, py : py + ih, px : px + iw] = resize(img, iw, ih)
    return t, dict(sx=iw / sw, sy=ih / sh, px=float(px), py=float(py))


# ------------------------------------------------------------ postprocess


def sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def decode(head, anchors, stride_x, stride_y):
    depth, gh, gw = head.shape
    slot = depth // len(anchors)
    cands = []
    for row in range(gh):
        for col in range(gw):
            for a, (aw, ah) in enumerate(anchors):
                t = head[a * slot : (a + 1) * slot, row, col]
                obj = sigmoid(t[4])
                cls = sigmoid(t[5])
                cands.append(
                    dict(
                        cx=(sigmoid(t[0]) + col) * stride_x,
                        cy=(sigmoid(t[1]) + row) * stride_y,
                        w=aw * math.exp(min(t[2], 10.0)),
                        h=ah * math.exp(min(t[3], 10.0)),
                        objectness=obj,
                        class_score=cls,
                        confidence=obj * cls,
                        class_id=0,
                    )
                )
    return cands


def corners(d):
    return (d["cx"] - d["w"] / 2, d["cy"] - d["h"] / 2, d["cx"] + d["w"] / 2, d["cy"] + d["h"] / 2)


def iou(a, b):
    ax0, ay0, ax1, ay1 = corners(a)
    bx0, by0, bx1, by1 = corners(b)
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = a["w"] * a["h"] + b["w"] * b["h"] - inter
    return inter / union if union > 0 else 0.0


def nms(dets):
    order = sorted(range(len(dets)), key=lambda i: (-dets[i]["confidence"], i))
    keep, dead = [], set()
    for p, i in enumerate(order):
        if i in dead:
            continue
        keep.append(dets[i])
        for j in order[p + 1 :]:
            if j in dead:
                continue
            o = iou(dets[i], dets[j])
            assert abs(o - NMS_THRESH) > MARGIN, f"IoU {o} too close to the suppression threshold"
            if o > NMS_THRESH:
                dead.add(j)
    return keep


def to_source(d, rec, sw, sh):
    x0, y0, x1, y1 = corners(d)
    x0 = min(max((x0 - rec["px"]) / rec["sx"], 0.0), sw)
    x1 = min(max((x1 - rec["px"]) / rec["sx"], 0.0), sw)
    y0 = min(max((y0 - rec["py"]) / rec["sy"], 0.0), sh)
    y1 = min(max((y1 - rec["py"]) / rec["sy"], 0.0), sh)
    if (x1 - x0) * (y1 - y0) <= 0:
        return None
    out = dict(d)
    out.update(cx=(x0 + x1) / 2, cy=(y0 + y1) / 2, w=x1 - x0, h=y1 - y0)
    return out


def detect(img, letterbox):
    x, rec = preprocess(img, 16, 16, letterbox)
    head = forward_tiny(x)
    cands = decode(head, [(6.0, 8.0)], 16 / head.shape[2], 16 / head.shape[1])
    for c in cands:
        assert abs(c["confidence"] - CONF_THRESH) > MARGIN, f"confidence {c['confidence']} too close to threshold"
    passing = sorted(c["confidence"] for c in cands if c["confidence"] >= CONF_THRESH)
    # Suppression order must not hinge on float rounding.
    assert all(b - a > 1e-5 for a, b in zip(passing, passing[1:])), "near-tied confidences"
    kept = nms([c for c in cands if c["confidence"] >= CONF_THRESH])
    sh, sw = img.shape[:2]
    mapped = [m for m in (to_source(d, rec, sw, sh) for d in kept) if m is not None]
    return x, head, mapped


# ----------------------------------------------------------------- frames


def frame(seed, patches):
    rng = np.random.default_rng(seed)
    img = rng.integers(70, 110, size=(24, 32, 3)).astype(np.uint8)
    for x0, y0, x1, y1 in patches:
        # Textured so that no two cells produce tied scores.
        ys, xs = np.mgrid[y0:y1, x0:x1]
        img[y0:y1, x0:x1, 0] = 170 + 6 * (xs - x0) + 3 * (ys - y0) + rng.integers(0, 9, size=xs.shape)
        img[y0:y1, x0:x1, 1] = rng.integers(20, 50, size=xs.shape)
        img[y0:y1, x0:x1, 2] = rng.integers(20, 50, size=xs.shape)
    return img


FRAMES = {
    "frame_000": frame(1, [(4, 6, 12, 16)]),
    "frame_001": frame(2, [(18, 3, 28, 11), (3, 14, 9, 22)]),
    "frame_002": frame(3, []),
}


# ---------------------------------------------------------------- weights


def header_bytes(major, minor, revision, seen):
    head = struct.pack("<iii", major, minor, revision)
    wide = major * 10 + minor >= 2
    return head + (struct.pack("<Q", seen) if wide else struct.pack("<I", seen))


def floats(a):
    return struct.pack(f"<{a.size}f", *np.asarray(a, dtype=np.float64).ravel())


def tiny_body():
    body = b""
    for p in tiny_params():
        if p is None:
            continue
        if "bn" in p:
            bn = p["bn"]
            body += floats(bn["beta"]) + floats(bn["gamma"]) + floats(bn["mean"]) + floats(bn["var"])
        else:
            body += floats(p["bias"])
        body += floats(p["w"])
    return body


SINGLE_CFG = """\
[net]
width=2
height=2
channels=1

[convolutional]
filters=1
size=1
stride=1
activation=linear
"""

EMPTY_CFG = """\
[net]
width=4
height=4
channels=2

[upsample]
stride=2
"""

ROUTE_CFG = """\
[net]
width=8
height=6
channels=2

[convolutional]
filters=3
size=3
stride=1
pad=1
activation=leaky

[convolutional]
batch_normalize=1
filters=2
size=3
stride=2
pad=1
activation=leaky

[upsample]
stride=2

[route]
layers=-1,0

[convolutional]
batch_normalize=1
filters=4
size=1
stride=1
activation=linear
"""


def route_body():
    rng = np.random.default_rng(7)
    parts = []
    # conv 0: 2 -> 3, k3, bias
    parts += [rng.normal(size=3), rng.normal(size=(3, 2, 3, 3))]
    # conv 1: 3 -> 2, k3, bn
    parts += [rng.normal(size=2), rng.normal(size=2), rng.normal(size=2), rng.uniform(0.1, 2, size=2)]
    parts += [rng.normal(size=(2, 3, 3, 3))]
    # conv 4: 5 -> 4, k1, bn
    parts += [rng.normal(size=4), rng.normal(size=4), rng.normal(size=4), rng.uniform(0.1, 2, size=4)]
    parts += [rng.normal(size=(4, 5, 1, 1))]
    return b"".join(floats(p) for p in parts), sum(p.size for p in parts)


def write_weights():
    files = {}
    tiny = tiny_body()
    files["tiny.weights"] = ("tiny.cfg", header_bytes(0, 2, 0, 32013312) + tiny, len(tiny) // 4)
    files["tiny_v01.weights"] = ("tiny.cfg", header_bytes(0, 1, 0, 1000) + tiny, len(tiny) // 4)
    files["single.weights"] = ("single.cfg", header_bytes(0, 2, 5, 7) + floats(np.array([0.25, -1.5])), 2)
    files["empty.weights"] = ("empty.cfg", header_bytes(1, 0, 0, 0), 0)
    body, n = route_body()
    files["route.weights"] = ("route.cfg", header_bytes(0, 1, 3, 64) + body, n)
    manifest = []
    for name, (cfg, data, count) in files.items():
        (HERE / name).write_bytes(data)
        manifest.append(dict(weights=name, cfg=cfg, bytes=len(data), floats=count, header_bytes=len(data) - 4 * count))
    return manifest


def main():
    (HERE / "tiny.cfg").write_text(TINY_CFG)
    (HERE / "single.cfg").write_text(SINGLE_CFG)
    (HERE / "empty.cfg").write_text(EMPTY_CFG)
    (HERE / "route.cfg").write_text(ROUTE_CFG)
    manifest = write_weights()
    (HERE / "weights_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    frames_dir = HERE / "frames"
    frames_dir.mkdir(exist_ok=True)
    expected = {"conf_thresh": CONF_THRESH, "nms_thresh": NMS_THRESH, "direct": {}, "letterbox": {}, "heads": {}}
    for name, img in FRAMES.items():
        Image.fromarray(img, "RGB").save(frames_dir / f"{name}.png")
        x, head, dets = detect(img, letterbox=False)
        expected["direct"][name] = dets
        expected["heads"][name] = {"input": x.ravel().tolist(), "head": head.ravel().tolist(), "shape": list(head.shape)}
        expected["letterbox"][name] = detect(img, letterbox=True)[2]
    (HERE / "tiny_expected.json").write_text(json.dumps(expected, indent=1) + "\n")
    for mode in ("direct", "letterbox"):
        counts = {k: len(v) for k, v in expected[mode].items()}
        print(mode, counts)


if __name__ == "__main__":
    main()
