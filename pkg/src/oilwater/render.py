"""Binary portable pixmaps (P5 grey, P6 colour) of lattice runs."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .io import manifest_line
from .lattice import LatticeField, RunRecord
from .scaling import closed_form_w


def write_pnm(path, image: np.ndarray, manifest: Optional[dict] = None):
    """Write ``(H, W)`` as P5 or ``(H, W, 3)`` as P6, 8-bit."""
    img = np.ascontiguousarray(image, dtype=np.uint8)
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError("image must be (H, W) or (H, W, 3)")
    h, w = img.shape[:2]
    header = magic + b"\n"
    if manifest is not None:
        header += b"# manifest " + manifest_line(manifest).encode() + b"\n"
    header += f"{w} {h}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header + img.tobytes())


def read_pnm(path):
    """``(image, comments)`` for files written by :func:`write_pnm`."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields, comments, pos = [], [], 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            end = data.index(b"\n", pos)
            comments.append(data[pos + 1 : end].decode().strip())
            pos = end + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end].decode())
        pos = end
    pos += 1
    magic, w, h = fields[0], int(fields[1]), int(fields[2])
    shape = (h, w) if magic == "P5" else (h, w, 3)
    return np.frombuffer(data[pos:], dtype=np.uint8).reshape(shape), comments


def _plane(field: LatticeField, box, margin: int) -> np.ndarray:
    """Values of a d=2 field on ``box`` grown by ``margin``; rows run top (high y) to bottom."""
    (x0, y0), (x1, y1) = box
    x0, y0, x1, y1 = x0 - margin, y0 - margin, x1 + margin, y1 + margin
    out = np.zeros((x1 - x0 + 1, y1 - y0 + 1), dtype=np.int64)
    lx, ly = field.lo
    sx, sy = field.values.shape
    ax0, ay0 = max(x0, lx), max(y0, ly)
    ax1, ay1 = min(x1, lx + sx - 1), min(y1, ly + sy - 1)
    if ax0 <= ax1 and ay0 <= ay1:
        out[ax0 - x0 : ax1 - x0 + 1, ay0 - y0 : ay1 - y0 + 1] = field.values[
            ax0 - lx : ax1 - lx + 1, ay0 - ly : ay1 - ly + 1
        ]
    return out.T[::-1]


def base_box(run: RunRecord):
    """Bounding box ``((x0, y0), (x1, y1))`` of the sites that fired; origin box when none did."""
    fired = np.argwhere(run.u > 0)
    if not len(fired):
        return (0, 0), (0, 0)
    lo = fired.min(axis=0) + np.array(run.lo)
    hi = fired.max(axis=0) + np.array(run.lo)
    return tuple(int(v) for v in lo), tuple(int(v) for v in hi)


def _normalize(a: np.ndarray) -> np.ndarray:
    m = a.max()
    if m <= 0:
        return np.zeros(a.shape, dtype=np.uint8)
    return np.rint(255.0 * a / m).astype(np.uint8)


def occupation_image(run: RunRecord, margin: int = 2) -> np.ndarray:
    """Red for oil, blue for water, each channel scaled by its own maximum."""
    if run.dimension != 2:
        raise ValueError("occupation images need d=2")
    box = base_box(run)
    oil = _plane(LatticeField(run.lo, run.oil), box, margin)
    water = _plane(LatticeField(run.lo, run.water), box, margin)
    img = np.zeros(oil.shape + (3,), dtype=np.uint8)
    img[..., 0] = _normalize(oil)
    img[..., 2] = _normalize(water)
    return img


def contour_shading(u: np.ndarray) -> np.ndarray:
    """Grey level ``255 * frac(u^(1/4) / 5)``."""
    v = np.asarray(u, dtype=float) ** 0.25 / 5.0
    return np.floor(255.0 * (v - np.floor(v))).astype(np.uint8)


def contour_image(field: LatticeField, box=None, margin: int = 2) -> np.ndarray:
    if field.dimension == 1:
        return contour_shading(field.values)[None, :]
    if field.dimension != 2:
        raise ValueError("contour images need d <= 2")
    if box is None:
        lo = field.lo
        hi = tuple(l + s - 1 for l, s in zip(field.lo, field.values.shape))
        box, margin = (lo, hi), 0
    return contour_shading(_plane(field, box, margin))


def ring_count(u_max: float) -> int:
    """Full shading cycles crossed between ``u = 0`` and ``u_max``."""
    return int(math.floor(u_max**0.25 / 5.0))


def render_occupation(run: RunRecord, out, manifest: Optional[dict] = None, margin: int = 2):
    write_pnm(out, occupation_image(run, margin), manifest)


def render_contours(run: RunRecord, out, manifest: Optional[dict] = None, margin: int = 2):
    field = LatticeField(run.lo, run.u)
    box = base_box(run) if run.dimension == 2 else None
    write_pnm(out, contour_image(field, box, margin), manifest)


def profile_image(run: RunRecord, height: int = 240, margin: int = 2) -> np.ndarray:
    """d=1 odometer as grey columns with the scaled limit curve in black.

    Below the axis, red and blue bars mark stopped oil and water.
    """
    if run.dimension != 1:
        raise ValueError("profile images need d=1")
    fired = np.nonzero(run.u)[0]
    if len(fired):
        x0, x1 = int(run.lo[0] + fired.min()) - margin, int(run.lo[0] + fired.max()) + margin
    else:
        x0, x1 = -margin, margin
    xs = np.arange(x0, x1 + 1)
    u = np.array([LatticeField(run.lo, run.u).at(int(x)) for x in xs], dtype=float)
    oil = np.array([LatticeField(run.lo, run.oil).at(int(x)) for x in xs], dtype=float)
    water = np.array([LatticeField(run.lo, run.water).at(int(x)) for x in xs], dtype=float)
    curve = run.n ** (4 / 3) * closed_form_w(xs / run.n ** (1 / 3)) if run.n else np.zeros(len(xs))
    top = max(u.max(), curve.max(), 1.0)
    upper = height * 3 // 4
    lower = height - upper - 1
    img = np.full((height, len(xs), 3), 255, dtype=np.uint8)
    cols = np.rint(upper * u / top).astype(int)
    for i, c in enumerate(cols):
        if c:
            img[upper - c : upper, i] = 160
    img[upper, :] = 0
    pm = max(oil.max(), water.max(), 1.0)
    for i in range(len(xs)):
        for amount, colour in ((oil[i], (220, 0, 0)), (water[i], (0, 0, 220))):
            c = int(round(lower * amount / pm))
            if c:
                img[upper + 1 : upper + 1 + c, i] = colour
    rows = upper - np.rint(upper * curve / top).astype(int)
    ok = curve > 0
    img[np.clip(rows[ok], 0, upper - 1), np.nonzero(ok)[0]] = 0
    return img


def render_profile(run: RunRecord, out, manifest: Optional[dict] = None, height: int = 240):
    write_pnm(out, profile_image(run, height), manifest)
