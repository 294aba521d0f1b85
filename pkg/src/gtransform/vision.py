"""Block-wise frequency features for images.

RGB -> YCbCr (full-range BT.601), non-overlapping 8x8 blocks, a 2-D
general transform per block with independent parameters per colour plane,
retention of the first ``k`` coefficients and per-channel standardisation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import VISION_TRANSFORMS, GTParams, blend_kernel, gt_forward_2d, gt_grad_params, make_vision_params
from .errors import ConfigError, DimensionMismatch, EmptyDataset, EmptyImage, FormatError, NotDivisible, UnsupportedSize

BLOCK = 8
STD_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class ImagePlanes:
    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray

    def __post_init__(self):
        if not (self.y.shape == self.cb.shape == self.cr.shape) or self.y.ndim != 2:
            raise DimensionMismatch("Y, Cb and Cr planes must share one 2-D shape")

    @property
    def height(self) -> int:
        return self.y.shape[0]

    @property
    def width(self) -> int:
        return self.y.shape[1]

    def planes(self):
        return (self.y, self.cb, self.cr)


@dataclass(frozen=True)
class PerChannelGT:
    y_params: GTParams
    cb_params: GTParams
    cr_params: GTParams

    def __post_init__(self):
        for p in self.as_tuple():
            if p.transforms != VISION_TRANSFORMS:
                raise ConfigError(
                    "colour-channel transforms must be (dct2, dft, haar), got "
                    + ", ".join(t.value for t in p.transforms))

    def as_tuple(self):
        return (self.y_params, self.cb_params, self.cr_params)

    @classmethod
    def uniform(cls, params: GTParams | None = None) -> "PerChannelGT":
        params = params or make_vision_params()
        return cls(params, params, params)

    @classmethod
    def from_blocks(cls, blocks: dict, prefix: str = "") -> "PerChannelGT":
        key = (prefix + ".") if prefix else ""
        try:
            return cls(blocks[key + "y"], blocks[key + "cb"], blocks[key + "cr"])
        except KeyError as exc:
            raise ConfigError(f"missing parameter block {exc.args[0]!r}") from None


@dataclass(frozen=True)
class ChannelStats:
    mean: np.ndarray
    std: np.ndarray


def rgb_to_ycbcr(rgb, clamp: bool = True) -> ImagePlanes:
    rgb = np.asarray(rgb)
    if rgb.size == 0:
        raise EmptyImage("image has no pixels")
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionMismatch(f"expected HxWx3 image, got shape {rgb.shape}")
    r, g, b = (rgb[..., i].astype(float) for i in range(3))
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    if clamp:
        y, cb, cr = (np.clip(p, 0.0, 255.0) for p in (y, cb, cr))
    return ImagePlanes(y, cb, cr)


def center_crop(plane: np.ndarray, multiple: int = BLOCK) -> np.ndarray:
    h, w = plane.shape[:2]
    nh, nw = h - h % multiple, w - w % multiple
    if nh == 0 or nw == 0:
        raise EmptyImage(f"image {h}x{w} is smaller than one {multiple}x{multiple} block")
    top, left = (h - nh) // 2, (w - nw) // 2
    return plane[top:top + nh, left:left + nw]


def crop_planes(planes: ImagePlanes) -> ImagePlanes:
    return ImagePlanes(*(center_crop(p) for p in planes.planes()))


def block_partition(plane, block: int = BLOCK) -> np.ndarray:
    """Split into a ``(H/8, W/8, 8, 8)`` grid of blocks in raster order."""
    plane = np.asarray(plane)
    h, w = plane.shape
    if h % block or w % block:
        raise NotDivisible(f"plane {h}x{w} is not divisible into {block}x{block} blocks")
    return plane.reshape(h // block, block, w // block, block).swapaxes(1, 2)


def block_reassemble(blocks: np.ndarray) -> np.ndarray:
    gh, gw, bh, bw = blocks.shape
    return blocks.swapaxes(1, 2).reshape(gh * bh, gw * bw)


def zigzag_order(n: int = BLOCK) -> list:
    """JPEG zigzag scan as a list of ``(row, col)`` pairs."""
    if n != BLOCK:
        raise UnsupportedSize(f"zigzag order is defined for 8x8 blocks only, got {n}")
    order = []
    for s in range(2 * n - 1):
        diag = [(i, s - i) for i in range(n) if 0 <= s - i < n]
        # even anti-diagonals run bottom-left to top-right
        order.extend(reversed(diag) if s % 2 == 0 else diag)
    return order


def raster_order(n: int = BLOCK) -> list:
    return [(i, j) for i in range(n) for j in range(n)]


def coefficient_order(order: str = "zigzag") -> list:
    if order == "zigzag":
        return zigzag_order()
    if order == "raster":
        return raster_order()
    raise ConfigError(f"unknown coefficient order {order!r}")


def transform_blocks(plane, params: GTParams) -> tuple:
    """Per-block 2-D transform; returns ``(coefficients, blocks, cache)``."""
    blocks = block_partition(plane)
    out, y = gt_forward_2d(params, blocks)
    return out, blocks, y


def _select(coeffs: np.ndarray, k: int, order: str) -> np.ndarray:
    idx = coefficient_order(order)[:k]
    rows = np.array([i for i, _ in idx])
    cols = np.array([j for _, j in idx])
    # (gh, gw, 8, 8) -> (k, gh, gw)
    return np.moveaxis(coeffs[:, :, rows, cols], -1, 0)


def extract_features(planes: ImagePlanes, gts: PerChannelGT, k: int = 64,
                     order: str = "zigzag", crop: bool = True) -> np.ndarray:
    """Channel-major ``(3k, H/8, W/8)`` features, Y then Cb then Cr."""
    if not 1 <= int(k) <= BLOCK * BLOCK:
        raise ConfigError(f"k must be in [1, 64], got {k}")
    if crop:
        planes = crop_planes(planes)
    feats = []
    for plane, params in zip(planes.planes(), gts.as_tuple()):
        coeffs, _, _ = transform_blocks(plane, params)
        feats.append(_select(coeffs, int(k), order))
    return np.concatenate(feats, axis=0)


def feature_grad_params(planes: ImagePlanes, gts: PerChannelGT, upstream: np.ndarray,
                        k: int = 64, order: str = "zigzag", crop: bool = True) -> list:
    """Gradient of ``<upstream, features>`` w.r.t. each channel's ``(p, p3)``."""
    if crop:
        planes = crop_planes(planes)
    idx = coefficient_order(order)[:k]
    grads = []
    for c, (plane, params) in enumerate(zip(planes.planes(), gts.as_tuple())):
        coeffs, blocks, y = transform_blocks(plane, params)
        g = np.zeros_like(coeffs)
        for slot, (i, j) in enumerate(idx):
            g[:, :, i, j] = upstream[c * k + slot]
        dp, dp3 = gt_grad_params(params, blocks, g, y, ndim=2)
        grads.append(np.append(dp, dp3))
    return grads


def reference_block_dct_features(planes: ImagePlanes, k: int = 64, crop: bool = True) -> np.ndarray:
    """Plain block DCT-II front end; used as an independent baseline."""
    if crop:
        planes = crop_planes(planes)
    n = np.arange(BLOCK)
    c = np.cos(np.pi * n[:, None] * (n[None, :] + 0.5) / BLOCK)
    idx = zigzag_order()[:k]
    feats = []
    for plane in planes.planes():
        h, w = plane.shape
        out = np.empty((k, h // BLOCK, w // BLOCK))
        for bi in range(h // BLOCK):
            for bj in range(w // BLOCK):
                blk = plane[bi * BLOCK:(bi + 1) * BLOCK, bj * BLOCK:(bj + 1) * BLOCK]
                d = c @ blk @ c.T
                for slot, (i, j) in enumerate(idx):
                    out[slot, bi, bj] = d[i, j]
        feats.append(out)
    return np.concatenate(feats, axis=0)


def fit_channel_stats(features: Iterable[np.ndarray]) -> ChannelStats:
    feats = [np.asarray(f, dtype=float) for f in features]
    if not feats:
        raise EmptyDataset("cannot fit statistics on an empty dataset")
    c = feats[0].shape[0]
    if any(f.shape[0] != c for f in feats):
        raise DimensionMismatch("feature tensors disagree on channel count")
    flat = [f.reshape(c, -1) for f in feats]
    count = sum(f.shape[1] for f in flat)
    # two passes in fixed sample order keep the reduction reproducible
    mean = sum(f.sum(axis=1) for f in flat) / count
    var = sum(((f - mean[:, None]) ** 2).sum(axis=1) for f in flat) / count
    std = np.maximum(np.sqrt(var), STD_FLOOR)
    return ChannelStats(mean, std)


def _bshape(stats: ChannelStats, f: np.ndarray):
    shape = (-1,) + (1,) * (f.ndim - 1)
    return stats.mean.reshape(shape), stats.std.reshape(shape)


def normalize(features, stats: ChannelStats) -> np.ndarray:
    f = np.asarray(features, dtype=float)
    mean, std = _bshape(stats, f)
    return (f - mean) / std


def denormalize(features, stats: ChannelStats) -> np.ndarray:
    f = np.asarray(features, dtype=float)
    mean, std = _bshape(stats, f)
    return f * std + mean


def read_ppm(path) -> np.ndarray:
    """Read a binary (P6) PPM with an 8-bit maxval into ``HxWx3 uint8``."""
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_ppm(data)


def parse_ppm(data: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PPM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P6":
        raise FormatError(f"expected P6 PPM, got magic {tokens[0]!r}")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError("non-numeric PPM header field") from None
    if w <= 0 or h <= 0:
        raise EmptyImage("PPM has zero width or height")
    if not 0 < maxval < 256:
        raise FormatError(f"only 8-bit PPM supported, maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    payload = data[pos:pos + w * h * 3]
    if len(payload) != w * h * 3:
        raise FormatError(f"PPM payload has {len(payload)} bytes, expected {w * h * 3}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)


def write_ppm(path, rgb) -> None:
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def extract_many(images: Sequence[np.ndarray], gts: PerChannelGT, k: int = 64,
                 order: str = "zigzag", crop: bool = True, workers: int = 1) -> list:
    """Features for several RGB images; each result lands in its own slot."""
    def one(img):
        return extract_features(rgb_to_ycbcr(img), gts, k=k, order=order, crop=crop)

    if workers <= 1 or len(images) <= 1:
        return [one(img) for img in images]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, images))
