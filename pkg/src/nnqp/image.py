"""Raster image container and binary netpbm (PGM/PPM) reading and writing.

Images are float arrays scaled to [0, 1] on load. Only the binary formats
P5 (grayscale) and P6 (RGB) at 8 bits, maxval 255 are supported; writes are
canonical and bit-exact: ``P5\\n<w> <h>\\n255\\n<raw>``.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class RasterImage:
    """Nonnegative raster, shape (H, W) for grayscale or (H, W, 3) for RGB.

    Intensities are nonnegative floats; they live in [0, 1] right after a
    load and are clamped to [0, 1] only when written back out, so solver
    intermediates may exceed 1 without fuss.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim == 2:
            pass
        elif px.ndim == 3 and px.shape[2] == 3:
            pass
        else:
            raise ValueError("pixels must be (H, W) or (H, W, 3), got %s" % (px.shape,))
        if px.size == 0:
            raise ValueError("image must be non-empty")
        if not np.isfinite(px).all():
            raise ValueError("pixel values must be finite")
        if (px < 0).any():
            raise ValueError("pixel values must be nonnegative")
        self.pixels = px

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def channels(self):
        return 1 if self.pixels.ndim == 2 else 3


def _read_netpbm_header(data, magic):
    # Header tokens are whitespace separated; '#' starts a comment to EOL.
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise ValueError("truncated netpbm header")
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
            continue
        if c.isspace():
            pos += 1
            continue
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != magic:
        raise ValueError("expected %s file, got magic %r" % (magic.decode(), tokens[0]))
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError("only maxval 255 supported, got %d" % maxval)
    # Exactly one whitespace byte separates the header from raster data.
    return width, height, pos + 1


def read_pgm(path):
    """Read a binary PGM (P5, 8-bit) into a grayscale RasterImage."""
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, start = _read_netpbm_header(data, b"P5")
    raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=start)
    if raw.size != width * height:
        raise ValueError("PGM raster shorter than header promises")
    return RasterImage(raw.reshape(height, width).astype(float) / 255.0)


def read_ppm(path):
    """Read a binary PPM (P6, 8-bit) into an RGB RasterImage."""
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, start = _read_netpbm_header(data, b"P6")
    raw = np.frombuffer(data, dtype=np.uint8, count=3 * width * height, offset=start)
    if raw.size != 3 * width * height:
        raise ValueError("PPM raster shorter than header promises")
    return RasterImage(raw.reshape(height, width, 3).astype(float) / 255.0)


def _quantize(pixels):
    return (np.clip(pixels, 0.0, 1.0) * 255.0).round().astype(np.uint8)


def write_pgm(path, image):
    """Write a grayscale image (RasterImage or 2-D array) as binary PGM."""
    px = image.pixels if isinstance(image, RasterImage) else np.asarray(image, dtype=float)
    if px.ndim != 2:
        raise ValueError("PGM output requires a single-channel image")
    height, width = px.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(_quantize(px).tobytes())


def write_ppm(path, image):
    """Write an RGB image (RasterImage or (H, W, 3) array) as binary PPM."""
    px = image.pixels if isinstance(image, RasterImage) else np.asarray(image, dtype=float)
    if px.ndim != 3 or px.shape[2] != 3:
        raise ValueError("PPM output requires an (H, W, 3) image")
    height, width = px.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (width, height))
        fh.write(_quantize(px).tobytes())


def read_label_mask(path, num_classes):
    """Read a seed/label mask from PGM: gray 0 = unlabeled, v = class v.

    The stored file carries raw class indices (not intensity-scaled), so
    this bypasses the [0, 1] normalization of :func:`read_pgm`.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, start = _read_netpbm_header(data, b"P5")
    raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=start)
    mask = raw.reshape(height, width).astype(int)
    if mask.max(initial=0) > num_classes:
        raise ValueError(
            "mask contains label %d but only %d classes declared"
            % (mask.max(), num_classes)
        )
    return mask


def write_label_mask(path, mask):
    """Write an integer label mask (0 = unlabeled) as raw-valued PGM."""
    mask = np.asarray(mask)
    if mask.min(initial=0) < 0 or mask.max(initial=0) > 255:
        raise ValueError("mask values must fit in a byte")
    height, width = mask.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(mask.astype(np.uint8).tobytes())


def psnr(reference, test, peak=1.0):
    """Peak signal-to-noise ratio in dB between two same-shaped arrays."""
    reference = np.asarray(reference, dtype=float)
    test = np.asarray(test, dtype=float)
    mse = float(np.mean((reference - test) ** 2))
    if mse == 0:
        return np.inf
    return 10.0 * np.log10(peak**2 / mse)
