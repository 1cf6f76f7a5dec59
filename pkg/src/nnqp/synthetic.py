"""Seeded generators for random problems and synthetic imagery.

Shared by the test suite, the benchmark command, and the demo scripts so
that every consumer draws from the same, reproducible distributions.
"""

import numpy as np

from .quadratic import Quadratic, symmetrize


def random_orthogonal(n, rng):
    """Haar-ish orthogonal matrix via QR with sign fixing."""
    M = rng.standard_normal((n, n))
    Qmat, R = np.linalg.qr(M)
    return Qmat * np.sign(np.diag(R))


def random_pd_problem(n, cond, rng, h_scale=1.0):
    """Random symmetric PD problem with eigenvalues log-spaced in [1, cond]."""
    if n == 1:
        Q = np.array([[1.0]])
    else:
        eigs = np.logspace(0.0, np.log10(cond), n)
        V = random_orthogonal(n, rng)
        Q = symmetrize(V @ np.diag(eigs) @ V.T)
    h = h_scale * rng.standard_normal(n)
    return Quadratic(Q, h)


def random_nonneg_problem(n, rng):
    """Random PD problem with element-wise nonnegative Q and h (ISRA-valid)."""
    A = np.abs(rng.standard_normal((2 * n, n)))
    b = np.abs(rng.standard_normal(2 * n))
    q = Quadratic.from_least_squares(A, b)
    # from_least_squares symmetrizes, which cannot create negative entries
    # from nonnegative A, but make this robust to roundoff anyway.
    return Quadratic(np.maximum(q.Q, 0.0), np.maximum(q.h, 0.0))


def smooth_scene(height, width, rng, blobs=40, lo=0.1, hi=0.9):
    """Smooth positive test image: a sum of random Gaussian bumps.

    Smoothness matters for the super-resolution tests because sub-pixel
    registration needs gradients, not white noise.
    """
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    img = np.zeros((height, width))
    for _ in range(blobs):
        cy = rng.uniform(0, height)
        cx = rng.uniform(0, width)
        sig = rng.uniform(min(height, width) / 30.0, min(height, width) / 8.0)
        amp = rng.uniform(-1.0, 1.0)
        img += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sig**2))
    img -= img.min()
    peak = img.max()
    if peak > 0:
        img /= peak
    return lo + (hi - lo) * img


def two_region_image(height, width, rng, color_a=(0.85, 0.15, 0.1),
                     color_b=(0.1, 0.2, 0.85), noise=0.04):
    """RGB image split into left/right hue regions, plus its ground truth.

    Returns (pixels, labels) with pixels in [0, 1], shape (H, W, 3), and
    labels in {1, 2} of shape (H, W).
    """
    half = width // 2
    pixels = np.empty((height, width, 3))
    pixels[:, :half] = color_a
    pixels[:, half:] = color_b
    pixels += noise * rng.standard_normal(pixels.shape)
    pixels = np.clip(pixels, 0.0, 1.0)
    labels = np.ones((height, width), dtype=int)
    labels[:, half:] = 2
    return pixels, labels


def seed_mask_from_labels(labels, per_class, rng):
    """Sample ``per_class`` seed pixels per class from a ground-truth map."""
    mask = np.zeros_like(labels)
    for k in np.unique(labels):
        flat = np.flatnonzero(labels == k)
        pick = rng.choice(flat, size=per_class, replace=False)
        mask.flat[pick] = k
    return mask
