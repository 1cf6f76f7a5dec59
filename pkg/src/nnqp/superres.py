"""Multi-frame super-resolution via matrix-free nonnegative least squares.

Each low-resolution frame is modeled as decimate(warp(x, shift), r) applied
to an unknown high-resolution image x. Warp is a global sub-pixel
translation realized by bilinear interpolation with zero padding, decimate
is an r-by-r block mean. Every operator weight is nonnegative, so the
normal-equation data (Q = A'A, h = A'b) is element-wise nonnegative and the
multiplicative solver collapses to its ISRA form
x <- x * (h + delta) / (Qx + delta) with Q never materialized.

Images are plain 2-D float arrays here; :class:`nnqp.image.RasterImage`
handles file I/O at the boundaries.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .quadratic import DEFAULT_DELTA


def _shift_int(arr, oy, ox):
    """out[i, j] = arr[i + oy, j + ox], zero outside the array."""
    h, w = arr.shape
    out = np.zeros_like(arr)
    i0, i1 = max(0, -oy), min(h, h - oy)
    j0, j1 = max(0, -ox), min(w, w - ox)
    if i0 < i1 and j0 < j1:
        out[i0:i1, j0:j1] = arr[i0 + oy : i1 + oy, j0 + ox : j1 + ox]
    return out


def _bilinear_taps(shift):
    """The four (offset, weight) taps shared by every pixel of a global warp."""
    dx, dy = float(shift[0]), float(shift[1])
    if not (np.isfinite(dx) and np.isfinite(dy)):
        raise ValueError("shift must be finite, got %r" % (shift,))
    my = int(np.floor(-dy))
    mx = int(np.floor(-dx))
    fy = -dy - my
    fx = -dx - mx
    taps = []
    for a, wy in ((0, 1.0 - fy), (1, fy)):
        for b, wx in ((0, 1.0 - fx), (1, fx)):
            w = wy * wx
            if w != 0.0:
                taps.append((my + a, mx + b, w))
    return taps


def warp_bilinear(img, shift):
    """Translate an image by a sub-pixel shift (dx, dy) with zero padding.

    Output pixel (i, j) samples the input at (i - dy, j - dx) bilinearly,
    so positive dx moves content rightward and positive dy downward. The
    interpolation weights are in [0, 1] and sum to 1 away from the border,
    to at most 1 on it.
    """
    img = np.asarray(img, dtype=float)
    out = np.zeros_like(img)
    for oy, ox, w in _bilinear_taps(shift):
        out += w * _shift_int(img, oy, ox)
    return out


def warp_bilinear_adjoint(img, shift):
    """Exact transpose of :func:`warp_bilinear` with the same shift."""
    img = np.asarray(img, dtype=float)
    out = np.zeros_like(img)
    for oy, ox, w in _bilinear_taps(shift):
        out += w * _shift_int(img, -oy, -ox)
    return out


def decimate(img, r):
    """Downsample by the mean over non-overlapping r-by-r blocks."""
    img = np.asarray(img, dtype=float)
    r = int(r)
    if r < 1:
        raise ValueError("decimation factor must be >= 1")
    h, w = img.shape
    if h % r or w % r:
        raise ValueError("image dims (%d, %d) not divisible by r = %d" % (h, w, r))
    return img.reshape(h // r, r, w // r, r).mean(axis=(1, 3))


def decimate_adjoint(img, r):
    """Exact transpose of :func:`decimate`: spread each value over its block."""
    img = np.asarray(img, dtype=float)
    r = int(r)
    return np.repeat(np.repeat(img, r, axis=0), r, axis=1) / (r * r)


@dataclass
class FrameModel:
    """Acquisition model of one low-resolution frame."""

    shift: tuple  # (dx, dy) in high-resolution pixel units
    decimation_factor: int
    weight: float = 1.0

    def __post_init__(self):
        dx, dy = self.shift
        if not (np.isfinite(dx) and np.isfinite(dy)):
            raise ValueError("shift must be finite")
        if self.decimation_factor < 1:
            raise ValueError("decimation_factor must be >= 1")


class StackedOperator:
    """The stacked forward map of all frames: x -> [D_k S_k x for each k].

    ``forward`` and ``adjoint`` are exact transposes (dot-product test holds
    to roundoff); ``normal_products`` forms the NNLS normal-equation pieces
    without materializing any matrix. Frame weights scale each frame's term
    of the objective 0.5 * sum_k w_k ||D_k S_k x - y_k||^2 and therefore
    enter the normal products but not the plain forward/adjoint pair.
    """

    def __init__(self, frames, hr_shape):
        if not frames:
            raise ValueError("need at least one frame model")
        self.frames = list(frames)
        h, w = hr_shape
        self.hr_shape = (int(h), int(w))
        for fm in self.frames:
            if h % fm.decimation_factor or w % fm.decimation_factor:
                raise ValueError(
                    "hr dims %s not divisible by decimation factor %d"
                    % (self.hr_shape, fm.decimation_factor)
                )

    def lr_shape(self, k):
        r = self.frames[k].decimation_factor
        return (self.hr_shape[0] // r, self.hr_shape[1] // r)

    def forward(self, x):
        """Apply every frame model to a high-resolution image."""
        x = np.asarray(x, dtype=float)
        if x.shape != self.hr_shape:
            raise ValueError("expected image of shape %s, got %s" % (self.hr_shape, x.shape))
        return [
            decimate(warp_bilinear(x, fm.shift), fm.decimation_factor)
            for fm in self.frames
        ]

    def adjoint(self, frames):
        """Apply the transpose map to a list of low-resolution frames."""
        if len(frames) != len(self.frames):
            raise ValueError("expected %d frames, got %d" % (len(self.frames), len(frames)))
        out = np.zeros(self.hr_shape)
        for fm, y in zip(self.frames, frames):
            y = np.asarray(y, dtype=float)
            out += warp_bilinear_adjoint(
                decimate_adjoint(y, fm.decimation_factor), fm.shift
            )
        return out

    def normal_products(self, frames):
        """Matrix-free normal equations for the stacked NNLS problem.

        Returns ``(apply_Q, h)`` with h = sum_k w_k S_k' D_k' y_k flattened
        and apply_Q(x) = sum_k w_k S_k' D_k' D_k S_k x on flattened images.
        Every entry of the implied system is nonnegative, which is what
        licenses the ISRA-form solve in :func:`reconstruct`.
        """
        if len(frames) != len(self.frames):
            raise ValueError("expected %d frames, got %d" % (len(self.frames), len(frames)))

        h_img = np.zeros(self.hr_shape)
        for k, (fm, y) in enumerate(zip(self.frames, frames)):
            y = np.asarray(y, dtype=float)
            if y.shape != self.lr_shape(k):
                raise ValueError(
                    "frame %d has shape %s, expected %s" % (k, y.shape, self.lr_shape(k))
                )
            h_img += fm.weight * warp_bilinear_adjoint(
                decimate_adjoint(y, fm.decimation_factor), fm.shift
            )

        hr_shape = self.hr_shape
        models = self.frames

        def apply_Q(x_flat):
            x = np.asarray(x_flat, dtype=float).reshape(hr_shape)
            out = np.zeros(hr_shape)
            for fm in models:
                z = decimate(warp_bilinear(x, fm.shift), fm.decimation_factor)
                out += fm.weight * warp_bilinear_adjoint(
                    decimate_adjoint(z, fm.decimation_factor), fm.shift
                )
            return out.ravel()

        return apply_Q, h_img.ravel()


def reconstruct(operator, frames, x0=None, max_iter=300, tol_rel_change=1e-10,
                delta=DEFAULT_DELTA):
    """Reconstruct the high-resolution image by the ISRA-form iteration.

    Parameters
    ----------
    operator : StackedOperator
    frames : list of 2-D arrays
        Observed low-resolution frames, one per frame model.
    x0 : 2-D array, optional
        Strictly positive start; defaults to a flat image at the mean
        observed intensity.
    max_iter, tol_rel_change : stopping controls. The iteration also stops
        when the data misfit changes by less than ``tol_rel_change``
        (relative) across a 10-iteration window.

    Returns
    -------
    x : 2-D array
        Reconstruction (nonnegative, not clamped to [0, 1]).
    misfits : list of float
        0.5 * sum_k w_k ||D_k S_k x - y_k||^2 per iteration; monotonically
        non-increasing.
    """
    frames = [np.asarray(y, dtype=float) for y in frames]
    for k, y in enumerate(frames):
        if y.shape != operator.lr_shape(k):
            raise ValueError(
                "frame %d has shape %s, expected %s" % (k, y.shape, operator.lr_shape(k))
            )
    apply_Q, h = operator.normal_products(frames)

    if x0 is None:
        level = max(float(np.mean([y.mean() for y in frames])), 1e-3)
        x = np.full(operator.hr_shape, level).ravel()
    else:
        x = np.asarray(x0, dtype=float).reshape(-1).copy()
        if x.size != h.size:
            raise ValueError("x0 has wrong size")
        if not np.all(x > 0):
            raise ValueError("x0 must be strictly positive")

    const = 0.5 * sum(
        fm.weight * float(np.sum(y * y)) for fm, y in zip(operator.frames, frames)
    )
    misfits = []
    window = []
    for _ in range(max_iter):
        Qx = apply_Q(x)
        misfit = 0.5 * float(x @ Qx) - float(x @ h) + const
        misfits.append(misfit)
        window.append(misfit)
        if len(window) > 10:
            old = window.pop(0)
            if abs(old - misfit) <= tol_rel_change * (1.0 + abs(old)):
                break
        x = x * (h + delta) / (Qx + delta)
    return x.reshape(operator.hr_shape), misfits


def register_frames(frames, r, search_radius=2.0, grid_step=0.25, refine_step=0.05):
    """Estimate per-frame translations against the first frame.

    Grid-searches the SSD between each frame and the shifted first frame
    over translations up to ``search_radius`` high-resolution pixels
    (coarse step ``grid_step``, refined at ``refine_step`` around the
    coarse optimum). Frame 0 is the reference and gets shift (0, 0).

    The comparison runs through the forward model: the reference is
    bilinearly upsampled, warped by the candidate, and decimated back, and
    each target frame is passed through the same upsample-decimate pair.
    Routing both sides through identical resampling cancels most of the
    interpolation-blur bias that plagues a direct low-resolution SSD. The
    SSD is evaluated on an interior crop so zero-padded borders do not
    bias the search.
    """
    if len(frames) < 2:
        raise ValueError("registration needs at least 2 frames")
    frames = [np.asarray(y, dtype=float) for y in frames]
    shape = frames[0].shape
    for y in frames[1:]:
        if y.shape != shape:
            raise ValueError("all frames must share one shape for registration")
    r = int(r)

    margin = int(np.ceil(search_radius / r)) + 1
    if shape[0] <= 2 * margin or shape[1] <= 2 * margin:
        raise ValueError("frames too small for search radius %g" % search_radius)
    sl = np.s_[margin : shape[0] - margin, margin : shape[1] - margin]

    def lift(y):
        return ndimage.zoom(y, r, order=1, mode="nearest", grid_mode=True)

    ref_hr = lift(frames[0])

    def search(target, centers, step, radius):
        offsets = np.arange(-radius, radius + step / 2, step)
        best = (np.inf, 0.0, 0.0)
        for dy in centers[1] + offsets:
            for dx in centers[0] + offsets:
                pred = decimate(warp_bilinear(ref_hr, (dx, dy)), r)
                diff = pred[sl] - target[sl]
                v = float(np.sum(diff * diff))
                if v < best[0]:
                    best = (v, dx, dy)
        return best[1], best[2]

    models = [FrameModel(shift=(0.0, 0.0), decimation_factor=r)]
    for y in frames[1:]:
        target = decimate(lift(y), r)
        dx, dy = search(target, (0.0, 0.0), grid_step, search_radius)
        dx, dy = search(target, (dx, dy), refine_step, grid_step)
        models.append(FrameModel(shift=(float(dx), float(dy)), decimation_factor=r))
    return models


def upsample_nearest(img, r):
    """Nearest-neighbor upsampling baseline for comparisons."""
    return np.repeat(np.repeat(np.asarray(img, dtype=float), r, axis=0), r, axis=1)
