"""Interactive color image labeling by multiplicative MRF relaxation.

A probability measure field X holds one nonnegative value per pixel and
class; user-provided seed pixels are clamped to their class. Each sweep
applies the multiplicative update

    X^k_ij <- X^k_ij * (2a*S^k_ij + (D^k_ij)^- + lam_ij + delta)
                       / (a*X^k_ij*W_ij + a*S^k_ij + (D^k_ij)^+ + delta)

where S^k_ij is the edge-weighted sum of the four neighbors' values,
W_ij the sum of edge weights, D the per-class data cost, and lam the
per-pixel multiplier of the sum-to-one constraint, itself updated
multiplicatively as lam_ij <- lam_ij / sum_k X^k_ij. This is the general
multiplicative NNQP rule applied to the smoothness-plus-data energy with
the constraint terms split into nonnegative parts.

The field is capped at 1 after each sweep. The cap matters: the
interleaved multiplier update is area-preserving around the constrained
optimum (it circles instead of settling), and saturation at the
probability ceiling is what supplies the missing dissipation. Values above
1 are meaningless for a per-pixel probability anyway.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .quadratic import DEFAULT_DELTA

# Probability ceiling applied after every sweep.
X_MAX = 1.0

# Multiplicative iterates must stay strictly positive; anything smaller is
# clipped up to this floor instead of underflowing to an absorbing zero.
X_FLOOR = 1e-30

# Off-label value used when clamping seed pixels (renormalized afterwards).
SEED_OFF = 1e-6

MIN_SEEDS_PER_CLASS = 4
COVARIANCE_RIDGE = 1e-4


@dataclass
class ClassModel:
    """Gaussian color model of one class: mean, covariance, log-determinant."""

    mean: np.ndarray
    covariance: np.ndarray
    log_det: float


@dataclass
class MeasureField:
    """Per-pixel, per-class probabilities X (K, H, W) and multipliers lam (H, W)."""

    X: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        lam = np.asarray(self.lam, dtype=float)
        if X.ndim != 3:
            raise ValueError("X must have shape (K, H, W)")
        if lam.shape != X.shape[1:]:
            raise ValueError("lam must have shape (H, W) matching X")
        if (X <= 0).any():
            raise ValueError("X must be strictly positive")
        if (lam <= 0).any():
            raise ValueError("lam must be strictly positive")
        self.X = X
        self.lam = lam

    @property
    def num_classes(self):
        return self.X.shape[0]

    @property
    def shape(self):
        return self.X.shape[1:]


@dataclass
class EdgeWeights:
    """Cosine-similarity weights of the 4-neighborhood edges.

    ``horizontal[i, j]`` weights the edge between pixels (i, j) and
    (i, j+1); ``vertical[i, j]`` between (i, j) and (i+1, j). Symmetry of
    the weight relation is inherent in this storage: each undirected edge
    is stored once.
    """

    horizontal: np.ndarray  # (H, W-1)
    vertical: np.ndarray  # (H-1, W)

    def weight_sums(self):
        """Per-pixel sum of incident edge weights."""
        h, v = self.horizontal, self.vertical
        H = h.shape[0]
        W = v.shape[1]
        out = np.zeros((H, W))
        out[:, :-1] += h
        out[:, 1:] += h
        out[:-1, :] += v
        out[1:, :] += v
        return out

    def neighbor_sum(self, X):
        """Edge-weighted neighbor sums, per class: S[k] = sum_n w * X[k, n]."""
        h, v = self.horizontal, self.vertical
        S = np.zeros_like(X)
        S[:, :, :-1] += h * X[:, :, 1:]
        S[:, :, 1:] += h * X[:, :, :-1]
        S[:, :-1, :] += v * X[:, 1:, :]
        S[:, 1:, :] += v * X[:, :-1, :]
        return S


def edge_weight(p, q):
    """Cosine of the angle between two pixel color vectors.

    Near 1 when the colors point the same way (likely same class), near 0
    when they are orthogonal. Vectors with norm below 1e-12 are treated as
    matching darkness: weight 1.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    np_, nq = np.linalg.norm(p), np.linalg.norm(q)
    if np_ < 1e-12 or nq < 1e-12:
        return 1.0
    return float(p @ q) / (np_ * nq)


def edge_weight_field(pixels):
    """Vectorized :func:`edge_weight` over all 4-neighborhood edges."""
    pixels = np.asarray(pixels, dtype=float)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError("pixels must be (H, W, 3)")

    def cosine(a, b):
        na = np.linalg.norm(a, axis=-1)
        nb = np.linalg.norm(b, axis=-1)
        dot = np.sum(a * b, axis=-1)
        dark = (na < 1e-12) | (nb < 1e-12)
        denom = np.where(dark, 1.0, na * nb)
        return np.where(dark, 1.0, dot / denom)

    return EdgeWeights(
        horizontal=cosine(pixels[:, :-1], pixels[:, 1:]),
        vertical=cosine(pixels[:-1, :], pixels[1:, :]),
    )


def fit_class_models(pixels, seeds, num_classes):
    """Per-class sample mean and ridge-regularized covariance of seed colors.

    Every class 1..num_classes needs at least 4 seed pixels; the covariance
    gets +1e-4*I so identically colored seeds still yield an invertible
    model.
    """
    pixels = np.asarray(pixels, dtype=float)
    seeds = np.asarray(seeds)
    if seeds.shape != pixels.shape[:2]:
        raise ValueError("seed mask shape %s does not match image %s"
                         % (seeds.shape, pixels.shape[:2]))
    models = []
    for k in range(1, num_classes + 1):
        colors = pixels[seeds == k]
        if colors.shape[0] < MIN_SEEDS_PER_CLASS:
            raise ValueError(
                "class %d has %d seed pixels, need at least %d"
                % (k, colors.shape[0], MIN_SEEDS_PER_CLASS)
            )
        mean = colors.mean(axis=0)
        dev = colors - mean
        cov = dev.T @ dev / (colors.shape[0] - 1) + COVARIANCE_RIDGE * np.eye(3)
        sign, log_det = np.linalg.slogdet(cov)
        if sign <= 0:
            raise ValueError("covariance of class %d is not positive definite" % k)
        models.append(ClassModel(mean=mean, covariance=cov, log_det=float(log_det)))
    return models


def data_cost(pixels, models):
    """Per-pixel, per-class assignment cost, shape (K, H, W).

    Half the Mahalanobis distance to the class mean plus half the
    log-determinant of the class covariance (the Gaussian negative
    log-likelihood up to a shared constant). Costs can be negative when a
    covariance determinant is below 1.
    """
    pixels = np.asarray(pixels, dtype=float)
    H, W = pixels.shape[:2]
    cost = np.empty((len(models), H, W))
    flat = pixels.reshape(-1, 3)
    for k, model in enumerate(models):
        dev = flat - model.mean
        sol = np.linalg.solve(model.covariance, dev.T).T
        maha = np.sum(dev * sol, axis=1)
        cost[k] = (0.5 * maha + 0.5 * model.log_det).reshape(H, W)
    return cost


def clamp_seeds(X, seeds):
    """Force seed pixels to their class: 1 on the label, 1e-6 elsewhere,
    renormalized to the simplex."""
    seeds = np.asarray(seeds)
    K = X.shape[0]
    total = 1.0 + (K - 1) * SEED_OFF
    for k in range(1, K + 1):
        sel = seeds == k
        if not sel.any():
            continue
        X[:, sel] = SEED_OFF / total
        X[k - 1, sel] = 1.0 / total
    return X


def _augmented_energy(X, lam, weights, cost, alpha):
    """Lagrangian monitored during sweeps (lam frozen): smoothness + data
    costs + constraint term, written so one multiplicative sweep cannot
    increase it."""
    h, v = weights.horizontal, weights.vertical
    smooth = 0.0
    smooth += float(np.sum(h * (X[:, :, 1:] - X[:, :, :-1]) ** 2))
    smooth += float(np.sum(v * (X[:, 1:, :] - X[:, :-1, :]) ** 2))
    data = float(np.sum(cost * X))
    constraint = float(np.sum(lam * (1.0 - X.sum(axis=0))))
    return 0.5 * alpha * smooth + data + constraint


def label_step(field, weights, cost, alpha, delta=DEFAULT_DELTA, seeds=None):
    """One sweep: multiplicative field update, then multiplier update.

    Phase (a) reads the old field and writes a new one (neighbor sums use
    old values throughout, so pixel order cannot matter); the new field is
    capped at 1 and floored just above 0. Seed pixels, when given, are then
    clamped to their class. Phase (b) divides each pixel's multiplier by
    its new class sum, which leaves lam fixed exactly when the sum-to-one
    constraint holds.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    X, lam = field.X, field.lam
    cost = np.asarray(cost, dtype=float)
    if cost.shape != X.shape:
        raise ValueError("cost must have shape %s" % (X.shape,))

    S = weights.neighbor_sum(X)
    wsum = weights.weight_sums()
    cost_neg = np.maximum(-cost, 0.0)
    cost_pos = np.maximum(cost, 0.0)

    num = 2.0 * alpha * S + cost_neg + lam + delta
    den = alpha * X * wsum + alpha * S + cost_pos + delta
    X_new = np.clip(X * (num / den), X_FLOOR, X_MAX)
    if seeds is not None:
        clamp_seeds(X_new, seeds)
    lam_new = lam / X_new.sum(axis=0)
    return MeasureField(X=X_new, lam=lam_new)


def simplex_violation(field):
    """Worst per-pixel deviation of the class sums from 1."""
    return float(np.abs(field.X.sum(axis=0) - 1.0).max())


def label_map(field):
    """Hard labels 1..K by per-pixel argmax; ties go to the smallest class."""
    return field.X.argmax(axis=0) + 1


# Fixed palette for rendering label maps; classes beyond ten wrap around.
PALETTE = np.array([
    (0.894, 0.102, 0.110),
    (0.216, 0.494, 0.722),
    (0.302, 0.686, 0.290),
    (0.596, 0.306, 0.639),
    (1.000, 0.498, 0.000),
    (0.969, 0.906, 0.200),
    (0.651, 0.337, 0.157),
    (0.969, 0.506, 0.749),
    (0.600, 0.600, 0.600),
    (0.122, 0.471, 0.706),
])


def labels_to_rgb(labels):
    """Render a 1..K label map as an RGB image with the fixed palette."""
    labels = np.asarray(labels)
    return PALETTE[(labels - 1) % len(PALETTE)]


def label_solve(pixels, seeds, num_classes, alpha=1.0, tol=1e-4, max_sweeps=500,
                delta=DEFAULT_DELTA):
    """Label an RGB image from seed pixels.

    Parameters
    ----------
    pixels : (H, W, 3) array
        RGB image in [0, 1].
    seeds : (H, W) int array
        0 = unlabeled, v in 1..num_classes = seed of class v; every class
        needs at least 4 seeds.
    alpha : float
        Smoothness weight; 0 reduces to per-pixel minimum-cost assignment.
    tol : float
        Stop when the relative Frobenius change of the field across one
        sweep drops to ``tol``.

    Returns
    -------
    field : MeasureField
    labels : (H, W) int array of classes 1..num_classes
    info : dict with ``sweeps``, ``simplex_violation``, ``converged`` and
        ``surrogate_increases`` (sweeps on which the frozen-multiplier
        energy went up; warned about, never fatal, because the interleaved
        multiplier update carries no monotonicity guarantee).
    """
    pixels = np.asarray(pixels, dtype=float)
    models = fit_class_models(pixels, seeds, num_classes)
    cost = data_cost(pixels, models)
    weights = edge_weight_field(pixels)

    K = num_classes
    H, W = pixels.shape[:2]
    X = np.full((K, H, W), 1.0 / K)
    clamp_seeds(X, seeds)
    field = MeasureField(X=X, lam=np.ones((H, W)))

    info = {"sweeps": 0, "converged": False, "surrogate_increases": 0}
    for sweep in range(1, max_sweeps + 1):
        before = _augmented_energy(field.X, field.lam, weights, cost, alpha)
        new_field = label_step(field, weights, cost, alpha, delta=delta, seeds=seeds)
        after = _augmented_energy(new_field.X, field.lam, weights, cost, alpha)
        if after > before + 1e-8 * (1.0 + abs(before)):
            info["surrogate_increases"] += 1
            warnings.warn(
                "frozen-multiplier energy increased on sweep %d (%.3e -> %.3e)"
                % (sweep, before, after),
                RuntimeWarning,
                stacklevel=2,
            )
        change = float(np.linalg.norm(new_field.X - field.X))
        scale = float(np.linalg.norm(field.X))
        field = new_field
        info["sweeps"] = sweep
        if change <= tol * scale:
            info["converged"] = True
            break
    info["simplex_violation"] = simplex_violation(field)
    return field, label_map(field), info
