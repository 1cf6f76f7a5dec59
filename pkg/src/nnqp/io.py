"""Text and Matrix Market readers for problem data, and the frame manifest.

Matrices and vectors load either from whitespace-delimited text (one row
per line) or from Matrix Market files (array or coordinate format,
detected by the ``%%MatrixMarket`` banner). Vectors are written one value
per line at round-trip precision.
"""

import os

import numpy as np
import scipy.io
import scipy.sparse


def _is_matrix_market(path):
    with open(path, "rb") as fh:
        return fh.read(14) == b"%%MatrixMarket"


def load_matrix(path):
    """Load a dense matrix from Matrix Market or whitespace text."""
    if _is_matrix_market(path):
        M = scipy.io.mmread(path)
        if scipy.sparse.issparse(M):
            M = M.toarray()
        return np.asarray(M, dtype=float)
    return np.loadtxt(path, ndmin=2, dtype=float)


def load_vector(path):
    """Load a vector; a Matrix Market or text matrix with one row/column is
    flattened, anything wider is an error."""
    if _is_matrix_market(path):
        M = scipy.io.mmread(path)
        if scipy.sparse.issparse(M):
            M = M.toarray()
        arr = np.asarray(M, dtype=float)
    else:
        arr = np.loadtxt(path, dtype=float)
    arr = np.atleast_1d(arr)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValueError("%s does not hold a vector (shape %s)" % (path, arr.shape))
    return arr


def save_vector(path, x):
    """Write a vector as text, one value per line, at full precision."""
    np.savetxt(path, np.asarray(x, dtype=float), fmt="%.17g")


def read_frame_manifest(path):
    """Parse a super-resolution frame manifest.

    One frame per line: ``path dx dy`` for a known shift in high-resolution
    pixels, or ``path auto`` to request registration. Blank lines and lines
    starting with ``#`` are skipped; frame paths are resolved relative to
    the manifest's directory. Returns a list of (path, shift) with shift
    None for ``auto`` entries.
    """
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) == 2 and parts[1] == "auto":
                shift = None
            elif len(parts) == 3:
                try:
                    shift = (float(parts[1]), float(parts[2]))
                except ValueError:
                    raise ValueError(
                        "%s:%d: expected 'path dx dy' or 'path auto'" % (path, lineno)
                    )
            else:
                raise ValueError(
                    "%s:%d: expected 'path dx dy' or 'path auto'" % (path, lineno)
                )
            frame_path = parts[0]
            if not os.path.isabs(frame_path):
                frame_path = os.path.join(base, frame_path)
            entries.append((frame_path, shift))
    if not entries:
        raise ValueError("manifest %s lists no frames" % path)
    return entries
