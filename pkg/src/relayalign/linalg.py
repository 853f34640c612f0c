"""Small dense linear-algebra helpers shared across the package."""

from __future__ import annotations

import numpy as np


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization (column-major order)."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(x: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(x).reshape((rows, cols), order="F")


def herm(a: np.ndarray) -> np.ndarray:
    """Symmetrize an analytically-Hermitian product to suppress round-off."""
    return 0.5 * (a + a.conj().T)


def is_hermitian(a: np.ndarray, tol: float = 1e-10) -> bool:
    scale = max(1.0, float(np.linalg.norm(a)))
    return bool(np.linalg.norm(a - a.conj().T) <= tol * scale)


def fix_column_phases(w: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-modulus entry is real positive.

    Makes eigenvector-based updates reproducible across runs; ties inside a
    column resolve to the first index of the maximum modulus.
    """
    out = w.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = int(np.argmax(np.abs(col)))
        pivot = col[idx]
        if np.abs(pivot) > 0:
            out[:, j] = col * (pivot.conj() / np.abs(pivot))
    return out


def smallest_eigvecs(z: np.ndarray, count: int) -> np.ndarray:
    """Orthonormal eigenvectors of the `count` smallest eigenvalues of Hermitian z.

    Eigenvalues come back sorted ascending; equal-eigenvalue blocks keep the
    deterministic order of the eigen routine, then columns are phase-fixed.
    """
    _, vecs = np.linalg.eigh(herm(z))
    return fix_column_phases(vecs[:, :count])
