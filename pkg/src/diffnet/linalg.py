"""Small linear-algebra helpers shared across the package.

Complex vectors use the circular (proper) Gaussian convention: unit-variance
scalars have independent real and imaginary parts with variance 1/2 each.
``vec`` stacks columns, so vec(A X B) = (B^T kron A) vec(X) holds.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "crandn",
    "psd_factor",
    "kron_lift",
    "vec",
    "unvec",
    "db10",
    "hermitize",
    "hermitian_residual",
    "min_eig_floor",
    "spectral_radius",
]


def crandn(gen: np.random.Generator, shape) -> np.ndarray:
    """Draw circular complex standard normal samples (E|x|^2 = 1)."""
    re = gen.standard_normal(shape)
    im = gen.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def psd_factor(r: np.ndarray) -> np.ndarray:
    """Factor L of a PSD matrix with L @ L^H = r.

    Eigendecomposition based, so rank-deficient covariances are accepted;
    tiny negative eigenvalues from rounding are clipped to zero.
    """
    r = np.asarray(r, dtype=complex)
    w, u = np.linalg.eigh(hermitize(r))
    w = np.clip(w, 0.0, None)
    return u * np.sqrt(w)[None, :]


def kron_lift(a: np.ndarray, m: int) -> np.ndarray:
    """Kronecker lift a -> a kron I_m acting on stacked m-blocks."""
    return np.kron(np.asarray(a), np.eye(m))


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.reshape(x, (-1,), order="F")


def unvec(x: np.ndarray, rows: int) -> np.ndarray:
    return np.reshape(x, (rows, -1), order="F")


def db10(x) -> np.ndarray:
    """Power quantity to decibels; zeros map to -inf without warnings."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def hermitize(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + x.conj().T)


def hermitian_residual(x: np.ndarray) -> float:
    """Relative deviation from Hermitian symmetry."""
    x = np.asarray(x)
    scale = max(float(np.linalg.norm(x)), 1.0)
    return float(np.linalg.norm(x - x.conj().T)) / scale


def min_eig_floor(x: np.ndarray) -> float:
    """Smallest eigenvalue normalized so PSD checks can use a relative floor."""
    w = np.linalg.eigvalsh(hermitize(np.asarray(x, dtype=complex)))
    scale = max(float(w[-1]), 1.0)
    return float(w[0]) / scale


def spectral_radius(x: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(x)))))
