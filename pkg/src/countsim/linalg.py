"""Dense linear algebra for small nonnegative systems.

Operator norms, spectral radii, companion matrices and the fixed-point mean
solve used by the stability checkers.  Matrices are plain ``numpy`` arrays
(row-major nested lists are accepted everywhere and converted eagerly, with
shape and finiteness validated up front).  All functions are pure.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import StationarityError

#: Supported operator-norm kinds.
NORM_KINDS = ("l1", "l2", "linf")

_GELFAND_TOL = 1e-10
_GELFAND_MAX_SQUARINGS = 64
_POWER_REL_TOL = 1e-10
_POWER_MAX_ITER = 10000


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Convert ``values`` to a validated 2-D float array.

    Parameters
    ----------
    values : array-like
        Nested sequences or ndarray, row-major.
    name : str
        Label used in error messages.

    Raises
    ------
    ValueError
        If the input is not two-dimensional or contains non-finite entries.
    """
    m = np.asarray(values, dtype=float)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Convert ``values`` to a validated 1-D float array."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def _require_square(m: np.ndarray, name: str) -> np.ndarray:
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def entrywise_abs(m) -> np.ndarray:
    """Entrywise absolute value, same shape as the input."""
    return np.abs(as_matrix(m))


def matrix_norm(m, kind: str) -> float:
    """Operator norm of a square matrix.

    Parameters
    ----------
    m : array-like
        Square matrix.
    kind : str
        One of ``"l1"`` (max absolute column sum), ``"linf"`` (max absolute
        row sum) or ``"l2"`` (largest singular value, computed by power
        iteration on the Gram matrix).

    Returns
    -------
    float
        The requested norm, nonnegative.
    """
    m = _require_square(as_matrix(m), "matrix")
    if kind not in NORM_KINDS:
        raise ValueError(f"unknown norm kind {kind!r}, expected one of {NORM_KINDS}")
    if kind == "l1":
        return float(np.max(np.sum(np.abs(m), axis=0)))
    if kind == "linf":
        return float(np.max(np.sum(np.abs(m), axis=1)))
    return _largest_singular_value(m)


def _largest_singular_value(m: np.ndarray) -> float:
    """Power iteration on M'M with a deterministic start vector.

    Uses the all-ones start and, if the Rayleigh quotient stagnates without
    meeting the relative tolerance, one perturbed restart.
    """
    gram = m.T @ m
    p = gram.shape[0]
    start = np.ones(p) / np.sqrt(p)
    perturbed = np.ones(p) + 0.01 * np.arange(1, p + 1)
    perturbed /= np.linalg.norm(perturbed)

    best = 0.0
    for v in (start, perturbed):
        rayleigh = None
        for _ in range(_POWER_MAX_ITER):
            w = gram @ v
            norm_w = float(np.linalg.norm(w))
            if norm_w == 0.0:
                # v lies in the kernel; retry from the other start vector.
                break
            v = w / norm_w
            current = float(v @ gram @ v)
            if rayleigh is not None and abs(current - rayleigh) <= _POWER_REL_TOL * max(current, 1e-300):
                return float(np.sqrt(max(current, 0.0)))
            rayleigh = current
        if rayleigh is not None:
            best = max(best, rayleigh)
    return float(np.sqrt(max(best, 0.0)))


def spectral_radius(m) -> float:
    """Spectral radius by repeated squaring with rescaling.

    Squares the matrix up to 64 times, rescaling by the l1 operator norm at
    every stage to avoid overflow/underflow, and returns the limit of
    ``|M^(2^k)|_1 ** (1 / 2^k)``.  Iteration stops once two successive
    estimates differ by less than 1e-10.  Sign-agnostic and safe for
    reducible nonnegative matrices, where naive power iteration can stall.
    """
    m = _require_square(as_matrix(m), "matrix")
    r = m.copy()
    log_scale = 0.0  # log of the accumulated rescaling factor for M^(2^k)
    estimate = None
    for k in range(_GELFAND_MAX_SQUARINGS):
        s = float(np.max(np.sum(np.abs(r), axis=0)))
        if s == 0.0:
            return 0.0  # nilpotent: an exact power vanished
        current = np.exp((log_scale + np.log(s)) / 2.0**k)
        if estimate is not None and abs(current - estimate) < _GELFAND_TOL:
            return float(current)
        estimate = current
        r = r / s
        r = r @ r
        log_scale = 2.0 * (log_scale + np.log(s))
    return float(estimate)


def companion(blocks: Sequence) -> np.ndarray:
    """Block companion matrix of a list of square coefficient blocks.

    For blocks ``E_1, ..., E_q`` of common size ``e`` the result is the
    ``qe x qe`` matrix with first block row ``[E_1 ... E_q]``, an identity of
    size ``(q-1)e`` below-left and zeros below-right.  For ``q == 1`` the
    single block is returned unchanged.

    Raises
    ------
    ValueError
        If block sizes mismatch or any entry is negative.
    """
    if len(blocks) == 0:
        raise ValueError("expected at least one block")
    mats = [_require_square(as_matrix(b, f"block {i}"), f"block {i}") for i, b in enumerate(blocks)]
    e = mats[0].shape[0]
    for i, b in enumerate(mats):
        if b.shape != (e, e):
            raise ValueError(f"block {i} has shape {b.shape}, expected ({e}, {e})")
        if np.any(b < 0):
            raise ValueError(f"block {i} has negative entries")
    q = len(mats)
    if q == 1:
        return mats[0].copy()
    f = np.zeros((q * e, q * e))
    for j, b in enumerate(mats):
        f[:e, j * e : (j + 1) * e] = b
    f[e:, : (q - 1) * e] = np.eye((q - 1) * e)
    return f


def stationary_mean(d, e_total) -> np.ndarray:
    """Unique solution ``m`` of the fixed-point identity ``m = d + E m``.

    Parameters
    ----------
    d : array-like
        Nonnegative offset vector.
    e_total : array-like
        Nonnegative square matrix with spectral radius strictly below 1.

    Returns
    -------
    np.ndarray
        The solution of ``(I - E) m = d`` by a direct linear solve with
        partial pivoting; all components nonnegative.

    Raises
    ------
    StationarityError
        If ``rho(e_total) >= 1``.
    ValueError
        On negative inputs or a numerically singular system.
    """
    d = as_vector(d, "offset")
    e = _require_square(as_matrix(e_total, "coefficient matrix"), "coefficient matrix")
    if d.shape[0] != e.shape[0]:
        raise ValueError(f"offset length {d.shape[0]} does not match matrix size {e.shape[0]}")
    if np.any(d < 0):
        raise ValueError("offset has negative entries")
    if np.any(e < 0):
        raise ValueError("coefficient matrix has negative entries")
    rho = spectral_radius(e)
    if rho >= 1.0:
        raise StationarityError(f"spectral radius {rho:.6f} >= 1, no stationary mean exists")
    try:
        m = np.linalg.solve(np.eye(e.shape[0]) - e, d)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"mean solve failed: {exc}") from exc
    return m
