"""Affine-invariant geometry on symmetric positive-definite matrices.

Covariance features and classifier prototypes live on the SPD manifold;
this module provides the matrix functions, the metric, and the Riemannian
(Karcher) mean used by the minimum-distance-to-mean classifier.
All matrix functions go through a symmetrized eigendecomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYMMETRY_TOL = 1e-12


class NotSpdError(ValueError):
    """Raised when an input is not symmetric positive-definite."""


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def check_spd(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate symmetry and positive-definiteness; return the symmetrized array.

    Raises
    ------
    NotSpdError
        If ``a`` is not square, not finite, not symmetric within tolerance
        relative to its scale, or has a non-positive eigenvalue.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSpdError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotSpdError(f"{name} contains non-finite entries")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > SYMMETRY_TOL * scale * a.shape[0]:
        raise NotSpdError(f"{name} is not symmetric")
    a = _sym(a)
    w = np.linalg.eigvalsh(a)
    if w[0] <= 0:
        raise NotSpdError(f"{name} has non-positive eigenvalue {w[0]:.3e}")
    return a


def _eig_apply(a: np.ndarray, fn) -> np.ndarray:
    w, v = np.linalg.eigh(_sym(a))
    return _sym((v * fn(w)) @ v.T)


def logm(a: np.ndarray) -> np.ndarray:
    """Matrix logarithm of an SPD matrix."""
    return _eig_apply(a, np.log)


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of a symmetric matrix."""
    return _eig_apply(a, np.exp)


def sqrtm(a: np.ndarray) -> np.ndarray:
    """Principal square root of an SPD matrix."""
    return _eig_apply(a, np.sqrt)


def invsqrtm(a: np.ndarray) -> np.ndarray:
    """Inverse principal square root of an SPD matrix."""
    return _eig_apply(a, lambda w: 1.0 / np.sqrt(w))


def riemann_distance(a: np.ndarray, b: np.ndarray, *, validate: bool = True) -> float:
    """Affine-invariant distance between two SPD matrices.

    Frobenius norm of ``log(a^{-1/2} b a^{-1/2})``; equivalently the root
    sum of squared log generalized eigenvalues.  Symmetric in its arguments
    and invariant under congruence ``a -> g' a g``, ``b -> g' b g``.
    """
    if validate:
        a = check_spd(a, "first argument")
        b = check_spd(b, "second argument")
    is_a = invsqrtm(a)
    w = np.linalg.eigvalsh(_sym(is_a @ b @ is_a))
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def geodesic_midpoint(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Closed-form midpoint of the geodesic between two SPD matrices."""
    sa = sqrtm(a)
    isa = invsqrtm(a)
    return _sym(sa @ sqrtm(_sym(isa @ b @ isa)) @ sa)


@dataclass
class KarcherInfo:
    converged: bool
    iterations: int
    residual: float


def karcher_mean(
    matrices,
    *,
    tol: float = 1e-8,
    max_iter: int = 50,
    return_info: bool = False,
):
    """Riemannian mean of SPD matrices by iterated tangent-space averaging.

    Repeats ``M <- M^{1/2} exp(mean_i log(M^{-1/2} A_i M^{-1/2})) M^{1/2}``
    until the tangent-mean Frobenius norm drops below ``tol`` or ``max_iter``
    sweeps have run.  Non-convergence is flagged in the returned info, not
    raised, so callers can decide what residual they tolerate.
    """
    mats = [check_spd(m, f"matrices[{i}]") for i, m in enumerate(matrices)]
    if not mats:
        raise ValueError("karcher_mean needs at least one matrix")
    if len(mats) == 1:
        m = mats[0]
        return (m, KarcherInfo(True, 0, 0.0)) if return_info else m

    mean = _sym(np.mean(mats, axis=0))
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        s = sqrtm(mean)
        is_ = invsqrtm(mean)
        tangent = np.zeros_like(mean)
        for m in mats:
            tangent += logm(_sym(is_ @ m @ is_))
        tangent /= len(mats)
        residual = float(np.linalg.norm(tangent, "fro"))
        mean = _sym(s @ expm(tangent) @ s)
        if residual < tol:
            break
    info = KarcherInfo(residual < tol, iterations, residual)
    if return_info:
        return mean, info
    return mean


def random_spd(dim: int, rng: np.random.Generator, *, scale: float = 1.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues bounded away from zero."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    w = np.exp(rng.standard_normal(dim) * scale)
    return _sym((q * w) @ q.T)
