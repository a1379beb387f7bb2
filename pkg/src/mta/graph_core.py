"""Graph Laplacians and the MTA weight-matrix solvers.

The MTA estimate of ``T`` means is ``W @ ybar`` with

    W = (I + (gamma / T) * Sigma @ L)^-1,

where ``Sigma`` is the diagonal covariance of the sample means and ``L`` the
graph Laplacian of the task-similarity matrix.  ``W`` always exists and is
right-stochastic, so every estimate is a convex combination of the sample
means.

Diagonal covariances are passed around as 1-D arrays of their diagonal.
"""

import math

import numpy as np

from .errors import DimensionError, InternalError, InvalidInputError, InvalidSimilarityError

#: Negative weights above this are rounding dust and are clamped to zero.
NEGATIVE_DUST = 1e-12
#: Allowed deviation of a weight-matrix row sum from one.
ROW_SUM_TOL = 1e-10


def validate_similarity(A):
    """Return ``A`` as a float array after checking it is square, finite and >= 0."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"similarity matrix must be square, got shape {A.shape}")
    bad = ~np.isfinite(A)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise InvalidSimilarityError(f"similarity entry {idx} is not finite", index=idx)
    neg = A < 0
    if neg.any():
        idx = tuple(int(i) for i in np.argwhere(neg)[0])
        raise InvalidSimilarityError(
            f"similarity entry {idx} is negative ({A[idx]!r})", index=idx
        )
    return A


def symmetrize(A):
    """``(A + A.T) / 2``."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


def laplacian_unsymmetrized(A):
    """``D(A) - A`` with ``D_tt = sum_s A_ts``, without symmetrizing ``A``.

    Only the MTA-form constructions built on ``1 alpha^T`` need this; every
    other caller should use :func:`build_laplacian`.
    """
    A = validate_similarity(A)
    L = -A.copy()
    # diagonal of A cancels: D_tt - A_tt = sum_{s != t} A_ts
    off = A.sum(axis=1) - np.diag(A)
    L[np.diag_indices_from(L)] = off
    return L


def build_laplacian(A):
    """Graph Laplacian of the symmetrized similarity matrix.

    Using an asymmetric ``A`` in the MTA objective is equivalent to using
    ``(A + A.T) / 2``, so that is what the Laplacian is built from.

    >>> build_laplacian([[0, 2], [0, 0]])
    array([[ 1., -1.],
           [-1.,  1.]])
    """
    A = validate_similarity(A)
    return laplacian_unsymmetrized(symmetrize(A))


def graph_energy(f, A):
    """Smoothness energy ``1/2 sum_ij A_ij (f_i - f_j)^2`` of ``f`` over the graph."""
    f = np.asarray(f, dtype=float)
    A = validate_similarity(A)
    if f.ndim != 1 or f.shape[0] != A.shape[0]:
        raise DimensionError(f"f has shape {f.shape}, similarity is {A.shape}")
    if not np.all(np.isfinite(f)):
        raise InvalidInputError("f must be finite")
    diff = f[:, None] - f[None, :]
    return 0.5 * float(np.sum(A * diff * diff))


def mean_covariance(variances, counts):
    """Diagonal of the covariance of the sample means, ``sigma_t^2 / N_t``."""
    variances = np.asarray(variances, dtype=float)
    counts = np.asarray(counts, dtype=float)
    sigma = variances / counts
    _check_sigma(sigma)
    return sigma


def _check_sigma(sigma):
    if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
        raise InvalidInputError("mean covariance entries must be positive and finite")


def _check_gamma(gamma):
    if not np.isfinite(gamma) or gamma < 0:
        raise InvalidInputError(f"gamma must be finite and non-negative, got {gamma!r}")


def clamp_stochastic(W):
    """Verify ``W`` is right-stochastic and clamp rounding-level negatives to 0.

    Raises:
        InternalError: if a row sum is off by more than ``ROW_SUM_TOL`` or an
            entry is below ``-NEGATIVE_DUST``.
    """
    if not np.all(np.isfinite(W)):
        raise InternalError("weight matrix has non-finite entries")
    worst = float(W.min()) if W.size else 0.0
    if worst < -NEGATIVE_DUST:
        raise InternalError(f"weight matrix has negative entry {worst:.3e}")
    err = float(np.max(np.abs(W.sum(axis=1) - 1.0))) if W.size else 0.0
    if err > ROW_SUM_TOL:
        raise InternalError(f"weight matrix row sums deviate from 1 by {err:.3e}")
    return np.maximum(W, 0.0)


def mta_weights_dense(sigma, L, gamma):
    """MTA solution matrix ``(I + (gamma/T) diag(sigma) L)^-1`` by a dense solve.

    Args:
        sigma: length-T diagonal of the sample-mean covariance (all > 0).
        L: T x T graph Laplacian.
        gamma: regularization strength, >= 0.

    Returns:
        The T x T right-stochastic weight matrix.  ``gamma == 0`` or an
        all-zero ``L`` gives the identity exactly.
    """
    sigma = np.asarray(sigma, dtype=float)
    L = np.asarray(L, dtype=float)
    T = sigma.shape[0]
    if sigma.ndim != 1 or L.shape != (T, T):
        raise DimensionError(f"sigma has shape {sigma.shape}, L has shape {L.shape}")
    _check_sigma(sigma)
    _check_gamma(gamma)
    eye = np.eye(T)
    if gamma == 0 or not np.any(L):
        return eye
    B = eye + (gamma / T) * sigma[:, None] * L
    try:
        return clamp_stochastic(np.linalg.solve(B, eye))
    except (np.linalg.LinAlgError, InternalError):
        pass
    # Strongly coupled tasks make B badly conditioned; LAPACK then loses the
    # row sums.  The M-matrix elimination below is slower but exact in sign.
    off = np.minimum(B - np.diag(np.diag(B)), 0.0)
    return clamp_stochastic(mmatrix_inverse(off, np.ones(T)))


def mmatrix_inverse(off, excess):
    """Invert the M-matrix ``diag(|off| 1 + excess) + off`` without cancellation.

    ``off`` holds the non-positive off-diagonal part (its diagonal is
    ignored) and ``excess > 0`` the row sums.  Pivots are rebuilt from the
    running row-sum excess (the Grassmann-Taksar-Heyman trick), so every
    step only adds non-negative quantities and the inverse is entrywise
    accurate however ill-conditioned the matrix is.
    """
    M = np.array(off, dtype=float)
    np.fill_diagonal(M, 0.0)
    e = np.array(excess, dtype=float)
    T = e.size
    lower = np.zeros((T, T))
    piv = np.empty(T)
    for k in range(T):
        row = M[k, k + 1:]
        piv[k] = e[k] - row.sum()
        l = M[k + 1:, k] / piv[k]
        lower[k + 1:, k] = l
        e[k + 1:] -= l * e[k]
        M[k + 1:, k + 1:] -= np.outer(l, row)
        M[k + 1:, k + 1:][np.diag_indices(T - k - 1)] = 0.0
    X = np.eye(T)
    for i in range(1, T):
        X[i] -= lower[i, :i] @ X[:i]
    W = np.empty((T, T))
    for k in range(T - 1, -1, -1):
        W[k] = (X[k] - M[k, k + 1:] @ W[k + 1:]) / piv[k]
    return W

_FAST_BLOCK = 1 << 15


def _fast_blocked(sigma, c, ybar):
    # two passes over cache-sized blocks so large T costs the same per element
    T = sigma.size
    cT = c * T
    num = np.empty((T + _FAST_BLOCK - 1) // _FAST_BLOCK)
    den = np.empty_like(num)
    for k, i in enumerate(range(0, T, _FAST_BLOCK)):
        inv_d = 1.0 / (1.0 + cT * sigma[i:i + _FAST_BLOCK])
        num[k] = np.dot(ybar[i:i + _FAST_BLOCK], inv_d)
        den[k] = inv_d.sum()
    m = math.fsum(num) / math.fsum(den)
    out = np.empty(T)
    for i in range(0, T, _FAST_BLOCK):
        inv_d = 1.0 / (1.0 + cT * sigma[i:i + _FAST_BLOCK])
        out[i:i + _FAST_BLOCK] = ybar[i:i + _FAST_BLOCK] * inv_d + (1.0 - inv_d) * m
    return out


def mta_apply_fast(sigma, c, ybar):
    """Apply ``(I + c diag(sigma) L(1 1^T))^-1`` to ``ybar`` in O(T).

    With ``L(1 1^T) = T I - 1 1^T`` the system matrix is ``Z - x 1^T`` for
    diagonal ``Z = I + c T Sigma`` and ``x = c Sigma 1``; Sherman-Morrison then
    gives the closed form

        y*_t = ybar_t / d_t + (1 - 1/d_t) * m,   d_t = 1 + c T sigma_t,
        m = sum_s (ybar_s / d_s) / sum_s (1 / d_s),

    which avoids the cancellation in ``1 - 1^T Z^-1 x``.  Leading axes of
    ``sigma``/``ybar`` (and a matching ``c``) are treated as a batch.
    """
    sigma = np.asarray(sigma, dtype=float)
    ybar = np.asarray(ybar, dtype=float)
    if sigma.shape != ybar.shape:
        raise DimensionError(f"sigma has shape {sigma.shape}, ybar has shape {ybar.shape}")
    c = np.asarray(c, dtype=float)
    if np.any(c < 0) or np.any(np.isnan(c)):
        raise InvalidInputError("scale c must be non-negative")
    T = sigma.shape[-1]
    if sigma.ndim == 1 and c.ndim == 0 and T > _FAST_BLOCK:
        out = _fast_blocked(sigma, float(c), ybar)
    else:
        c = c[..., None]
        inv_d = 1.0 / (1.0 + c * T * sigma)
        m = np.sum(ybar * inv_d, axis=-1, keepdims=True) / np.sum(inv_d, axis=-1, keepdims=True)
        out = ybar * inv_d + (1.0 - inv_d) * m
    if not np.all(np.isfinite(out)):
        raise InternalError("fast MTA path produced non-finite values")
    return out
