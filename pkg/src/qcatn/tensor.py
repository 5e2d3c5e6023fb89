"""Dense tensor kernels: contraction, truncated SVD and Hermitian exponentials.

Tensors are plain :class:`numpy.ndarray` objects in C (row-major) order.
Everything here is a pure function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "DimensionError",
    "ValidationError",
    "SvdResult",
    "contract",
    "truncated_svd",
    "svd_split",
    "herm_expm",
    "DEFAULT_CUTOFF",
    "HERMITIAN_TOL",
]

DEFAULT_CUTOFF = 1e-14
HERMITIAN_TOL = 1e-12


class DimensionError(ValueError):
    """Paired axes have different extents."""


class ValidationError(ValueError):
    """An input violates a documented precondition."""


def _check_finite(t: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(t)):
        raise ValidationError("tensor contains NaN or Inf entries")
    return t


def contract(a, b, index_pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Sum over paired axes of ``a`` and ``b``.

    The result carries the unpaired axes of ``a`` followed by the unpaired
    axes of ``b``, each in their original order.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a = [int(i) % a.ndim if a.ndim else int(i) for i, _ in index_pairs]
    axes_b = [int(j) % b.ndim if b.ndim else int(j) for _, j in index_pairs]
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise ValueError(f"axis paired more than once: {list(index_pairs)}")
    for i, j in zip(axes_a, axes_b):
        if i >= a.ndim or j >= b.ndim:
            raise ValueError(f"axis pair ({i}, {j}) out of range")
        if a.shape[i] != b.shape[j]:
            raise DimensionError(
                f"extent mismatch on pair ({i}, {j}): {a.shape[i]} != {b.shape[j]}"
            )
    return _check_finite(np.tensordot(a, b, axes=(axes_a, axes_b)))


@dataclass(frozen=True)
class SvdResult:
    """Factors of a (possibly truncated) singular value decomposition.

    ``left`` has the left-group extents followed by the kept rank,
    ``right`` has the kept rank followed by the right-group extents.
    ``discarded_weight`` is the dropped fraction of the squared Frobenius norm.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray
    discarded_weight: float

    @property
    def rank(self) -> int:
        return int(self.singular_values.shape[0])


def _raw_svd(m: np.ndarray):
    try:
        return scipy.linalg.svd(
            m, full_matrices=False, lapack_driver="gesdd", check_finite=False
        )
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust
        return scipy.linalg.svd(
            m, full_matrices=False, lapack_driver="gesvd", check_finite=False
        )


def svd_split(m: np.ndarray, max_rank: int | None = None, cutoff: float = DEFAULT_CUTOFF):
    """Truncated SVD of a matrix, the hot path used by the evolution code.

    Returns ``(u, s, vh, discarded_weight)``. The kept rank is the smallest of
    ``max_rank``, the number of singular values above ``cutoff * s[0]`` and the
    full rank, but never less than one. Ties at the boundary are resolved by
    position in the descending order, so exactly ``max_rank`` values survive.
    """
    u, s, vh = _raw_svd(m)
    total = float(np.dot(s, s))
    if total == 0.0:
        keep = 1
    else:
        keep = int(np.count_nonzero(s > cutoff * s[0]))
        keep = max(1, keep)
    if max_rank is not None:
        keep = min(keep, int(max_rank))
    dropped = s[keep:]
    discarded = float(np.dot(dropped, dropped)) / total if total > 0.0 else 0.0
    return u[:, :keep], s[:keep], vh[:keep, :], min(max(discarded, 0.0), 1.0)


def truncated_svd(
    t,
    split: int | Sequence[int],
    max_rank: int | None = None,
    cutoff: float = DEFAULT_CUTOFF,
) -> SvdResult:
    """Split a tensor across an axis partition with a truncated SVD.

    Parameters
    ----------
    t : array_like
        Input tensor.
    split : int or sequence of int
        Either the number of leading axes forming the left group, or an
        explicit list of left-group axes. Remaining axes form the right group
        and keep their relative order.
    max_rank : int, optional
        Upper bound on the kept rank. ``None`` means no cap.
    cutoff : float
        Singular values at or below ``cutoff`` times the largest are dropped.
    """
    t = np.asarray(t)
    if isinstance(split, (int, np.integer)):
        left_axes = list(range(int(split)))
    else:
        left_axes = [int(i) % t.ndim for i in split]
    right_axes = [i for i in range(t.ndim) if i not in left_axes]
    if not left_axes or not right_axes or len(set(left_axes)) != len(left_axes):
        raise ValueError(f"invalid axis partition {split!r} for a rank-{t.ndim} tensor")
    if max_rank is not None and max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    _check_finite(t)

    perm = np.transpose(t, left_axes + right_axes)
    lshape = [t.shape[i] for i in left_axes]
    rshape = [t.shape[i] for i in right_axes]
    m = perm.reshape(int(np.prod(lshape)), int(np.prod(rshape)))
    u, s, vh, discarded = svd_split(m, max_rank, cutoff)
    k = s.shape[0]
    return SvdResult(
        left=u.reshape(lshape + [k]),
        singular_values=s,
        right=vh.reshape([k] + rshape),
        discarded_weight=discarded,
    )


def herm_expm(h, prefactor: complex = -1j) -> np.ndarray:
    """Return ``exp(prefactor * h)`` for a Hermitian matrix ``h``.

    The input is symmetrised before diagonalisation to damp roundoff; a
    deviation from Hermiticity larger than :data:`HERMITIAN_TOL` raises
    :class:`ValidationError`.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {h.shape}")
    _check_finite(h)
    if h.size and np.max(np.abs(h - h.conj().T)) > HERMITIAN_TOL:
        raise ValidationError("matrix is not Hermitian within tolerance")
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    return _check_finite((v * np.exp(prefactor * w)) @ v.conj().T)
