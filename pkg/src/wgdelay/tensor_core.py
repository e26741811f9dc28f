"""Dense complex tensor kernels.

All tensors are ``numpy.ndarray`` objects of dtype ``complex128`` in C
(row-major) order. Whenever a tensor is viewed as a matrix, the leading axes
are fused into the row index and the trailing axes into the column index, in
their original order; e.g. a site tensor ``(chi_l, d, chi_r)`` is the matrix
``(chi_l * d, chi_r)`` with row index ``a * d + s``. Every reshape in the
package follows this convention.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import ContractViolation, DimensionError, NumericalError

ComplexTensor = np.ndarray

_EPS = np.finfo(float).eps


def as_tensor(data, shape: Sequence[int] | None = None) -> ComplexTensor:
    """Convert ``data`` to a finite complex128 tensor, optionally reshaping it."""
    arr = np.asarray(data, dtype=np.complex128)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if any(s <= 0 for s in shape):
            raise DimensionError(f"extents must be positive, got {shape}")
        if int(np.prod(shape)) != arr.size:
            raise DimensionError(f"cannot view {arr.size} entries as shape {shape}")
        arr = arr.reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise ContractViolation("tensor contains NaN or Inf entries")
    return arr


@dataclass(frozen=True)
class TruncationPolicy:
    """How aggressively bonds are cut after each decomposition.

    ``cutoff`` is a relative weight: the smallest singular values are dropped
    as long as their summed squares stay at or below ``cutoff`` times the total.
    """

    chi_max: int = 128
    cutoff: float = 1e-10

    def __post_init__(self):
        if int(self.chi_max) != self.chi_max or self.chi_max < 1:
            raise ValueError(f"chi_max must be a positive integer, got {self.chi_max}")
        if not 0.0 <= self.cutoff < 1.0:
            raise ValueError(f"cutoff must lie in [0, 1), got {self.cutoff}")

    @classmethod
    def exact(cls) -> "TruncationPolicy":
        """Keep the full numerical rank at every bond."""
        return cls(chi_max=sys.maxsize, cutoff=0.0)


@dataclass
class SVDResult:
    left_isometry: ComplexTensor
    singular_values: np.ndarray
    right_isometry: ComplexTensor
    discarded_weight: float
    labels: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return int(self.singular_values.size)


def contract(a: ComplexTensor, b: ComplexTensor, axis_pairs: Sequence[Tuple[int, int]]) -> ComplexTensor:
    """Sum over each paired axis ``(axis_of_a, axis_of_b)``.

    The result carries the free axes of ``a`` followed by the free axes of
    ``b``, each group in its original order.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a = [int(p[0]) for p in axis_pairs]
    axes_b = [int(p[1]) for p in axis_pairs]
    for ia, ib in zip(axes_a, axes_b):
        if not (-a.ndim <= ia < a.ndim and -b.ndim <= ib < b.ndim):
            raise DimensionError(f"axis pair ({ia}, {ib}) out of range for ranks {a.ndim}, {b.ndim}")
        if a.shape[ia] != b.shape[ib]:
            raise DimensionError(
                f"cannot contract axis {ia} (extent {a.shape[ia]}) with axis {ib} (extent {b.shape[ib]})"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def _truncation_rank(s: np.ndarray, shape: Tuple[int, int], policy: TruncationPolicy) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 1
    numerical_rank = int(np.count_nonzero(s > s[0] * max(shape) * _EPS))
    s2 = s * s
    # tail[k] = weight discarded when keeping k values
    tail = np.concatenate([np.cumsum(s2[::-1])[::-1], [0.0]])
    allowed = policy.cutoff * tail[0]
    by_cutoff = int(np.argmax(tail <= allowed))
    return max(1, min(policy.chi_max, by_cutoff, numerical_rank))


def _dense_svd(m: np.ndarray):
    try:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        try:
            return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd", check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            finite = bool(np.all(np.isfinite(m)))
            norm = float(np.linalg.norm(m)) if finite else float("nan")
            raise NumericalError(
                f"SVD did not converge for a {m.shape} matrix (finite={finite}, frobenius norm={norm:.3e})"
            ) from exc


def _label_blocks(row_labels, col_labels, shape):
    row_labels = np.asarray(row_labels)
    col_labels = np.asarray(col_labels)
    if row_labels.shape != (shape[0],) or col_labels.shape != (shape[1],):
        raise DimensionError(f"labels {row_labels.shape}, {col_labels.shape} do not fit a {shape} matrix")
    for q in np.intersect1d(row_labels, col_labels):
        yield q, np.flatnonzero(row_labels == q), np.flatnonzero(col_labels == q)


def svd_truncate(
    m: ComplexTensor,
    policy: TruncationPolicy,
    row_labels: np.ndarray | None = None,
    col_labels: np.ndarray | None = None,
) -> SVDResult:
    """Truncated SVD ``m ~= U @ diag(s) @ Vh`` following ``policy``.

    With ``row_labels``/``col_labels`` (conserved charges) the matrix is
    treated as block diagonal: only entries whose row and column labels agree
    are decomposed, block by block, and every singular vector inherits its
    block label (returned in ``labels``). Truncation is global across blocks.
    Entries outside matching blocks are counted as discarded weight.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise DimensionError(f"svd_truncate expects a matrix, got rank {m.ndim}")
    if row_labels is None or col_labels is None:
        u, s, vh = _dense_svd(m)
        keep = _truncation_rank(s, m.shape, policy)
        total = float(np.sum(s * s))
        dropped = float(np.sum(s[keep:] ** 2))
        discarded = dropped / total if total > 0 else 0.0
        return SVDResult(u[:, :keep], s[:keep], vh[:keep, :], discarded)

    pieces = []
    for q, rows, cols in _label_blocks(row_labels, col_labels, m.shape):
        u, s, vh = _dense_svd(m[np.ix_(rows, cols)])
        pieces.append((q, rows, cols, u, s, vh))
    total = float(np.vdot(m, m).real)
    if not pieces:
        raise NumericalError(f"no charge block is shared by rows and columns of a {m.shape} matrix")
    s_all = np.concatenate([p[4] for p in pieces])
    owner = np.concatenate([np.full(p[4].size, i) for i, p in enumerate(pieces)])
    column = np.concatenate([np.arange(p[4].size) for p in pieces])
    order = np.argsort(-s_all, kind="stable")
    s_sorted = s_all[order]
    keep = _truncation_rank(s_sorted, m.shape, policy)
    u_out = np.zeros((m.shape[0], keep), dtype=np.result_type(m.dtype, np.complex128))
    vh_out = np.zeros((keep, m.shape[1]), dtype=u_out.dtype)
    labels = np.empty(keep, dtype=np.int64)
    kept_idx = order[:keep]
    for i, (q, rows, cols, u, _, vh) in enumerate(pieces):
        slots = np.flatnonzero(owner[kept_idx] == i)
        if slots.size == 0:
            continue
        src = column[kept_idx[slots]]
        u_out[np.ix_(rows, slots)] = u[:, src]
        vh_out[np.ix_(slots, cols)] = vh[src, :]
        labels[slots] = q
    kept = float(np.sum(s_sorted[:keep] ** 2))
    discarded = max(0.0, (total - kept) / total) if total > 0 else 0.0
    return SVDResult(u_out, s_sorted[:keep], vh_out, discarded, labels)


def qr_labeled(
    m: ComplexTensor, row_labels: np.ndarray | None = None, col_labels: np.ndarray | None = None
) -> Tuple[ComplexTensor, ComplexTensor, np.ndarray | None]:
    """Thin QR ``m = Q R``; block-wise with labels, returning the labels of Q's columns."""
    m = np.asarray(m)
    if row_labels is None or col_labels is None:
        q, r = np.linalg.qr(m)
        return q, r, None
    qs, rs, labels = [], [], []
    for lab, rows, cols in _label_blocks(row_labels, col_labels, m.shape):
        q, r = np.linalg.qr(m[np.ix_(rows, cols)])
        qs.append((rows, q))
        rs.append((cols, r))
        labels.append(np.full(q.shape[1], lab, dtype=np.int64))
    k = sum(q.shape[1] for _, q in qs)
    if k == 0:
        raise NumericalError(f"no charge block is shared by rows and columns of a {m.shape} matrix")
    q_out = np.zeros((m.shape[0], k), dtype=np.result_type(m.dtype, np.complex128))
    r_out = np.zeros((k, m.shape[1]), dtype=q_out.dtype)
    start = 0
    for (rows, q), (cols, r) in zip(qs, rs):
        stop = start + q.shape[1]
        q_out[rows, start:stop] = q
        r_out[start:stop, cols] = r
        start = stop
    return q_out, r_out, np.concatenate(labels)


def is_hermitian(h: ComplexTensor, tol: float = 1e-12) -> bool:
    h = np.asarray(h)
    scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
    return h.ndim == 2 and h.shape[0] == h.shape[1] and float(np.max(np.abs(h - h.conj().T))) <= tol * scale


def unitarity_error(u: ComplexTensor) -> float:
    """Largest entry of ``|U^dagger U - I|``."""
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def expm_hermitian_generator(h: ComplexTensor) -> ComplexTensor:
    """Return ``exp(-i h)`` for Hermitian ``h`` via its eigendecomposition."""
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionError(f"generator must be square, got shape {h.shape}")
    if not is_hermitian(h):
        raise ContractViolation("generator is not Hermitian to 1e-12")
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.exp(-1j * w)) @ v.conj().T
