import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wgdelay.errors import ContractViolation, DimensionError
from wgdelay.tensor_core import (
    TruncationPolicy,
    as_tensor,
    contract,
    expm_hermitian_generator,
    is_hermitian,
    qr_labeled,
    svd_truncate,
    unitarity_error,
)


def random_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_as_tensor_rejects_nan_and_bad_shape():
    with pytest.raises(ContractViolation):
        as_tensor([1.0, np.nan])
    with pytest.raises(DimensionError):
        as_tensor(np.zeros(6), (4, 2))
    assert as_tensor(np.arange(6), (2, 3)).dtype == np.complex128


def test_contract_matches_einsum_and_checks_extents():
    rng = np.random.default_rng(0)
    a, b = random_complex(rng, 3, 4, 5), random_complex(rng, 5, 4, 2)
    out = contract(a, b, [(1, 1), (2, 0)])
    assert np.allclose(out, np.einsum("ijk,kjl->il", a, b))
    with pytest.raises(DimensionError):
        contract(a, b, [(0, 0)])


def test_truncation_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(chi_max=0)
    with pytest.raises(ValueError):
        TruncationPolicy(cutoff=1.0)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_svd_exact_reconstructs(m, n, seed):
    rng = np.random.default_rng(seed)
    a = random_complex(rng, m, n)
    res = svd_truncate(a, TruncationPolicy.exact())
    assert np.allclose((res.left_isometry * res.singular_values) @ res.right_isometry, a)
    assert np.allclose(res.left_isometry.conj().T @ res.left_isometry, np.eye(res.rank))
    assert res.discarded_weight < 1e-12


def test_svd_chi_cap_reports_discarded_weight():
    s = np.array([1.0, 0.5, 0.1, 0.01])
    a = np.diag(s).astype(complex)
    res = svd_truncate(a, TruncationPolicy(chi_max=2, cutoff=0.0))
    assert res.rank == 2
    assert np.isclose(res.discarded_weight, (0.1**2 + 0.01**2) / np.sum(s**2))


def test_svd_cutoff_is_relative_weight():
    a = np.diag([1.0, 1e-3, 1e-6]).astype(complex)
    assert svd_truncate(a, TruncationPolicy(100, 1e-5)).rank == 1
    assert svd_truncate(a, TruncationPolicy(100, 1e-7)).rank == 2
    assert svd_truncate(a, TruncationPolicy(100, 1e-13)).rank == 3


def _block_matrix(rng, row_labels, col_labels):
    m = random_complex(rng, len(row_labels), len(col_labels))
    return m * (np.asarray(row_labels)[:, None] == np.asarray(col_labels)[None, :])


@given(
    st.lists(st.integers(0, 3), min_size=1, max_size=10),
    st.lists(st.integers(0, 3), min_size=1, max_size=10),
    st.integers(1, 8),
    st.integers(0, 2**31 - 1),
)
def test_labelled_svd_matches_dense(rows, cols, chi, seed):
    if not set(rows) & set(cols):
        return
    rng = np.random.default_rng(seed)
    m = _block_matrix(rng, rows, cols)
    policy = TruncationPolicy(chi, 0.0)
    dense = svd_truncate(m, policy)
    blocked = svd_truncate(m, policy, np.array(rows), np.array(cols))
    k = min(dense.rank, blocked.rank)
    assert np.allclose(dense.singular_values[:k], blocked.singular_values[:k], atol=1e-10)
    # every kept vector lives inside its block
    u, vh, lab = blocked.left_isometry, blocked.right_isometry, blocked.labels
    assert np.all(np.abs(u[np.array(rows)[:, None] != lab[None, :]]) == 0)
    assert np.all(np.abs(vh[lab[:, None] != np.array(cols)[None, :]]) == 0)
    if blocked.rank >= min(m.shape):
        assert np.allclose((u * blocked.singular_values) @ vh, m)


@given(st.lists(st.integers(0, 2), min_size=1, max_size=8), st.integers(0, 2**31 - 1))
def test_labelled_qr_reconstructs(rows, seed):
    rng = np.random.default_rng(seed)
    cols = sorted(set(rows)) * 2
    m = _block_matrix(rng, rows, cols)
    q, r, lab = qr_labeled(m, np.array(rows), np.array(cols))
    assert np.allclose(q @ r, m)
    assert np.allclose(q.conj().T @ q, np.eye(q.shape[1]))
    assert lab.shape == (q.shape[1],)


def test_expm_hermitian_generator_is_unitary():
    rng = np.random.default_rng(3)
    h = random_complex(rng, 16, 16)
    h = h + h.conj().T
    assert is_hermitian(h)
    u = expm_hermitian_generator(h)
    assert unitarity_error(u) < 1e-12
    w, v = np.linalg.eigh(h)
    assert np.allclose(u, v @ np.diag(np.exp(-1j * w)) @ v.conj().T)
    with pytest.raises(ContractViolation):
        expm_hermitian_generator(h + 1j * np.eye(16))
