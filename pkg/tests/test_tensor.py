import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qcatn.gates import GateParams, generator
from qcatn.tensor import (
    DimensionError,
    ValidationError,
    contract,
    herm_expm,
    svd_split,
    truncated_svd,
)

SY = np.array([[0, 1j], [-1j, 0]])


def _random_complex(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def _random_hermitian(rng, n):
    a = _random_complex(rng, (n, n))
    return a + a.conj().T


def test_contract_identity():
    out = contract(np.eye(2), np.eye(2), [(1, 0)])
    assert np.allclose(out, np.eye(2))


def test_contract_normalized_vector(rng):
    v = _random_complex(rng, 5)
    v /= np.linalg.norm(v)
    assert abs(contract(v, v.conj(), [(0, 0)]) - 1) < 1e-14


def test_contract_sigma_y_squared():
    assert np.max(np.abs(contract(SY, SY, [(1, 0)]) - np.eye(2))) < 1e-15


def test_contract_result_axis_order(rng):
    a = _random_complex(rng, (2, 3, 4))
    b = _random_complex(rng, (4, 5, 3))
    out = contract(a, b, [(1, 2), (2, 0)])
    assert out.shape == (2, 5)
    assert np.allclose(out, np.einsum("ijk,kmj->im", a, b))


def test_contract_errors():
    with pytest.raises(DimensionError):
        contract(np.zeros((2, 3)), np.zeros((2, 3)), [(1, 0)])
    with pytest.raises(ValueError):
        contract(np.zeros((2, 2)), np.zeros((2, 2)), [(0, 0), (0, 1)])


@settings(max_examples=30, deadline=None)
@given(
    st.integers(0, 2**31 - 1),
    st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
)
def test_contract_bilinear(seed, alpha):
    rng = np.random.default_rng(seed)
    a = _random_complex(rng, (3, 4))
    b = _random_complex(rng, (4, 2))
    lhs = contract(alpha * a, b, [(1, 0)])
    rhs = alpha * contract(a, b, [(1, 0)])
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, abs(alpha)) * 10


def test_svd_identity():
    r = truncated_svd(np.eye(4), 1, max_rank=4)
    assert np.allclose(r.singular_values, 1.0)
    assert r.discarded_weight == 0.0


def test_svd_rank_one(rng):
    u, v = _random_complex(rng, 4), _random_complex(rng, 3)
    r = truncated_svd(np.outer(u, v), 1, max_rank=1)
    assert r.rank == 1
    assert r.discarded_weight < 1e-28


def test_svd_diag_discarded_weight():
    r = truncated_svd(np.diag([2.0, 1.0]), 1, max_rank=1)
    assert np.allclose(r.singular_values, [2.0])
    assert abs(r.discarded_weight - 0.2) < 1e-15


def test_svd_cutoff_is_relative():
    r = truncated_svd(np.diag([1.0, 1e-15]), 1)
    assert r.rank == 1
    r = truncated_svd(np.diag([1.0, 1e-13]), 1)
    assert r.rank == 2


def test_svd_degenerate_keeps_exactly_max_rank():
    r = truncated_svd(np.eye(5), 1, max_rank=3)
    assert r.rank == 3
    assert abs(r.discarded_weight - 0.4) < 1e-15


def test_svd_axis_partition(rng):
    t = _random_complex(rng, (2, 3, 4))
    r = truncated_svd(t, [1])
    assert r.left.shape[:-1] == (3,)
    assert r.right.shape[1:] == (2, 4)
    rebuilt = np.einsum("bk,k,kac->abc", r.left, r.singular_values, r.right)
    assert np.max(np.abs(rebuilt - t)) < 1e-12


def test_svd_errors():
    with pytest.raises(ValueError):
        truncated_svd(np.eye(2), 0)
    with pytest.raises(ValueError):
        truncated_svd(np.eye(2), [0, 1])
    with pytest.raises(ValueError):
        truncated_svd(np.eye(2), 1, max_rank=0)


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
           elements=st.floats(-10, 10, allow_subnormal=False)),
    st.integers(1, 6),
)
def test_svd_invariants(m, k):
    r = truncated_svd(m, 1, max_rank=k, cutoff=0.0)
    s = r.singular_values
    assert np.all(s >= 0) and np.all(np.diff(s) <= 0)
    assert 0.0 <= r.discarded_weight <= 1.0
    assert np.max(np.abs(r.left.conj().T @ r.left - np.eye(r.rank))) < 1e-12
    assert np.max(np.abs(r.right @ r.right.conj().T - np.eye(r.rank))) < 1e-12
    total = np.sum(m**2)
    if total > 0:
        err = np.sum(np.abs(m - (r.left * s) @ r.right) ** 2) / total
        assert abs(err - r.discarded_weight) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_svd_full_rank_reconstructs(seed):
    rng = np.random.default_rng(seed)
    m = _random_complex(rng, (5, 7))
    r = truncated_svd(m, 1, cutoff=0.0)
    assert np.linalg.norm(m - (r.left * r.singular_values) @ r.right) < 1e-12 * np.linalg.norm(m) * 10


def test_svd_split_returns_weight(rng):
    u, s, vh, dw = svd_split(np.diag([3.0, 2.0, 1.0]), 2)
    assert s.tolist() == [3.0, 2.0]
    assert abs(dw - 1 / 14) < 1e-15


def test_herm_expm_zero():
    assert np.allclose(herm_expm(np.zeros((3, 3)), -1j), np.eye(3))


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.7, -2.2])
def test_herm_expm_pauli_rotation(theta):
    expected = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * SY
    assert np.max(np.abs(herm_expm(SY, -1j * theta) - expected)) < 1e-14


def test_herm_expm_gate_generator_unitary():
    g = herm_expm(0.5 * generator(GateParams(0.5, 0.3)), -1j)
    assert np.max(np.abs(g.conj().T @ g - np.eye(8))) < 1e-12


def test_herm_expm_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        herm_expm(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValidationError):
        herm_expm(np.zeros((2, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_herm_expm_group_property(seed, s, r):
    h = _random_hermitian(np.random.default_rng(seed), 8)
    lhs = herm_expm(h, -1j * s) @ herm_expm(h, -1j * r)
    assert np.max(np.abs(lhs - herm_expm(h, -1j * (s + r)))) < 1e-11


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        truncated_svd(np.array([[np.nan, 0], [0, 1]]), 1)
