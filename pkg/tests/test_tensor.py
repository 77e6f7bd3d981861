import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from patchbatch.errors import DimensionError, DomainError
from patchbatch.tensor import matmul, reduce_mean_std


def naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


def test_matmul_identity_and_scalar():
    np.testing.assert_array_equal(matmul([[1, 0], [0, 1]], [[3, 4], [5, 6]]), [[3, 4], [5, 6]])
    np.testing.assert_array_equal(matmul([[2]], [[3]]), [[6]])


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2))
    np.testing.assert_allclose(matmul(a, b), naive_matmul(a, b), rtol=1e-14, atol=1e-14)


def test_matmul_shape_errors():
    with pytest.raises(DimensionError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(DimensionError):
        matmul(np.ones(3), np.ones((3, 1)))


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=st.floats(-1e3, 1e3)))
def test_matmul_right_identity(a):
    np.testing.assert_array_equal(matmul(a, np.eye(a.shape[1])), a)


@pytest.mark.parametrize(
    "x, mean, std",
    [([5, 5, 5], 5.0, 0.0), ([0, 2], 1.0, 1.0), ([1, 2, 3, 4], 2.5, np.sqrt(1.25))],
)
def test_reduce_mean_std_examples(x, mean, std):
    m, s = reduce_mean_std(x)
    assert m == pytest.approx(mean, abs=1e-15)
    assert s == pytest.approx(std, abs=1e-15)


def test_reduce_mean_std_empty():
    with pytest.raises(DomainError):
        reduce_mean_std([])


@settings(max_examples=50)
@given(
    arrays(np.float64, st.integers(1, 30), elements=st.floats(-10, 10)),
    st.floats(-10, 10),
)
def test_shift_equivariance(x, c):
    m, s = reduce_mean_std(x)
    m2, s2 = reduce_mean_std(x + c)
    assert m2 == pytest.approx(m + c, abs=1e-12)
    assert s2 == pytest.approx(s, abs=1e-12)
