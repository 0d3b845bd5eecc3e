"""Tensor core: shape algebra, elementwise ops, matmul, and the backward pass."""

import numpy as np
import pytest

from windcast.autodiff import ShapeError, Tensor, concat
from windcast.gradcheck import gradcheck
from windcast.naive import matmul_reference

rng = np.random.default_rng(1234)


# -- permute -------------------------------------------------------------------

def test_permute_shape_bookkeeping():
    t = Tensor(np.zeros((5, 4, 4)))
    assert t.permute((1, 0, 2)).shape == (4, 5, 4)


def test_permute_inverse_is_identity():
    t = Tensor(rng.normal(size=(3, 4, 5)))
    p = (2, 0, 1)
    inverse = tuple(np.argsort(p))
    back = t.permute(p).permute(inverse)
    assert np.array_equal(back.data, t.data)


def test_permute_matches_nested_loop_oracle():
    x = rng.normal(size=(2, 3))
    out = Tensor(x).permute((1, 0)).data
    for i in range(2):
        for j in range(3):
            assert out[j, i] == x[i, j]


def test_permute_rejects_non_permutation():
    t = Tensor(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        t.permute((0, 0))
    with pytest.raises(ValueError):
        t.permute((0, 2))


def test_permute_gradient_is_inverse_permutation():
    x = Tensor(rng.normal(size=(2, 3, 4)))
    w = np.arange(24).reshape(4, 2, 3).astype(float)
    (x.permute((2, 0, 1)) * Tensor(w)).sum().backward()
    assert np.array_equal(x.grad, w.transpose(1, 2, 0))


# -- matmul --------------------------------------------------------------------

def test_matmul_identity():
    m = rng.normal(size=(3, 3))
    out = Tensor(np.eye(3)) @ Tensor(m)
    assert np.allclose(out.data, m, atol=0, rtol=0)


def test_matmul_hand_case():
    out = Tensor([[1.0, 2.0], [3.0, 4.0]]) @ Tensor([[1.0], [1.0]])
    assert np.array_equal(out.data, [[3.0], [7.0]])


def test_matmul_matches_triple_loop_oracle():
    a = rng.normal(size=(4, 5))
    b = rng.normal(size=(5, 2))
    out = (Tensor(a) @ Tensor(b)).data
    assert np.abs(out - matmul_reference(a, b)).max() < 1e-12


def test_matmul_inner_dim_mismatch():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((2, 3))) @ Tensor(np.zeros((2, 3)))


def test_matmul_gradients():
    a = Tensor(rng.normal(size=(3, 4)))
    b = Tensor(rng.normal(size=(4, 2)))
    gradcheck(lambda: (a @ b).sum(), [a, b])


def test_bmm_matches_numpy_and_gradchecks():
    a = Tensor(rng.normal(size=(2, 3, 4)))
    b = Tensor(rng.normal(size=(2, 4, 5)))
    assert np.allclose(a.bmm(b).data, a.data @ b.data)
    gradcheck(lambda: a.bmm(b).sum(), [a, b])


# -- elementwise ---------------------------------------------------------------

def test_relu_values():
    assert np.array_equal(Tensor([-1.0, 0.0, 2.0]).relu().data, [0.0, 0.0, 2.0])


def test_add_zeros_identity():
    x = rng.normal(size=(4,))
    out = Tensor(x) + Tensor(np.zeros(4))
    assert np.array_equal(out.data, x)


def test_relu_gradient_definition():
    x = Tensor([-1.0, 3.0])
    x.relu().sum().backward()  # upstream gradient [1, 1]
    assert np.array_equal(x.grad, [0.0, 1.0])


def test_relu_subgradient_zero_at_zero():
    x = Tensor([0.0])
    x.relu().sum().backward()
    assert x.grad[0] == 0.0


def test_elementwise_shape_mismatch():
    with pytest.raises(ShapeError):
        Tensor(np.zeros(3)) + Tensor(np.zeros(4))
    with pytest.raises(ShapeError):
        Tensor(np.zeros(3)) * Tensor(np.zeros((3, 1)))


def test_division_by_zero_scalar():
    with pytest.raises(ValueError):
        Tensor(np.ones(3)) / 0


def test_sub_mul_div_values_and_grads():
    a = Tensor(rng.normal(size=(2, 3)))
    b = Tensor(rng.normal(size=(2, 3)))
    assert np.allclose((a - b).data, a.data - b.data)
    assert np.allclose((a * b).data, a.data * b.data)
    assert np.allclose((a / 2.0).data, a.data / 2.0)
    gradcheck(lambda: ((a - b) * b / 3.0).sum(), [a, b])


# -- concat --------------------------------------------------------------------

def test_concat_branch_vector_lengths():
    parts = [Tensor(np.zeros(n)) for n in (64, 96, 96)]
    assert concat(parts, axis=0).shape == (256,)


def test_concat_single_input_identity():
    t = Tensor(rng.normal(size=(3, 2)))
    assert np.array_equal(concat([t], axis=0).data, t.data)


def test_concat_rows_in_order_against_oracle():
    a, b = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    out = concat([Tensor(a), Tensor(b)], axis=0).data
    assert out.shape == (4, 2)
    for i in range(2):
        for j in range(2):
            assert out[i, j] == a[i, j]
            assert out[i + 2, j] == b[i, j]


def test_concat_mismatch_errors():
    with pytest.raises(ShapeError):
        concat([Tensor(np.zeros((2, 2))), Tensor(np.zeros(2))], axis=0)
    with pytest.raises(ShapeError):
        concat([Tensor(np.zeros((2, 2))), Tensor(np.zeros((2, 3)))], axis=0)
    with pytest.raises(ValueError):
        concat([Tensor(np.zeros((2, 2)))], axis=5)


def test_concat_gradient_splits_by_offsets():
    a = Tensor(rng.normal(size=(2, 2)))
    b = Tensor(rng.normal(size=(3, 2)))
    w = np.arange(10.0).reshape(5, 2)
    (concat([a, b], axis=0) * Tensor(w)).sum().backward()
    assert np.array_equal(a.grad, w[:2])
    assert np.array_equal(b.grad, w[2:])


# -- flatten / reshape -----------------------------------------------------------

def test_flatten_product_of_extents():
    assert Tensor(np.zeros((16, 2, 2))).flatten().shape == (64,)


def test_flatten_rank1_identity():
    t = Tensor(rng.normal(size=(7,)))
    assert np.array_equal(t.flatten().data, t.data)


def test_flatten_row_major_index_mapping():
    a, b, c = 3, 4, 5
    x = rng.normal(size=(a, b, c))
    flat = Tensor(x).flatten().data
    for i in range(a):
        for j in range(b):
            for k in range(c):
                assert flat[i * b * c + j * c + k] == x[i, j, k]


def test_flatten_gradient_reshapes_back():
    x = Tensor(rng.normal(size=(2, 3)))
    w = np.arange(6.0)
    (x.flatten() * Tensor(w)).sum().backward()
    assert np.array_equal(x.grad, w.reshape(2, 3))


# -- backward driver -------------------------------------------------------------

def test_backward_of_sum_is_ones():
    theta = Tensor(rng.normal(size=(4,)))
    theta.sum().backward()
    assert np.array_equal(theta.grad, np.ones(4))


def test_backward_hand_differentiated_square():
    theta = Tensor([1.0, 2.0])
    (theta * theta).sum().backward()
    assert np.array_equal(theta.grad, [2.0, 4.0])


def test_backward_composed_graph_matches_finite_differences():
    x = Tensor(rng.normal(size=(3, 3)))
    y = Tensor(rng.normal(size=(3, 3)))

    def fn():
        z = (x @ y).relu() + x * x
        return (z.permute((1, 0)).flatten() * Tensor(np.linspace(0.5, 1.5, 9))).mean()

    gradcheck(fn, [x, y])


def test_backward_requires_scalar_loss():
    with pytest.raises(ValueError):
        (Tensor(np.zeros(3)) + Tensor(np.ones(3))).backward()


def test_backward_diamond_graph_accumulates_both_paths():
    x = Tensor([2.0])
    u = x + Tensor([1.0])      # 3
    v = x + Tensor([-1.0])     # 1
    (u * v).sum().backward()   # d/dx (x+1)(x-1) = 2x
    assert np.allclose(x.grad, [4.0])


def test_backward_reused_node_k_paths():
    x = Tensor([3.0])
    total = x + x + x          # gradient is 3
    total.sum().backward()
    assert np.allclose(x.grad, [3.0])


def test_unreachable_parameter_keeps_no_gradient():
    used = Tensor(rng.normal(size=(2,)))
    unused = Tensor(rng.normal(size=(2,)))
    used.sum().backward()
    assert unused.grad is None  # treated as an all-zero gradient downstream


# -- invariants ------------------------------------------------------------------

def test_value_preserving_ops_keep_element_multisets():
    for trial in range(5):
        r = np.random.default_rng(trial)
        x = r.normal(size=(3, 4, 2))
        before = np.sort(x.ravel())
        permuted = Tensor(x).permute((2, 0, 1)).data
        flattened = Tensor(x).flatten().data
        joined = concat([Tensor(x[:2]), Tensor(x[2:])], axis=0).data
        for result in (permuted, flattened, joined):
            assert np.array_equal(np.sort(result.ravel()), before)


def test_operations_preserve_finiteness():
    x = Tensor(rng.normal(size=(4, 4)))
    y = Tensor(rng.normal(size=(4, 4)))
    out = ((x @ y).relu() * y + x - y / 3.0).permute((1, 0)).flatten().mean()
    assert np.isfinite(out.data)
