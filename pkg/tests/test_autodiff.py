"""Finite-difference checks for every autodiff primitive and composite."""

import numpy as np
import numpy.testing as npt
import pytest

from epag import autodiff as ad
from epag.autodiff import Tensor


def numeric_grad(fn, values, eps=1e-6):
    """Central-difference gradient of scalar fn w.r.t. each array in values."""
    grads = []
    for k, base in enumerate(values):
        g = np.zeros_like(base)
        flat = base.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = fn(*values)
            flat[i] = orig - eps
            lo = fn(*values)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * eps)
        grads.append(g)
    return grads


def check_op(build, *shapes, seed=0, tol=1e-7):
    """Compare analytic gradients of scalar-valued `build` against FD."""
    rng = np.random.default_rng(seed)
    values = [rng.uniform(-1.5, 1.5, size=s) for s in shapes]

    tensors = [Tensor(v.copy()) for v in values]
    out = build(*tensors)
    out.backward()

    def value_fn(*vs):
        with ad.no_grad():
            return float(build(*[Tensor(v) for v in vs]).data)

    numeric = numeric_grad(value_fn, values)
    for t, n in zip(tensors, numeric):
        npt.assert_allclose(t.grad, n, rtol=tol, atol=tol)


def test_add_mul_sub_div_pow():
    check_op(lambda a, b: ad.tsum(a * b + a - b / 2.0 + (a + 2.0) ** 2), (3, 4), (3, 4))


def test_broadcasting_grad():
    check_op(lambda a, b: ad.tsum(a * b), (3, 4), (4,))
    check_op(lambda a, b: ad.tsum(a + b), (2, 3, 4), (1, 4))
    check_op(lambda a, b: ad.tsum(a / (b * b + 1.0)), (3, 4), (3, 1))


def test_matmul_2d_2d():
    check_op(lambda a, b: ad.tsum((a @ b) * (a @ b)), (3, 4), (4, 2))


def test_matmul_vector_cases():
    check_op(lambda a, b: ad.tsum(a @ b), (4,), (4, 3))
    check_op(lambda a, b: ad.tsum(a @ b), (3, 4), (4,))
    check_op(lambda a, b: (a @ b) * 2.0, (4,), (4,))


def test_elementwise_functions():
    check_op(lambda a: ad.tsum(ad.exp(a)), (3, 3))
    check_op(lambda a: ad.tsum(ad.log(a * a + 1.5)), (3, 3))
    check_op(lambda a: ad.tsum(ad.tanh(a)), (5,))
    check_op(lambda a: ad.tsum(ad.sigmoid(a)), (5,))
    check_op(lambda a: ad.tsum(ad.gelu(a)), (7,))


def test_reductions_and_shape():
    check_op(lambda a: ad.tsum(ad.tsum(a, axis=1) ** 2), (3, 4))
    check_op(lambda a: ad.tsum(ad.mean(a, axis=0, keepdims=True) * 3.0), (3, 4))
    check_op(lambda a: ad.tsum(ad.reshape(a, (2, 6)) ** 2), (3, 4))
    check_op(lambda a: ad.tsum(ad.transpose(a) @ a), (3, 4))


def test_concat_and_getitem():
    check_op(lambda a, b: ad.tsum(ad.concat([a, b], axis=0) ** 2), (2, 3), (4, 3))
    check_op(lambda a, b: ad.tsum(ad.concat([a, b], axis=1) ** 2), (2, 3), (2, 2))
    check_op(lambda a: ad.tsum(a[1:3, :2] * 2.0), (4, 3))
    check_op(lambda a: a[2] ** 2, (5,))


def test_gather_rows():
    idx = np.array([[0, 2], [2, 1]])
    check_op(lambda a: ad.tsum(ad.gather_rows(a, idx) ** 2), (3, 4))


def test_softmax_rows_sum_to_one_and_grad():
    rng = np.random.default_rng(1)
    x = Tensor(rng.normal(size=(4, 6)) * 5.0)
    s = ad.softmax(x)
    npt.assert_allclose(s.data.sum(axis=-1), 1.0, atol=1e-12)
    check_op(lambda a: ad.tsum(ad.softmax(a)[:, 0]), (4, 6))


def test_layer_norm_grad():
    check_op(lambda x, g, b: ad.tsum(ad.layer_norm(x, g, b) ** 2), (3, 5), (5,), (5,))


def test_clamp_min():
    t = Tensor(np.array([-1.0, 0.5, 2.0]))
    out = ad.tsum(ad.clamp_min(t, 0.0))
    out.backward()
    npt.assert_allclose(out.data, 2.5)
    npt.assert_allclose(t.grad, [0.0, 1.0, 1.0])


def test_detach_blocks_gradient():
    a = Tensor(np.array([1.0, 2.0]))
    frozen = a.detach()
    out = ad.tsum(a * frozen.data.sum())
    out.backward()
    assert frozen.grad is None
    npt.assert_allclose(a.grad, [3.0, 3.0])


def test_grad_accumulates_across_reuse():
    a = Tensor(np.array(2.0))
    out = a * a + a
    out.backward()
    npt.assert_allclose(a.grad, 5.0)


def test_backward_requires_scalar():
    with pytest.raises(ValueError):
        Tensor(np.zeros(3)).backward()


def test_no_grad_skips_graph():
    a = Tensor(np.array(3.0))
    with ad.no_grad():
        out = a * a
    assert out._prev == ()
    npt.assert_allclose(out.data, 9.0)


def test_no_grad_is_thread_local():
    # Concurrent inference wraps forwards in no_grad; overlapping contexts
    # in different threads must not corrupt each other's flag.
    import concurrent.futures

    def work(_):
        with ad.no_grad():
            out = Tensor(np.array(2.0)) * 3.0
        return out._prev == ()

    with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
        assert all(pool.map(work, range(200)))
    tracked = Tensor(np.array(1.0)) * 2.0
    assert tracked._prev != ()


def test_deep_chain_no_recursion_limit():
    # Sequential models build graphs far deeper than Python's recursion limit.
    x = Tensor(np.array(0.5))
    y = x
    for _ in range(20000):
        y = y * 1.0001
    y.backward()
    assert np.isfinite(x.grad)
