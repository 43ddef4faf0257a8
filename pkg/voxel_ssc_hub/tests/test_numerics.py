"""
Tests for the numeric substrate: sampling, softmax, gradient checks, seeding.
"""

import math

import numpy as np
import pytest
import torch

from app.numerics import (
    DTYPE,
    bilinear_sample,
    derive_seed,
    grad_check,
    make_numpy_rng,
    make_torch_rng,
    softmax_normalize,
)
from app.utils.errors import InvalidInputError


def test_bilinear_sample_on_grid_node_is_exact(generator):
    """Integer coordinates return the stored feature vector."""
    fmap = torch.rand(5, 6, 3, generator=generator, dtype=DTYPE)
    point = torch.tensor([4.0, 2.0], dtype=DTYPE)  # column 4, row 2
    assert torch.equal(bilinear_sample(fmap, point), fmap[2, 4])


def test_bilinear_sample_midpoint_averages_neighbours():
    fmap = torch.zeros(2, 2, 1, dtype=DTYPE)
    fmap[0, 0, 0] = 3.0
    fmap[0, 1, 0] = 7.0
    value = bilinear_sample(fmap, torch.tensor([0.5, 0.0], dtype=DTYPE))
    assert float(value) == pytest.approx(5.0, abs=1e-15)


def test_bilinear_sample_outside_is_zero_with_zero_gradient(generator):
    fmap = torch.rand(4, 4, 2, generator=generator, dtype=DTYPE, requires_grad=True)
    point = torch.tensor([-3.0, 10.0], dtype=DTYPE, requires_grad=True)
    value = bilinear_sample(fmap, point)
    assert torch.equal(value, torch.zeros(2, dtype=DTYPE))
    value.sum().backward()
    assert torch.equal(fmap.grad, torch.zeros_like(fmap))
    assert torch.equal(point.grad, torch.zeros_like(point))


def test_bilinear_sample_border_padding_clamps():
    fmap = torch.arange(4, dtype=DTYPE).reshape(2, 2, 1)
    value = bilinear_sample(fmap, torch.tensor([5.0, -4.0], dtype=DTYPE), padding="border")
    assert float(value) == float(fmap[0, 1, 0])


def test_bilinear_sample_gradient_matches_finite_differences(generator):
    fmap = torch.rand(5, 5, 3, generator=generator, dtype=DTYPE)
    point = (torch.rand(2, generator=generator, dtype=DTYPE) * 3.0 + 0.5)
    report = grad_check(lambda m, p: (bilinear_sample(m, p) ** 2).sum(), [fmap, point])
    assert report.passed, report.summary()


def test_bilinear_sample_rejects_bad_padding(generator):
    fmap = torch.rand(2, 2, 1, generator=generator, dtype=DTYPE)
    with pytest.raises(InvalidInputError):
        bilinear_sample(fmap, torch.zeros(2, dtype=DTYPE), padding="reflect")


def test_softmax_examples():
    assert torch.allclose(softmax_normalize(torch.zeros(3, dtype=DTYPE)),
                          torch.full((3,), 1.0 / 3.0, dtype=DTYPE), atol=1e-15)
    assert torch.equal(softmax_normalize(torch.tensor([42.0], dtype=DTYPE)), torch.ones(1, dtype=DTYPE))
    probs = softmax_normalize(torch.tensor([math.log(1.0), math.log(3.0)], dtype=DTYPE))
    assert torch.allclose(probs, torch.tensor([0.25, 0.75], dtype=DTYPE), atol=1e-12)


def test_softmax_is_shift_invariant_and_normalized(generator):
    logits = torch.randn(7, generator=generator, dtype=DTYPE)
    probs = softmax_normalize(logits)
    assert abs(float(probs.sum()) - 1.0) < 1e-12
    assert bool(((probs > 0) & (probs < 1)).all())
    assert torch.allclose(softmax_normalize(logits + 123.25), probs, atol=1e-12)


def test_softmax_rejects_non_finite_and_empty():
    with pytest.raises(InvalidInputError):
        softmax_normalize(torch.tensor([0.0, float("nan")], dtype=DTYPE))
    with pytest.raises(InvalidInputError):
        softmax_normalize(torch.zeros(0, dtype=DTYPE))


def test_grad_check_closed_form():
    x = torch.tensor([1.0, 2.0], dtype=DTYPE)
    report = grad_check(lambda v: (v ** 2).sum(), [x])
    assert report.passed
    assert report.max_relative_error < 1e-9
    assert report.checked == 2


def test_grad_check_reports_wrong_gradient():
    class Wrong(torch.autograd.Function):
        @staticmethod
        def forward(ctx, x):
            return (x ** 2).sum()

        @staticmethod
        def backward(ctx, grad):
            return grad * torch.ones(2, dtype=DTYPE)

    report = grad_check(Wrong.apply, [torch.tensor([1.0, 2.0], dtype=DTYPE)])
    assert not report.passed
    assert report.worst_input == 0


def test_grad_check_flags_non_finite_value():
    report = grad_check(lambda v: torch.log(v).sum(), [torch.tensor([-1.0], dtype=DTYPE)])
    assert not report.finite
    assert not report.passed
    assert "non-finite" in report.summary()


def test_grad_check_rejects_single_precision_and_bad_step():
    with pytest.raises(InvalidInputError):
        grad_check(lambda v: v.sum(), [torch.ones(2)])
    with pytest.raises(InvalidInputError):
        grad_check(lambda v: v.sum(), [torch.ones(2, dtype=DTYPE)], h=0.0)


def test_gradient_of_sum_is_sum_of_gradients(generator):
    a = torch.randn(3, 4, generator=generator, dtype=DTYPE, requires_grad=True)
    f = lambda x: (x.sin() * x).sum()  # noqa: E731
    g = lambda x: (x ** 3).sum()  # noqa: E731
    (grad_sum,) = torch.autograd.grad(f(a) + g(a), [a])
    (grad_f,) = torch.autograd.grad(f(a), [a])
    (grad_g,) = torch.autograd.grad(g(a), [a])
    assert torch.allclose(grad_sum, grad_f + grad_g, atol=1e-12)


def test_generators_are_reproducible():
    first = torch.rand(5, generator=make_torch_rng(9), dtype=DTYPE)
    second = torch.rand(5, generator=make_torch_rng(9), dtype=DTYPE)
    assert torch.equal(first, second)
    assert np.array_equal(make_numpy_rng(1, 2).random(4), make_numpy_rng(1, 2).random(4))
    assert not np.array_equal(make_numpy_rng(1, 2).random(4), make_numpy_rng(2, 1).random(4))


def test_derive_seed_is_stable_and_non_negative():
    assert derive_seed(3, 4) == derive_seed(3, 4)
    assert derive_seed(3, 4) != derive_seed(4, 3)
    assert 0 <= derive_seed(2 ** 64 - 1) < 2 ** 63
