import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuselens.errors import ShapeError
from fuselens.image import PatchSpec, RegisteredPair
from fuselens.losses import semantic_loss, semantic_loss_grad
from fuselens.losses.semantic import SL_SPEC, SemanticTerm, normalizer
from oracles import central_difference, max_relative_error, naive_semantic_loss

PIXEL = PatchSpec(1, 1, 0.01)


def test_defaults():
    assert (SL_SPEC.size, SL_SPEC.stride, SL_SPEC.background_threshold) == (5, 3, 0.01)


def test_normalizer():
    assert normalizer(2) == 3
    assert normalizer(10) == 55


def test_identity_is_zero(rng):
    img = rng.random((16, 16))
    assert semantic_loss(RegisteredPair(img, img), img) == 0.0


def test_two_patches_tracking_ct():
    x = RegisteredPair([[0.9, 0.1]], [[0.1, 0.9]])
    assert semantic_loss(x, np.array([[0.9, 0.1]]), PIXEL) == pytest.approx(0.0, abs=1e-15)


def test_two_patches_flat_fused():
    x = RegisteredPair([[0.9, 0.1]], [[0.1, 0.9]])
    assert semantic_loss(x, np.array([[0.5, 0.5]]), PIXEL) == pytest.approx(0.8 / 3, abs=1e-15)


def test_background_patches_excluded():
    x = RegisteredPair([[0.9, 0.1, 0.0]], [[0.1, 0.9, 0.005]])
    y = np.array([[0.5, 0.5, 1.0]])
    # third pixel is background in both sources, so M stays 2
    assert semantic_loss(x, y, PIXEL) == pytest.approx(0.8 / 3, abs=1e-15)


def test_fewer_than_two_kept_is_zero(rng):
    x = RegisteredPair(np.zeros((6, 6)), np.zeros((6, 6)))
    assert semantic_loss(x, rng.random((6, 6)), PatchSpec(3, 3)) == 0.0
    np.testing.assert_array_equal(semantic_loss_grad(x, rng.random((6, 6)), PatchSpec(3, 3)), 0.0)


def test_shape_mismatch(rng):
    x = RegisteredPair(rng.random((8, 8)), rng.random((8, 8)))
    with pytest.raises(ShapeError):
        semantic_loss(x, rng.random((8, 9)))


def test_symmetric_in_modalities(rng):
    ct, mr, y = rng.random((3, 20, 20))
    x = RegisteredPair(ct, mr)
    assert semantic_loss(x, y) == pytest.approx(semantic_loss(x.swapped(), y), abs=1e-14)


@pytest.mark.parametrize("threshold", [0.0, 0.01, 0.3])
def test_matches_brute_force(rng, threshold):
    for _ in range(5):
        ct, mr, y = rng.random((3, 20, 20))
        ct[:8] *= 0.02
        mr[:8] *= 0.02
        spec = PatchSpec(5, 3, threshold)
        expected = naive_semantic_loss(ct, mr, y, 5, 3, threshold)
        assert semantic_loss(RegisteredPair(ct, mr), y, spec) == pytest.approx(expected, abs=1e-12)


def test_gradient_matches_finite_differences(rng):
    ct, mr, y = rng.random((3, 16, 16))
    x = RegisteredPair(ct, mr)
    spec = PatchSpec(5, 3, 0.0)
    analytic = semantic_loss_grad(x, y, spec)
    numeric = central_difference(lambda v: semantic_loss(x, v, spec), y)
    assert max_relative_error(analytic, numeric) < 1e-4


def test_gradient_zero_at_identity(rng):
    img = rng.random((16, 16))
    np.testing.assert_array_equal(semantic_loss_grad(RegisteredPair(img, img), img), 0.0)


def test_gradient_zero_for_constant_fused(rng):
    ct, mr = rng.random((2, 16, 16))
    grad = semantic_loss_grad(RegisteredPair(ct, mr), np.full((16, 16), 0.4))
    assert grad.sum() == pytest.approx(0.0, abs=1e-15)


def test_gradient_entries_sum_to_zero(rng):
    ct, mr, y = rng.random((3, 19, 19))
    grad = semantic_loss_grad(RegisteredPair(ct, mr), y)
    assert grad.sum() == pytest.approx(0.0, abs=1e-12)


def test_term_reuse_matches_functions(rng):
    ct, mr, y = rng.random((3, 16, 16))
    x = RegisteredPair(ct, mr)
    term = SemanticTerm(x)
    loss, grad = term(y, want_grad=True)
    # the value-only and gradient kernels sum in different orders
    assert loss == pytest.approx(semantic_loss(x, y), rel=1e-14)
    np.testing.assert_array_equal(grad, semantic_loss_grad(x, y))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-0.3, 0.3))
def test_invariant_to_fused_offset(seed, offset):
    # only differences of fused patch means enter the loss
    r = np.random.default_rng(seed)
    ct, mr = r.random((2, 12, 12))
    y = r.random((12, 12)) * 0.4 + 0.3
    x = RegisteredPair(ct, mr)
    assert semantic_loss(x, y + offset) == pytest.approx(semantic_loss(x, y), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_nonnegative_and_bounded(seed):
    r = np.random.default_rng(seed)
    ct, mr, y = r.random((3, 14, 14))
    loss = semantic_loss(RegisteredPair(ct, mr), y)
    # each pair term is at most 1 and there are M(M-1)/2 < M(M+1)/2 of them
    assert 0.0 <= loss < 1.0
