import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from penalty_topopt.errors import ConfigurationError
from penalty_topopt.cli import disk_field, epsilon_sweep
from penalty_topopt.oracle import convolve_direct, gaussian_weights_2d, perimeter_double_sum
from penalty_topopt.perimeter import (KernelSpec, c_g_constant, convolve, perimeter_subgrad,
                                      perimeter_value)


def _interior_field(rng, n, k, binary=True):
    chi = np.zeros((n, n))
    inner = rng.uniform(0, 1, (n - 2 * k, n - 2 * k))
    chi[k:n - k, k:n - k] = (inner > 0.5) if binary else inner
    return chi.astype(float)


def test_kernel_weights_normalized_and_truncated():
    k = KernelSpec(eps=0.1, h=0.05)
    w = k.weights
    assert len(w) == 2 * 8 + 1
    assert np.isclose(w.sum(), 1.0)
    assert np.allclose(w, w[::-1])
    assert np.allclose(k.weights_2d(), gaussian_weights_2d(0.1, 0.05), atol=1e-16)
    assert np.isclose(k.weights_2d().sum(), 1.0)
    assert np.isclose(k.center_weight, k.weights_2d()[8, 8])


@pytest.mark.parametrize("eps,h", [(0.0, 0.1), (-1.0, 0.1), (0.1, 0.0)])
def test_kernel_invalid(eps, h):
    with pytest.raises(ConfigurationError):
        KernelSpec(eps, h)


@pytest.mark.parametrize("shape", [(9, 9), (7, 13)])
def test_convolution_matches_direct_sum(shape, rng):
    chi = rng.uniform(0, 1, shape)
    h = 1.0 / shape[1]
    for eps in (h, 2.5 * h):
        k = KernelSpec(eps, h)
        assert np.allclose(convolve(chi, k), convolve_direct(chi, eps, h), atol=1e-14)


def test_convolution_is_self_adjoint(rng):
    k = KernelSpec(0.1, 0.05)
    a, b = rng.normal(size=(2, 20, 20))
    assert np.isclose(np.sum(convolve(a, k) * b), np.sum(a * convolve(b, k)), rtol=1e-13)


def test_convolve_rejects_1d():
    with pytest.raises(ValueError):
        convolve(np.ones(5), KernelSpec(0.1, 0.1))


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("eps_cells", [1.0, 1.5])
def test_perimeter_matches_double_sum_32(seed, eps_cells):
    n = 32
    h = 1.0 / n
    eps = eps_cells * h
    k = KernelSpec(eps, h)
    rad = int(math.floor(4 * eps_cells + 1e-9))
    chi = _interior_field(np.random.default_rng(seed), n, rad)
    fast = perimeter_value(chi, k)
    oracle = perimeter_double_sum(chi, eps, h)
    assert abs(fast - oracle) <= 1e-10


def test_relaxed_perimeter_is_quadratic_double_sum(rng):
    n, h = 16, 1.0 / 16
    chi = _interior_field(rng, n, 4, binary=False)
    k = KernelSpec(h, h)
    assert abs(perimeter_value(chi, k) - perimeter_double_sum(chi, h, h, power=2)) <= 1e-12


def test_perimeter_zero_for_empty_and_positive_for_full():
    k = KernelSpec(0.1, 0.1)
    assert perimeter_value(np.zeros((10, 10)), k) == 0.0
    assert perimeter_value(np.ones((10, 10)), k) > 0.0  # boundary of the domain counts


def test_subgradient_is_gradient_of_relaxed_perimeter(rng):
    k = KernelSpec(1 / 12, 1 / 12)
    chi = rng.uniform(0, 1, (12, 12))
    g = 2 * k.h ** 2 * perimeter_subgrad(chi, k)
    for _ in range(5):
        d = rng.normal(size=chi.shape)
        t = 1e-6
        fd = (perimeter_value(chi + t * d, k) - perimeter_value(chi - t * d, k)) / (2 * t)
        assert np.isclose(fd, np.sum(g * d), rtol=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_relaxed_perimeter_convex(seed):
    rng = np.random.default_rng(seed)
    k = KernelSpec(0.125, 0.125)
    a, b = rng.uniform(0, 1, (2, 8, 8))
    mid = perimeter_value(0.5 * (a + b), k)
    assert mid <= 0.5 * (perimeter_value(a, k) + perimeter_value(b, k)) + 1e-14


def test_c_g_constant_is_sqrt_two_pi():
    assert abs(c_g_constant() - math.sqrt(2 * math.pi)) <= 1e-3
    assert abs(c_g_constant(eps=0.3) - c_g_constant()) <= 1e-9


def test_disk_field():
    chi = disk_field(64, 0.25)
    assert chi.shape == (64, 64)
    assert abs(chi.sum() / 64 ** 2 - math.pi * 0.25 ** 2) < 0.01


def test_epsilon_sweep_converges():
    rows = epsilon_sweep(256, 0.25, [8 / 256, 4 / 256])
    ratios = [r[2] for r in rows]
    assert all(abs(r - 1) < 0.05 for r in ratios)
    assert abs(ratios[1] - 1) < abs(ratios[0] - 1)
