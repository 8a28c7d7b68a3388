import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonlocal_lab.kernels import (
    FAMILIES,
    KernelDomainError,
    construct_kernel,
    eval_kernel,
    rescale,
    symmetrize,
)

coords = st.floats(-50, 50, allow_nan=False)


@pytest.fixture(scope="module")
def sample():
    rng = np.random.default_rng(11)
    return rng.uniform(-6, 6, 100_000), rng.uniform(-6, 6, 100_000)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("L", [1.0, 3.5, 128.0])
def test_bounds_and_exact_symmetry(family, L, sample):
    x, y = sample
    k = construct_kernel(family, L, 0.25, seed=5)
    kxy, kyx = k(x, y), k(y, x)
    assert kxy.min() >= 1.0 and kxy.max() <= L
    assert np.array_equal(kxy, kyx)


def test_constant_values():
    assert construct_kernel("constant", 1.0)(0.3, -2.0) == 1.0
    k7 = construct_kernel("constant", 7.0)
    assert np.all(k7(np.linspace(-3, 3, 11), 0.5) == 7.0)


def test_scalar_in_scalar_out():
    k = construct_kernel("seeded_random_cells", 10.0, 0.25, seed=42)
    v = eval_kernel(k, 0.1, -0.3)
    assert isinstance(v, float)
    assert v == eval_kernel(k, 0.1, -0.3)
    assert 1.0 <= v <= 10.0
    assert k(0.2, 0.7) == k(0.7, 0.2)


def test_determinism_across_constructions():
    rng = np.random.default_rng(3)
    x, y = rng.uniform(-5, 5, (2, 10_000))
    a = construct_kernel("seeded_random_cells", 20.0, 0.25, seed=9)
    b = construct_kernel("seeded_random_cells", 20.0, 0.25, seed=9)
    c = construct_kernel("seeded_random_cells", 20.0, 0.25, seed=10)
    assert np.array_equal(a(x, y), b(x, y))
    assert not np.array_equal(a(x, y), c(x, y))


def test_random_cells_look_uniform():
    k = construct_kernel("seeded_random_cells", 11.0, 0.25, seed=1)
    i = np.arange(400)
    vals = k(0.25 * i[:, None] + 0.1, 0.25 * i[None, :] + 0.1)
    upper = vals[np.triu_indices(400)]
    u = (upper - 1.0) / 10.0
    assert abs(u.mean() - 0.5) < 0.01
    assert abs(u.var() - 1 / 12) < 0.005


def test_random_cells_constant_within_cell_pair():
    k = construct_kernel("seeded_random_cells", 5.0, 0.5, seed=2)
    assert k(0.01, 1.02) == k(0.49, 1.49)
    assert k(-0.2, 3.3) == k(-0.01, 3.01)


def test_checkerboard_high_and_low_cells():
    k = construct_kernel("two_phase_checkerboard", 10.0, 0.25)
    assert k(0.1, 0.1) == 10.0  # cells (0, 0)
    assert k(0.1, 0.3) == 1.0   # cells (0, 1)
    assert k(-0.1, 0.3) == 10.0  # cells (-1, 1)


def test_radial_layers_depend_on_outer_layer():
    k = construct_kernel("radial_layers", 6.0, 0.25)
    assert k(0.1, -0.1) == 6.0  # both in layer 0
    assert k(0.1, 0.3) == 1.0   # outer layer 1
    assert k(-0.6, 0.1) == 6.0  # outer layer 2


@pytest.mark.parametrize("bad", [
    dict(family="constant", L=0.5),
    dict(family="spiral", L=2.0),
    dict(family="two_phase_checkerboard", L=2.0, cell_size=0.0),
    dict(family="constant", L=2.0, s=1.0),
])
def test_construct_rejects(bad):
    with pytest.raises(KernelDomainError):
        construct_kernel(**bad)


def test_rescale_composes_coordinates():
    k = construct_kernel("seeded_random_cells", 4.0, 0.25, seed=3)
    r = rescale(k, 0.5)
    x = np.linspace(-3, 3, 101)
    assert np.array_equal(r(x, 0.77), k(0.5 * x, 0.5 * 0.77))
    rr = rescale(r, 4.0)
    assert np.array_equal(rr(x, 0.3), k(2.0 * x, 0.6))
    with pytest.raises(KernelDomainError):
        rescale(k, 0.0)


def test_symmetrize_mean_of_orders():
    def a(x, y):
        return np.where(np.asarray(x) < np.asarray(y), 2.0, 4.0)

    k = symmetrize(a, 4.0)
    assert k(0.0, 1.0) == 3.0
    assert k(1.0, 0.0) == 3.0


def test_symmetrize_two_branch_example():
    L = 9.0

    def a(x, y):
        return np.where(np.asarray(x) < np.asarray(y), 1.0, L)

    k = symmetrize(a, L)
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(2, 1000))
    assert np.all(k(x, y) == (1 + L) / 2)


def test_symmetrize_fixed_point_and_idempotent():
    base = construct_kernel("two_phase_checkerboard", 5.0, 0.25)
    rng = np.random.default_rng(1)
    x, y = rng.uniform(-3, 3, (2, 5000))
    once = symmetrize(base, 5.0)
    twice = symmetrize(once, 5.0)
    assert np.array_equal(once(x, y), base(x, y))
    assert np.array_equal(twice(x, y), once(x, y))

    def skew(x, y):
        return 1.0 + 3.0 * (np.sin(3 * x + y) ** 2)

    s1 = symmetrize(skew, 4.0)
    s2 = symmetrize(s1, 4.0)
    assert np.array_equal(s1(x, y), s1(y, x))
    assert np.array_equal(s2(x, y), s1(x, y))


def test_symmetrize_rejects_out_of_range():
    k = symmetrize(lambda x, y: np.full(np.broadcast(x, y).shape, 5.0), 4.0)
    with pytest.raises(KernelDomainError):
        k(0.0, 1.0)
    with pytest.raises(KernelDomainError):
        symmetrize(lambda x, y: x, 0.5)


@given(coords, coords, st.sampled_from(FAMILIES), st.floats(1.0, 1e3),
       st.integers(0, 2**64 - 1))
def test_symmetry_property(x, y, family, L, seed):
    k = construct_kernel(family, L, 0.25, seed)
    v = k(x, y)
    assert v == k(y, x)
    assert 1.0 <= v <= L
