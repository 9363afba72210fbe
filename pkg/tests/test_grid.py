import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from xicont.grid import (
    GridError,
    GridSpec,
    build_grid,
    build_laplacian,
    inner_product,
    laplacian_1d_eigenvalues,
    norm,
    project_harmonic,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_interval_nodes_and_weights():
    g = build_grid(GridSpec.interval(np.pi, 9))
    h = np.pi / 10
    assert g.h == pytest.approx((h,))
    np.testing.assert_allclose(g.coords, h * np.arange(1, 10))
    np.testing.assert_allclose(g.weights, h)
    assert g.size == 9 and g.dimension == 1


def test_rectangle_ordering_is_row_major():
    g = build_grid(GridSpec.rectangle(2.0, 1.0, 4, 3))
    hx, hy = 2.0 / 5, 1.0 / 4
    # node i*ny + j sits at (x_i, y_j)
    assert g.coords[1 * 3 + 2] == pytest.approx([2 * hx, 3 * hy])
    assert g.cell_volume == pytest.approx(hx * hy)


@pytest.mark.parametrize(
    "make",
    [
        lambda: GridSpec.interval(0.0, 10),
        lambda: GridSpec.interval(-1.0, 10),
        lambda: GridSpec.interval(1.0, 2),
        lambda: GridSpec.rectangle(1.0, 1.0, 10, 1),
        lambda: GridSpec(3, (1.0, 1.0, 1.0), (4, 4, 4)),
    ],
)
def test_invalid_specs(make):
    with pytest.raises(GridError):
        make()


def test_shape_check():
    g = build_grid(GridSpec.interval(1.0, 5))
    with pytest.raises(GridError):
        g.check(np.zeros(4))


def test_laplacian_1d_matches_dense_stencil():
    n, L = 12, 2.5
    A = build_laplacian(build_grid(GridSpec.interval(L, n))).matrix.toarray()
    h = L / (n + 1)
    ref = np.zeros((n, n))
    for i in range(n):
        ref[i, i] = 2 / h**2
        if i > 0:
            ref[i, i - 1] = -1 / h**2
        if i < n - 1:
            ref[i, i + 1] = -1 / h**2
    np.testing.assert_allclose(A, ref, rtol=1e-14)


def test_laplacian_2d_matches_pointwise_stencil():
    nx, ny, lx, ly = 5, 4, 1.0, 2.0
    grid = build_grid(GridSpec.rectangle(lx, ly, nx, ny))
    A = build_laplacian(grid).matrix
    hx, hy = lx / (nx + 1), ly / (ny + 1)
    rng = np.random.default_rng(3)
    u = rng.standard_normal((nx, ny))
    pad = np.pad(u, 1)
    ref = (2 * pad[1:-1, 1:-1] - pad[:-2, 1:-1] - pad[2:, 1:-1]) / hx**2 + (
        2 * pad[1:-1, 1:-1] - pad[1:-1, :-2] - pad[1:-1, 2:]
    ) / hy**2
    np.testing.assert_allclose(A @ u.ravel(), ref.ravel(), rtol=1e-12, atol=1e-9)


def test_energy_is_sum_of_squared_differences():
    n, L = 30, 1.7
    grid = build_grid(GridSpec.interval(L, n))
    op = build_laplacian(grid)
    u = np.sin(np.arange(n)) + 0.3
    h = L / (n + 1)
    d = np.diff(np.pad(u, 1)) / h
    assert op.energy(u) == pytest.approx(h * np.sum(d**2), rel=1e-12)


def test_closed_form_against_tridiagonal_eigensolver():
    from scipy.linalg import eigh_tridiagonal

    n, L = 40, np.pi
    h = L / (n + 1)
    w = eigh_tridiagonal(np.full(n, 2 / h**2), np.full(n - 1, -1 / h**2), eigvals_only=True)
    np.testing.assert_allclose(laplacian_1d_eigenvalues(n, L), w, rtol=1e-11)


def test_zero_weight_projection_raises():
    g = build_grid(GridSpec.interval(1.0, 5))
    with pytest.raises(GridError):
        project_harmonic(g, np.ones(5), np.zeros(5))


@settings(max_examples=60, deadline=None)
@given(arrays(float, 16, elements=finite), arrays(float, 16, elements=st.floats(0.1, 10)))
def test_projection_round_trip(u, f):
    grid = build_grid(GridSpec.interval(2.0, 16))
    xi, U = project_harmonic(grid, u, f)
    np.testing.assert_allclose(xi * f + U, u, atol=1e-9 * (1 + np.abs(u).max()))
    assert abs(inner_product(grid, U, f)) <= 1e-10 * (1 + norm(grid, u)) * norm(grid, f)


@settings(max_examples=40, deadline=None)
@given(arrays(float, 12, elements=finite))
def test_energy_nonnegative_and_symmetric(u):
    grid = build_grid(GridSpec.rectangle(1.0, 1.5, 4, 3))
    op = build_laplacian(grid)
    assert op.energy(u) >= 0
    assert abs((op.matrix - op.matrix.T)).max() == 0
