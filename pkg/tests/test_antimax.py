import numpy as np
import pytest

from xicont.antimax import NearSingularError, estimate_delta, sign_portrait, solve_linear_at
from xicont.continuation import make_problem
from xicont.grid import GridSpec, build_grid


@pytest.fixture(scope="module")
def p():
    return make_problem(GridSpec.interval(np.pi, 200), "constant")


def test_solve_against_dense(p):
    A = p.lap.matrix.toarray()
    for lam in (-3.0, 0.5, 2.0, 3.5):
        u = solve_linear_at(p, lam)
        np.testing.assert_allclose(u, np.linalg.solve(-A + lam * np.eye(p.grid.size), p.f), rtol=1e-9)


def test_constant_weight_closed_form():
    # u'' + lam u = 1 on (0, pi) with zero ends: u = (1 - cos(k(x - pi/2))/cos(k pi/2)) / lam, k^2 = lam
    p = make_problem(GridSpec.interval(np.pi, 800), "constant")
    lam = 2.0
    k = np.sqrt(lam)
    x = p.grid.coords
    exact = (1 - np.cos(k * (x - np.pi / 2)) / np.cos(k * np.pi / 2)) / lam
    u = solve_linear_at(p, lam)
    assert np.max(np.abs(u - exact)) < 1e-4 * np.max(np.abs(exact))


def test_near_singular_guard(p):
    with pytest.raises(NearSingularError):
        solve_linear_at(p, p.lam1 + 1e-10)
    with pytest.raises(NearSingularError):
        solve_linear_at(p, p.lam2 - 1e-10)


def test_sign_portrait_verdicts():
    grid = build_grid(GridSpec.interval(1.0, 9))
    bump = np.sin(np.pi * grid.coords)
    assert sign_portrait(grid, bump).verdict == "strictly-positive"
    assert sign_portrait(grid, -bump).verdict == "strictly-negative"
    assert sign_portrait(grid, np.sin(2 * np.pi * grid.coords)).verdict == "mixed"
    sp_ = sign_portrait(grid, bump)
    assert sp_.max_normal_derivative < 0
    assert sp_.normal_derivative[0] == pytest.approx(-bump[0] / grid.h[0])


def test_sign_portrait_2d_sides():
    grid = build_grid(GridSpec.rectangle(1.0, 2.0, 5, 6))
    assert len(grid.boundary_adjacent) == 4
    x, y = grid.coords[:, 0], grid.coords[:, 1]
    u = np.sin(np.pi * x) * np.sin(np.pi * y / 2)
    sp_ = sign_portrait(grid, u)
    assert sp_.verdict == "strictly-positive"
    assert sp_.normal_derivative.size == 2 * 6 + 2 * 5


def test_maximum_principle_below_lam1(p):
    for lam in (-10.0, 0.0, p.lam1 - 1e-3):
        assert sign_portrait(p.grid, solve_linear_at(p, lam)).verdict == "strictly-negative"


def test_constant_weight_reaches_second_eigenvalue(p):
    # for f = 1 the solution stays positive on the whole gap (lam1, lam2)
    rep = estimate_delta(p)
    assert rep.capped
    assert rep.delta_f == pytest.approx(p.lam2 - p.lam1)
    assert all(v == "strictly-positive" for *_, v in rep.scan)


@pytest.mark.parametrize("weight, expected", [(lambda x: 1 + x, 1.3428), (lambda x: np.exp(-2 * x), 0.3733)])
def test_delta_depends_on_weight(weight, expected):
    p = make_problem(GridSpec.interval(np.pi, 200), weight)
    rep = estimate_delta(p, resolution=1e-6)
    assert not rep.capped
    assert rep.delta_f == pytest.approx(expected, abs=2e-3)
    lo, hi = rep.bracket
    assert hi - lo <= 1e-6
    assert sign_portrait(p.grid, solve_linear_at(p, lo)).verdict == "strictly-positive"
    assert sign_portrait(p.grid, solve_linear_at(p, hi)).verdict != "strictly-positive"


def test_rejects_sign_changing_weight(p):
    with pytest.raises(ValueError):
        estimate_delta(p, f=np.cos(p.grid.coords))
