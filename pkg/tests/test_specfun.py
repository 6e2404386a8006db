import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multitrace import specfun
from multitrace.specfun import (
    bessel_j01,
    bessel_j0j1y0y1,
    green_and_h1,
    green_kernel_2d,
    log_split,
    use_backend,
)
from oracles import bessel_series

BACKENDS = ["numpy"] + (["compiled"] if specfun.BACKEND == "compiled" else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    previous = use_backend(request.param)
    yield request.param
    use_backend(previous)


def test_j_only_path_at_zero():
    j0, j1 = bessel_j01(np.array([0.0]))
    assert j0[0] == 1.0
    assert j1[0] == 0.0


def test_reference_values(backend):
    j0, j1, y0, y1 = bessel_j0j1y0y1(np.array([1.0, 2.0]))
    assert j0[0] == pytest.approx(0.7651976866, abs=1e-10)
    assert y0[0] == pytest.approx(0.0882569642, abs=1e-10)
    assert j1[1] == pytest.approx(0.5767248078, abs=1e-10)


@pytest.mark.parametrize("x", [0.0, -1.0])
def test_second_kind_rejects_nonpositive(x):
    with pytest.raises(ValueError):
        bessel_j0j1y0y1(np.array([x]))


def test_matches_series_oracle_across_regimes(backend):
    xs = np.array([1e-3, 0.3, 1.9, 2.0, 2.1, 7.9, 8.0, 8.1, 24.9, 25.0, 25.1, 120.0, 999.0])
    got = np.array(bessel_j0j1y0y1(xs)).T
    ref = np.array([bessel_series(x) for x in xs])
    assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-12


def test_backends_agree():
    if "compiled" not in BACKENDS:
        pytest.skip("compiled extension not built")
    x = np.geomspace(1e-3, 1e3, 2001)
    prev = use_backend("numpy")
    a = np.array(bessel_j0j1y0y1(x))
    use_backend("compiled")
    b = np.array(bessel_j0j1y0y1(x))
    use_backend(prev)
    assert np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-3)) < 1e-12


def test_wronskian(backend):
    x = np.geomspace(1e-3, 1e3, 1000)
    j0, j1, y0, y1 = bessel_j0j1y0y1(x)
    w = j1 * y0 - j0 * y1
    assert np.max(np.abs(w / (2 / (np.pi * x)) - 1)) < 1e-11


def test_green_value_at_unit_distance():
    kv = green_kernel_2d(1.0, np.array([0.0, 0.0]), np.array([1.0, 0.0]))
    assert kv.g.real == pytest.approx(-0.02206424, abs=1e-8)
    assert kv.g.imag == pytest.approx(0.19129942, abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.1, 20.0),
    st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
    st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
)
def test_green_symmetric_and_gradient_antisymmetric(kappa, x, y):
    x, y = np.array(x), np.array(y)
    if np.hypot(*(x - y)) < 1e-6:
        return
    a = green_kernel_2d(kappa, x, y)
    b = green_kernel_2d(kappa, y, x)
    assert a.g == b.g
    np.testing.assert_allclose(a.grad, -b.grad, rtol=1e-14, atol=0)


def test_green_gradient_matches_finite_difference():
    kappa, x, y = 3.0, np.array([0.4, -0.2]), np.array([-0.5, 0.7])
    step = 1e-6
    fd = [
        (green_kernel_2d(kappa, x + step * e, y).g - green_kernel_2d(kappa, x - step * e, y).g)
        / (2 * step)
        for e in np.eye(2)
    ]
    np.testing.assert_allclose(green_kernel_2d(kappa, x, y).grad, fd, rtol=1e-8)


def test_green_rejects_coincident_points():
    with pytest.raises(ValueError):
        green_kernel_2d(1.0, [1.0, 2.0], [1.0, 2.0])


def test_log_singularity_is_bounded():
    # g + log(r)/(2 pi) tends to i/4 - (log(kappa/2) + gamma)/(2 pi)
    limit = 0.25j - (math.log(0.5) + 0.5772156649015329) / (2 * math.pi)
    for r in (1e-3, 1e-6):
        g = green_kernel_2d(1.0, [0.0, 0.0], [r, 0.0]).g
        assert abs(g + math.log(r) / (2 * math.pi) - limit) < r


def test_helmholtz_residual_shrinks_with_stencil():
    kappa, r0 = 2.0, 1.3

    def residual(step):
        pts = np.array([[r0, 0.0], [r0 + step, 0.0], [r0 - step, 0.0], [r0, step], [r0, -step]])
        g, _ = green_and_h1(kappa, np.hypot(pts[:, 0], pts[:, 1]))
        lap = (g[1] + g[2] + g[3] + g[4] - 4 * g[0]) / step**2
        return abs(lap + kappa**2 * g[0])

    e1, e2 = residual(1e-2), residual(5e-3)
    assert e2 < 0.3 * e1


def test_outgoing_phase_increment():
    kappa = 1.0
    r = 200.0
    g, _ = green_and_h1(kappa, np.array([r, r + 2 * np.pi / kappa, r + np.pi / kappa]))
    # one full period advances the phase by 2 pi, half a period by pi
    assert abs(np.angle(g[1] / g[0])) < 1e-3
    assert abs(abs(np.angle(g[2] / g[0])) - np.pi) < 1e-3


def test_log_split_at_zero():
    smooth, coeff = log_split(1.0, np.array([0.0]))
    assert coeff[0] == pytest.approx(-1 / (2 * np.pi), rel=1e-15)
    assert np.isfinite(smooth[0])


@pytest.mark.parametrize("kappa,r", [(1.0, 1.0), (2.0, 0.3)])
def test_log_split_reassembly(kappa, r):
    smooth, coeff = log_split(kappa, np.array([r]))
    g = green_kernel_2d(kappa, [0.0, 0.0], [r, 0.0]).g
    assert abs(coeff[0] * np.log(r) + smooth[0] - g) < 1e-12 * abs(g)


def test_log_split_reassembly_grid():
    r = np.linspace(1e-4, 5.0, 500)
    for kappa in (0.5, 1.0, 5.0):
        smooth, coeff = log_split(kappa, r)
        g, _ = green_and_h1(kappa, r)
        assert np.max(np.abs(coeff * np.log(r) + smooth - g) / np.abs(g)) < 1e-12


def test_log_split_smooth_part_is_continuous_at_zero():
    s0, _ = log_split(2.0, np.array([0.0]))
    s1, _ = log_split(2.0, np.array([1e-8]))
    assert abs(s0[0] - s1[0]) < 1e-12
