import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stokesgreen import (Annulus, Ball, GreenFunction, HalfBall, HalfSpaceBox, assemble_stokes,
                         build_domain, identity, make_coefficients, oseen_tensor, region_nodes)
from stokesgreen.discretization import FieldPair, layout_of
from stokesgreen.estimates import (EstimateReport, boundary_holder_exponent, check_assumption_A,
                                   check_assumption_B, check_caccioppoli, check_decay,
                                   check_local_boundedness, check_pressure_estimate,
                                   check_reverse_holder, compare_refinement,
                                   corollary_targets, fit_power_law, gradient_norm,
                                   holder_seminorm, homogeneous_solutions, interior_residual,
                                   lq_norm, y12_norm)


def _face_field(lay, func):
    return np.concatenate([func(lay.face_centers(j))[:, j] for j in range(lay.d)])


def _pair(lay, func, p=None):
    pv = np.zeros(lay.n_p) if p is None else p(lay.dom.cell_points(lay.dom.fluid))
    return FieldPair(lay, _face_field(lay, func), pv)


# ---------------------------------------------------------------- fitting


def test_fit_exact_power_law():
    r = np.geomspace(0.1, 0.4, 6)
    fit = fit_power_law(r, 3.0 / r)
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)
    assert fit.log_const == pytest.approx(np.log(3.0), abs=1e-12)
    assert fit.rms == pytest.approx(0.0, abs=1e-12)


@given(slope=st.floats(-3, 3), log_c=st.floats(-5, 5))
def test_fit_recovers_any_power_law(slope, log_c):
    r = np.geomspace(0.05, 0.4, 5)
    fit = fit_power_law(r, np.exp(log_c) * r ** slope)
    assert fit.slope == pytest.approx(slope, abs=1e-9)
    np.testing.assert_allclose(fit.predict(r), np.exp(log_c) * r ** slope, rtol=1e-9)


@settings(max_examples=25, deadline=None)
@given(scale=st.floats(-1e3, 1e3).filter(lambda s: abs(s) > 1e-3),
       seed=st.integers(0, 2 ** 16), q=st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_norms_are_absolutely_homogeneous(scale, seed, q):
    dom = build_domain(3, 1.0, 8)
    reg = region_nodes(dom, Ball((0.5, 0.5, 0.5), 0.3))
    vals = np.random.default_rng(seed).normal(size=dom.shape)
    assert lq_norm(scale * vals, reg, q, dom=dom) == pytest.approx(
        abs(scale) * lq_norm(vals, reg, q, dom=dom), rel=1e-10)


@given(t=st.floats(0.01, 100), seed=st.integers(0, 2 ** 16))
def test_oseen_tensor_scaling_and_rotation(t, seed):
    rng = np.random.default_rng(seed)
    r = rng.normal(size=(4, 3))
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    O = oseen_tensor(r)
    np.testing.assert_allclose(oseen_tensor(t * r), O / t, rtol=1e-10)
    np.testing.assert_allclose(oseen_tensor(r @ Q.T), Q @ O @ Q.T, rtol=1e-9, atol=1e-14)


def test_fit_noisy_power_law():
    rng = np.random.default_rng(7)
    r = np.geomspace(0.05, 0.4, 12)
    vals = r ** -1 * (1 + 0.05 * rng.standard_normal(12))
    assert abs(fit_power_law(r, vals).slope + 1) < 0.08


@pytest.mark.parametrize("r,v", [
    ([0.1, 0.2, 0.4], [1, 2, 3]),
    ([0.1, 0.12, 0.14, 0.16], [1, 2, 3, 4]),
    ([0.1, 0.2, 0.3, 0.4], [1, 0, 3, 4]),
])
def test_fit_rejects_bad_samples(r, v):
    with pytest.raises(ValueError):
        fit_power_law(r, v)


def test_fit_oseen_shell_maxima():
    r = np.geomspace(0.05, 0.2, 8)
    dirs = np.random.default_rng(0).normal(size=(200, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    maxima = [np.linalg.norm(oseen_tensor(rr * dirs), axis=(1, 2)).max() for rr in r]
    assert abs(fit_power_law(r, maxima).slope + 1) < 0.05


# ---------------------------------------------------------------- norms


@pytest.fixture(scope="module")
def lay16():
    return layout_of(build_domain(3, 1.0, 16))


def test_constant_field_norm(lay16):
    dom = lay16.dom
    reg = region_nodes(dom, Ball((0.5, 0.5, 0.5), 0.3))
    c = np.array([1.0, -2.0, 0.5])
    fp = _pair(lay16, lambda x: np.tile(c, (len(x), 1)))
    vol = dom.cell_volumes().ravel()[reg.cells].sum()
    for q in (1, 2, 3.5):
        assert lq_norm(fp, reg, q) == pytest.approx(np.linalg.norm(c) * vol ** (1 / q),
                                                    rel=0.02)
    assert gradient_norm(fp, reg) == pytest.approx(0.0, abs=1e-12)
    assert lq_norm(fp * 3.0, reg, 2) == pytest.approx(3 * lq_norm(fp, reg, 2))
    assert y12_norm(fp * -2.0, reg) == pytest.approx(2 * y12_norm(fp, reg))


def test_inverse_distance_norm_on_annulus():
    dom = build_domain(3, 1.0, 48)
    y = np.array([0.5, 0.5, 0.5]) + dom.h / 2
    reg = region_nodes(dom, Annulus(tuple(y), 0.1, 0.3))
    with np.errstate(divide="ignore"):
        vals = 1 / np.linalg.norm(dom.cell_points() - y, axis=1).reshape(dom.shape)
    for q in (1, 2):
        exact = (4 * np.pi * (0.3 ** (3 - q) - 0.1 ** (3 - q)) / (3 - q)) ** (1 / q)
        assert lq_norm(vals, reg, q, dom=dom) == pytest.approx(exact, rel=0.05)


def test_l2_norm_is_scaled_grid_norm(lay16):
    dom = lay16.dom
    reg = region_nodes(dom, Ball((0.5, 0.5, 0.5), 0.3))
    vals = np.random.default_rng(1).normal(size=dom.shape)
    grid = np.sqrt(np.sum(vals.ravel()[reg.cells] ** 2))
    assert lq_norm(vals, reg, 2, dom=dom) == pytest.approx(grid * dom.h ** 1.5, rel=1e-12)
    with pytest.raises(ValueError):
        lq_norm(vals, reg, np.inf, dom=dom)


def test_holder_seminorm_oracles():
    dom = build_domain(3, 1.0, 16)
    c = np.array([dom.centers[a][8] for a in range(3)])
    reg = region_nodes(dom, Ball(tuple(c), 0.2))
    assert holder_seminorm(np.ones(dom.shape), reg, 0.5, dom=dom) == 0.0
    r = np.linalg.norm(dom.cell_points() - c, axis=1).reshape(dom.shape)
    val = holder_seminorm(r ** 0.5, reg, 0.5, dom=dom, max_pairs=10 ** 6)
    assert 0.9 <= val <= 1.1
    lin = (2.0 * dom.cell_points()[:, 0]).reshape(dom.shape)
    pts = dom.cell_points()[reg.cells]
    span = np.ptp(pts[:, 0])
    val = holder_seminorm(lin, reg, 0.5, dom=dom, max_pairs=10 ** 6)
    assert val == pytest.approx(2.0 * span ** 0.5, rel=0.05)
    with pytest.raises(ValueError):
        holder_seminorm(lin, reg, 1.0, dom=dom)


# ---------------------------------------------------------------- ratio checks


def test_constant_trial_ratios(lay16):
    c = (0.5, 0.5, 0.5)
    const = _pair(lay16, lambda x: np.tile([1.0, 0.0, 0.0], (len(x), 1)))
    rep = check_caccioppoli([const], c, 0.3)
    assert rep["max_ratio"].measured == pytest.approx(0.0, abs=1e-20)
    zero_u = _pair(lay16, lambda x: np.zeros_like(x), p=lambda x: np.ones(len(x)))
    rep = check_pressure_estimate([zero_u], region_nodes(lay16.dom, Ball(c, 0.3)))
    assert rep["max_ratio"].measured == 0.0
    assert "0/0" in rep["max_ratio"].note
    zero = _pair(lay16, lambda x: np.zeros_like(x))
    rep = check_assumption_B([zero, const], c, [0.3])
    assert isinstance(rep.constant, float)
    # local boundedness of a constant is a pure geometry constant
    rep = check_local_boundedness([const], c, 0.3)
    dom = lay16.dom
    vol = dom.cell_volumes().ravel()[region_nodes(dom, Ball(c, 0.3)).cells].sum()
    assert rep["max_ratio"].measured == pytest.approx(0.3 ** 3 / vol)


@pytest.fixture(scope="module")
def homogeneous16():
    dom = build_domain(3, 1.0, 16)
    sys = assemble_stokes(dom, make_coefficients("layered", 3))
    trials, basis = homogeneous_solutions(sys, (0.5, 0.5, 0.5), 0.25, trials=6, basis=3,
                                          seed=2)
    return sys, trials, basis


def test_homogeneous_solutions_solve_the_system(homogeneous16):
    sys, trials, basis = homogeneous16
    reg = region_nodes(sys.dom, Ball((0.5, 0.5, 0.5), 0.25))
    for fp in basis:
        assert interior_residual(sys, fp, reg) < 1e-6
    assert len(trials) == 6


def test_ratio_checks_scale_invariant(homogeneous16):
    _, trials, _ = homogeneous16
    c, R = (0.5, 0.5, 0.5), 0.25
    scaled = [t * 10.0 for t in trials]
    for check in (check_caccioppoli, check_local_boundedness):
        a, b = check(trials, c, R), check(scaled, c, R)
        assert a["max_ratio"].measured == pytest.approx(b["max_ratio"].measured, rel=1e-10)
        assert a["spread"].measured < 10
    rh = check_reverse_holder(trials, c, R, (2.25, 2.5))
    assert rh["max_ratio[q0=2.25]"].mandatory and not rh["max_ratio[q0=2.5]"].mandatory
    ann = check_caccioppoli(trials, c, R, "annulus")
    assert np.isfinite(ann["max_ratio"].measured)
    cert = check_assumption_A(trials, c, [R, 0.3], 0.5)
    assert np.isfinite(cert.constant) and cert.trials == 6
    assert cert.report("A")["constant"].measured == cert.constant


def test_boundary_certificates_on_half_space():
    dom = build_domain(3, 1.0, 16, HalfSpaceBox())
    sys = assemble_stokes(dom, identity(3))
    c = (0.0, 0.5, 0.5)
    trials, _ = homogeneous_solutions(sys, c, 0.25, trials=4, basis=2, seed=3)
    rep = check_caccioppoli(trials, c, 0.25, "boundary")
    assert np.isfinite(rep["max_ratio"].measured)
    region = region_nodes(dom, HalfBall(c, 0.25))
    assert np.isfinite(check_pressure_estimate(trials, region)["max_ratio"].measured)
    alpha2, slopes = boundary_holder_exponent(trials, c, np.geomspace(dom.h, 4 * dom.h, 5))
    assert len(slopes) == 4 and 0 < alpha2 <= 1


def test_compare_refinement_and_targets():
    a, b = EstimateReport("x"), EstimateReport("x")
    a.add("max_ratio", 1.0, 1.0, 0, np.inf)
    b.add("max_ratio", 1.3, 1.3, 0, np.inf)
    rep = compare_refinement(a, b)
    assert rep["max_ratio"].measured == pytest.approx(0.3) and rep.passed
    np.testing.assert_allclose(corollary_targets(3, 1.0), [-0.5, 2, 1, -0.5, 1])


# ---------------------------------------------------------------- Green checks


def _oseen_green(lay, y):
    cols = []
    for k in range(3):
        def col(x, k=k):
            return oseen_tensor(x - y)[:, :, k]
        cols.append(_pair(lay, col))
    return GreenFunction(np.asarray(y), 2 * lay.dom.h, cols, "synthetic", 1e-8, layout=lay)


def test_decay_on_oseen_columns():
    lay = layout_of(build_domain(3, 1.0, 32))
    h = lay.dom.h
    poles = [np.array([0.5, 0.5, 0.5]) + h / 2 + s for s in (0, 0.01, -0.01)]
    rep = check_decay([_oseen_green(lay, y) for y in poles])
    assert rep.passed
    for s in rep.subs:
        assert abs(s.measured + 1) < 0.1
    with pytest.raises(ValueError):
        check_decay([_oseen_green(lay, poles[0])])
    with pytest.raises(ValueError):
        check_decay([_oseen_green(lay, y) for y in poles], radii=[h, 2 * h, 4 * h, 8 * h])
