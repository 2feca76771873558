"""Single-ray calculus: the cubic mass coordinate, its inverse and
derivatives, the curvature quadratic form, and the symmetric-gap bound."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import bilayerlab as bl
from bilayerlab.rays import (
    Q_eigen,
    Q_eigen_split,
    Q_matrix,
    RayModel,
    quintic_identity,
)

curvatures = st.floats(-3.0, 3.0)


def test_mass_of_length_example():
    ray = RayModel(eps=0.01, cos_tilt=1.0, kappa1=1.0, kappa2=1.0)
    assert bl.mass_of_length(ray, 0.01) == pytest.approx(
        1.0100333333333334, rel=1e-15
    )


def test_mass_of_length_rejects_inadmissible_offset():
    ray = RayModel(eps=0.1, kappa1=-2.0, kappa2=1.0)
    lo, hi = bl.admissible_interval(ray)
    assert (lo, hi) == (-1.0, 0.5)
    with pytest.raises(bl.ReachError):
        bl.mass_of_length(ray, 0.5)
    with pytest.raises(bl.ReachError):
        bl.mass_of_length(ray, -1.2)


def test_mass_range_signs():
    flat = RayModel(eps=0.1)
    assert bl.mass_range(flat) == (-np.inf, np.inf)
    sphere_like = RayModel(eps=0.1, kappa1=1.0, kappa2=1.0)
    m_lo, m_hi = bl.mass_range(sphere_like)
    assert np.isinf(m_hi) and m_lo == pytest.approx(-10.0 / 3.0, rel=1e-12)


def test_inverse_derivatives_at_zero():
    ray = RayModel(eps=0.01, kappa1=1.0, kappa2=1.0)
    d1, d2, d3 = bl.t_derivatives(ray, 0.0)
    assert d1 == pytest.approx(0.01, rel=1e-13)
    assert d2 == pytest.approx(-2.0e-4, rel=1e-12)
    assert d3 == pytest.approx(1.0e-5, rel=1e-11)


def test_t_derivatives_match_finite_differences():
    # seven-point centered stencils on the numerically inverted map
    ray = RayModel(eps=0.05, cos_tilt=0.9, kappa1=0.7, kappa2=-0.4)
    m0 = 0.35
    h = 0.1
    offs = np.arange(-3, 4)
    t = np.asarray(bl.length_of_mass(ray, m0 + h * offs))
    w1 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
    w2 = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0
    w3 = np.array([1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0]) / 8.0
    fd = (np.dot(w1, t) / h, np.dot(w2, t) / h**2, np.dot(w3, t) / h**3)
    exact = bl.t_derivatives(ray, m0)
    for got, ref in zip(fd, exact):
        assert got == pytest.approx(ref, rel=1e-6)


def test_taylor_t_example_and_normal_alignment_guard():
    ray = RayModel(eps=0.01, kappa1=1.0, kappa2=1.0)
    assert bl.taylor_t(ray, 1.0) == pytest.approx(0.009901666666666667, rel=1e-14)
    tilted = RayModel(eps=0.01, cos_tilt=0.5)
    with pytest.raises(bl.BilayerError):
        bl.taylor_t(tilted, 1.0)


def test_taylor_remainder_is_fourth_order():
    ray_eps = np.array([0.04, 0.02, 0.01, 0.005])
    errs = []
    for e in ray_eps:
        ray = RayModel(eps=float(e), kappa1=1.0, kappa2=1.0)
        errs.append(abs(bl.taylor_t(ray, 0.7) - bl.length_of_mass(ray, 0.7)))
    fit = bl.fit_decay_exponent(ray_eps, np.asarray(errs))
    assert not fit.degenerate
    assert fit.exponent >= 3.9


def test_q_form_examples():
    assert Q_matrix(np.diag([1.0, 2.0, 0.0])) == pytest.approx(23.0 / 12.0, rel=1e-14)
    assert Q_matrix(np.eye(3)) == pytest.approx(7.0 / 4.0, rel=1e-14)
    assert Q_eigen(1.0, 1.0) == pytest.approx(5.0 / 6.0, rel=1e-14)
    assert Q_eigen(1.0, -1.0) == pytest.approx(1.0 / 6.0, rel=1e-14)
    with pytest.raises(bl.BilayerError):
        Q_matrix(np.ones((2, 3)))


def test_quintic_identity_examples():
    lhs, rhs = quintic_identity(1.0, -1.0)
    assert lhs == rhs == 8.0
    lhs, rhs = quintic_identity(1.0, 0.0)
    assert lhs == rhs == 21.0


def test_gap_bound_example():
    ray = RayModel(eps=0.1, kappa1=1.0, kappa2=1.0)
    gap, bound = bl.ray_gap_lower_bound(ray, 0.5)
    assert bound == pytest.approx(0.10041666666666667, rel=1e-14)
    assert gap >= bound - 1e-12


@given(lam=curvatures, mu=curvatures, angle=st.floats(0.0, 2.0 * np.pi))
def test_q_matrix_is_conjugation_invariant(lam, mu, angle):
    # rotate the eigenbasis inside the plane orthogonal to the ray
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    a = rot @ np.diag([lam, mu, 0.0]) @ rot.T
    scale = max(1.0, lam * lam, mu * mu)
    assert Q_matrix(a) == pytest.approx(Q_eigen(lam, mu), rel=1e-10, abs=1e-12 * scale)


@given(lam=curvatures, mu=curvatures)
def test_q_split_form_agrees_and_is_nonnegative(lam, mu):
    split = Q_eigen_split(lam, mu)
    assert split >= 0.0
    scale = max(1.0, lam * lam, mu * mu)
    assert Q_eigen(lam, mu) == pytest.approx(split, rel=1e-12, abs=1e-14 * scale)


@given(xi=st.floats(-10.0, 10.0), eta=st.floats(-10.0, 10.0))
def test_quintic_identity_holds(xi, eta):
    lhs, rhs = quintic_identity(xi, eta)
    assert rhs >= 0.0
    scale = max(1.0, abs(lhs), abs(rhs))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9 * scale)


@given(
    eps=st.floats(0.005, 0.3),
    cos_tilt=st.floats(0.2, 1.0),
    k1=curvatures,
    k2=curvatures,
    frac=st.floats(-0.95, 0.95),
)
def test_mass_length_roundtrip(eps, cos_tilt, k1, k2, frac):
    ray = RayModel(eps=eps, cos_tilt=cos_tilt, kappa1=k1, kappa2=k2)
    lo, hi = bl.admissible_interval(ray)
    # stay inside the open interval, clipped to a few band widths
    lo = max(lo, -8.0 * eps)
    hi = min(hi, 8.0 * eps)
    t = 0.5 * (lo + hi) + 0.5 * frac * (hi - lo)
    m = bl.mass_of_length(ray, t)
    back = bl.length_of_mass(ray, m)
    assert back == pytest.approx(t, abs=1e-10 * max(eps, abs(t)))


@given(
    eps=st.floats(0.005, 0.2),
    k1=st.floats(-1.5, 1.5),
    k2=st.floats(-1.5, 1.5),
    m=st.floats(0.0, 1.5),
)
def test_gap_never_undercuts_bound(eps, k1, k2, m):
    ray = RayModel(eps=eps, kappa1=k1, kappa2=k2)
    m_lo, m_hi = bl.mass_range(ray)
    # symmetric levels must both be reachable
    cap = 0.9 * min(m_hi, -m_lo)
    if not np.isfinite(cap):
        cap = 10.0
    m = min(m, cap)
    gap, bound = bl.ray_gap_lower_bound(ray, m)
    assert gap >= bound - 1e-12 * max(1.0, abs(gap))


def test_ray_model_validation():
    with pytest.raises(bl.BilayerError):
        RayModel(eps=-0.1)
    with pytest.raises(bl.BilayerError):
        RayModel(eps=0.1, cos_tilt=0.0)
    with pytest.raises(bl.BilayerError):
        RayModel(eps=0.1, kappa1=np.nan)


def test_out_of_range_mass_raises():
    ray = RayModel(eps=0.1, kappa1=1.0, kappa2=1.0)
    m_lo, _ = bl.mass_range(ray)
    with pytest.raises(bl.RootSolveError):
        bl.length_of_mass(ray, m_lo - 0.1)
