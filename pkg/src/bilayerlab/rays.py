"""Calculus on a single transport ray.

A ray is parametrized by the signed offset t from its base point.  The
cumulative-mass coordinate of the offset band is a cubic in t whose
coefficients are the principal curvatures; this module provides that map,
its inverse (by safeguarded Newton), the closed-form derivatives of the
inverse, the curvature quadratic form, and the lower bound for the gap
between symmetric mass levels.

All operations accept scalars or arrays and are pure.
"""

from dataclasses import dataclass
from typing import NamedTuple, TypeAlias

import numpy as np

from .errors import BilayerError, ReachError, RootSolveError

MassCoordinate: TypeAlias = float

_MAX_NEWTON = 200


@dataclass(frozen=True)
class RayModel:
    """Ray data: band scale eps, cosine between transport direction and
    surface normal, and the two principal curvatures at the base point."""

    eps: float
    cos_tilt: float = 1.0
    kappa1: float = 0.0
    kappa2: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.eps) and self.eps > 0.0):
            raise BilayerError(f"eps must be positive, got {self.eps}")
        if not (0.0 < self.cos_tilt <= 1.0):
            raise BilayerError(f"cos_tilt must lie in (0, 1], got {self.cos_tilt}")
        if not (np.isfinite(self.kappa1) and np.isfinite(self.kappa2)):
            raise BilayerError("curvatures must be finite")

    @property
    def mean_curv(self) -> float:
        return self.kappa1 + self.kappa2

    @property
    def gauss_curv(self) -> float:
        return self.kappa1 * self.kappa2


class GapBound(NamedTuple):
    gap: float
    bound: float


# ---------------------------------------------------------------------------
# cubic core (offset t in length units, p in rescaled length units)


def _poly(t, h, k):
    # t + t^2 h/2 + t^3 k/3, Horner form
    return t * (1.0 + t * (0.5 * h + t * (k / 3.0)))


def _dpoly(t, k1, k2):
    # product form keeps the derivative exactly positive on the admissible set
    return (1.0 + t * k1) * (1.0 + t * k2)


def _interval(k1, k2):
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    kmin = np.minimum(k1, k2)
    kmax = np.maximum(k1, k2)
    with np.errstate(divide="ignore", over="ignore"):
        lo = np.where(kmax > 0.0, -1.0 / np.where(kmax > 0.0, kmax, 1.0), -np.inf)
        hi = np.where(kmin < 0.0, -1.0 / np.where(kmin < 0.0, kmin, 1.0), np.inf)
    return lo, hi


def _poly_invert(y, k1, k2, tol_t):
    """Solve _poly(t) = y for t in the admissible interval.

    Monotone cubic: Newton from the linearization, bisection fallback on a
    maintained bracket.  On an unbounded side of the interval the cubic
    dominates (or is dominated by) the identity, so y itself brackets the
    root there; on a bounded side the interval endpoint does.
    """

    y, k1, k2 = np.broadcast_arrays(
        np.asarray(y, dtype=float), np.asarray(k1, dtype=float), np.asarray(k2, dtype=float)
    )
    y = y.copy()
    h = k1 + k2
    k = k1 * k2
    int_lo, int_hi = _interval(k1, k2)
    kmin = np.minimum(k1, k2)
    kmax = np.maximum(k1, k2)
    lo = np.where(np.isfinite(int_lo), int_lo, np.minimum(y, 0.0))
    hi = np.where(np.isfinite(int_hi), int_hi, np.maximum(y, 0.0))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # closed-form endpoint values; the Horner form cancels
        # catastrophically at t = -1/kappa
        end_lo = -(3.0 - kmin / kmax) / (6.0 * kmax)
        end_hi = -(3.0 - kmax / kmin) / (6.0 * kmin)
        p_lo = np.where(np.isfinite(int_lo), end_lo, _poly(lo, h, k))
        p_hi = np.where(np.isfinite(int_hi), end_hi, _poly(hi, h, k))
    out = (y < p_lo) | (y > p_hi)
    if np.any(out):
        i = int(np.argmax(out))
        raise RootSolveError(
            f"mass target out of range: p-target {y.flat[i]:.6g} outside "
            f"[{p_lo.flat[i]:.6g}, {p_hi.flat[i]:.6g}] for curvatures "
            f"({k1.flat[i]:.6g}, {k2.flat[i]:.6g})"
        )
    t = np.clip(y, lo, hi)
    converged = np.zeros(t.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(_MAX_NEWTON):
            f = _poly(t, h, k) - y
            lo = np.where(f <= 0.0, t, lo)
            hi = np.where(f > 0.0, t, hi)
            step = f / _dpoly(t, k1, k2)
            tn = t - step
            bad = ~np.isfinite(tn) | (tn < lo) | (tn > hi)
            tn = np.where(bad, 0.5 * (lo + hi), tn)
            delta = np.abs(tn - t)
            t = np.where(converged, t, tn)
            tol = tol_t + 8.0 * np.spacing(np.abs(t))
            converged |= (delta <= tol) | (hi - lo <= tol)
            if np.all(converged):
                break
        else:
            raise RootSolveError(
                f"mass inversion did not converge in {_MAX_NEWTON} iterations"
            )
    return t


def admissible_interval(ray: RayModel) -> tuple[float, float]:
    """Open offset interval on which both 1 + t*kappa factors are positive."""

    lo, hi = _interval(ray.kappa1, ray.kappa2)
    return float(lo), float(hi)


def mass_range(ray: RayModel) -> tuple[float, float]:
    """Infimum and supremum of the mass coordinate over the admissible
    interval (infinite on unbounded sides)."""

    lo, hi = admissible_interval(ray)
    scale = ray.cos_tilt / ray.eps
    h, k = ray.mean_curv, ray.gauss_curv
    m_lo = scale * _poly(lo, h, k) if np.isfinite(lo) else -np.inf
    m_hi = scale * _poly(hi, h, k) if np.isfinite(hi) else np.inf
    return float(m_lo), float(m_hi)


def mass_of_length(ray: RayModel, t):
    """Mass coordinate of the offset t."""

    t = np.asarray(t, dtype=float)
    lo, hi = admissible_interval(ray)
    if np.any(t <= lo) or np.any(t >= hi):
        bad = t[(t <= lo) | (t >= hi)].flat[0]
        raise ReachError(
            f"inadmissible offset t={bad:.6g}, admissible interval ({lo:.6g}, {hi:.6g})"
        )
    m = (ray.cos_tilt / ray.eps) * _poly(t, ray.mean_curv, ray.gauss_curv)
    return m if m.ndim else float(m)


def length_of_mass(ray: RayModel, m):
    """Inverse of the mass coordinate, to absolute tolerance 1e-13 * eps."""

    y = np.asarray(m, dtype=float) * (ray.eps / ray.cos_tilt)
    t = _poly_invert(y, ray.kappa1, ray.kappa2, 1e-13 * ray.eps)
    return t if t.ndim else float(t)


def t_derivatives(ray: RayModel, m, order: int = 3):
    """First derivatives of the inverse mass coordinate at mass m.

    Returns a tuple of the first ``order`` derivatives (order <= 3), from
    the closed forms in the derivatives of the forward map.
    """

    if order not in (1, 2, 3):
        raise BilayerError(f"order must be 1, 2, or 3, got {order}")
    t = np.asarray(length_of_mass(ray, m))
    scale = ray.cos_tilt / ray.eps
    m1 = scale * _dpoly(t, ray.kappa1, ray.kappa2)
    d1 = 1.0 / m1
    out = [d1]
    if order >= 2:
        m2 = scale * (ray.mean_curv + 2.0 * t * ray.gauss_curv)
        out.append(-m2 / m1**3)
    if order >= 3:
        m3 = scale * 2.0 * ray.gauss_curv
        out.append(3.0 * m2**2 / m1**5 - m3 / m1**4)
    if not t.ndim:
        return tuple(float(d) for d in out)
    return tuple(out)


def taylor_t(ray: RayModel, m):
    """Third-order small-eps expansion of the inverse mass coordinate.

    Only valid for rays aligned with the surface normal (cos_tilt == 1).
    """

    if ray.cos_tilt != 1.0:
        raise BilayerError("taylor_t requires a normal-aligned ray (cos_tilt == 1)")
    m = np.asarray(m, dtype=float)
    e = ray.eps
    h, k = ray.mean_curv, ray.gauss_curv
    t = e * m - 0.5 * e**2 * h * m**2 + (e**3 / 6.0) * (3.0 * h**2 - 2.0 * k) * m**3
    return t if t.ndim else float(t)


# ---------------------------------------------------------------------------
# curvature quadratic form and inequalities


def Q_matrix(a):
    """Quadratic form (tr A)^2 / 4 - tr(cof A) / 6 of a square matrix."""

    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    if a.shape[-2] != n:
        raise BilayerError(f"expected square matrices, got shape {a.shape}")
    tr = np.trace(a, axis1=-2, axis2=-1)
    tr_cof = np.zeros(a.shape[:-2])
    idx = np.arange(n)
    for i in range(n):
        keep = idx[idx != i]
        minor = a[..., keep[:, None], keep[None, :]]
        tr_cof = tr_cof + np.linalg.det(minor)
    q = 0.25 * tr * tr - tr_cof / 6.0
    return q if np.ndim(q) else float(q)


def Q_eigen(lam, mu):
    """The same form expressed in the two in-plane eigenvalues."""

    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    q = 0.25 * (lam + mu) ** 2 - lam * mu / 6.0
    return q if q.ndim else float(q)


def Q_eigen_split(lam, mu):
    """Equivalent manifestly nonnegative form of Q_eigen."""

    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    q = (lam + mu) ** 2 / 6.0 + (lam * lam + mu * mu) / 12.0
    return q if q.ndim else float(q)


def ray_gap_lower_bound(ray: RayModel, m) -> GapBound:
    """Gap between the offsets at masses +m and -m, with its certified
    cubic-in-m lower bound."""

    t_pos = length_of_mass(ray, m)
    t_neg = length_of_mass(ray, -np.asarray(m, dtype=float))
    gap = t_pos - t_neg
    c = ray.cos_tilt
    q = Q_eigen(ray.kappa1, ray.kappa2)
    m = np.asarray(m, dtype=float)
    bound = 2.0 * ray.eps * m / c + 4.0 * ray.eps**3 * q * m**3 / c**3
    if np.ndim(gap):
        return GapBound(gap, bound)
    return GapBound(float(gap), float(bound))


def quintic_identity(xi, eta):
    """Both sides of the quartic rearrangement used to prove convexity of
    the third derivative of the inverse mass coordinate; the right-hand
    side is manifestly nonnegative."""

    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    s = xi + eta
    p = xi * eta
    lhs = 21.0 * s**4 - 42.0 * p * s**2 + 8.0 * p**2
    rhs = 21.0 * (xi * xi + eta * eta) * s**2 + 8.0 * p**2
    if lhs.ndim:
        return lhs, rhs
    return float(lhs), float(rhs)
