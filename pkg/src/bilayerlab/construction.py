"""Recovery-band construction around a normalized closed surface.

Given a surface of area 1/2 and a band scale eps, this module solves for
the inner band half-thickness, the per-node outer shells, and the splitting
offset of the per-ray transport map; it also exposes the two densities (the
inner slab and the pair of outer shells) implicitly and as voxelizations.

All offsets are plain lengths along the surface normal.  Mass bookkeeping
happens in the cumulative-mass coordinate of ``rays``; the defining
equations are solved to residuals far below the 1e-10 contract so that
mass-constraint violations never pollute the second-order energy scale.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    BilayerError,
    DescriptorError,
    QuadratureError,
    ReachError,
    RootSolveError,
    VoxelizationError,
)
from .rays import _interval, _poly, _poly_invert
from .surfaces import (
    ParametricSurface,
    QuadratureGrid,
    SurfaceSample,
    build_grid,
    frame_arrays,
    surface_integral,
)
from .transport import DiscreteMeasure

_COND_TOL = 1e-10


def thread_count() -> int:
    """Worker count from BILAYER_THREADS (default 1).

    Parallel regions only fill disjoint node slices with elementwise math,
    so results are identical for every thread count.
    """

    raw = os.environ.get("BILAYER_THREADS", "1").strip()
    try:
        n = int(raw)
    except ValueError:
        raise DescriptorError(f"BILAYER_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise DescriptorError(f"BILAYER_THREADS must be >= 1, got {n}")
    return n


@dataclass(frozen=True)
class BilayerProfile:
    """Global band data: half-thickness ell_plus = eps + a*eps^3 with the
    correction coefficient solving the total-mass identity exactly."""

    surface: ParametricSurface
    grid: QuadratureGrid
    eps: float
    a_coef: float
    ell_plus: float
    ell_minus: float
    int_gauss: float
    thickness_residual: float
    cond1_residual: float


@dataclass(frozen=True)
class NodeProfile:
    """Per-node outer-shell data (index -1 for off-grid samples)."""

    index: int
    kappa1: float
    kappa2: float
    L_plus: float
    L_minus: float
    r_split: float
    delta_plus: float
    delta_minus: float


class ShellArrays(NamedTuple):
    L_plus: np.ndarray
    L_minus: np.ndarray
    r_split: np.ndarray
    delta_plus: np.ndarray
    delta_minus: np.ndarray
    m_ell_plus: np.ndarray
    m_ell_minus: np.ndarray
    m_L_plus: np.ndarray
    m_L_minus: np.ndarray
    m_r: np.ndarray


@dataclass(frozen=True, eq=False)
class DensityPair:
    """The constructed density pair: inner slab between the core offsets
    and the two outer shells, described by per-node offsets and masses."""

    profile: BilayerProfile
    shells: ShellArrays
    cond2_residual: float
    rp_residual: float
    mass_u: float
    mass_v: float
    reach_margin: float

    @property
    def surface(self) -> ParametricSurface:
        return self.profile.surface

    @property
    def grid(self) -> QuadratureGrid:
        return self.profile.grid

    @property
    def eps(self) -> float:
        return self.profile.eps

    def node_profile(self, i: int) -> NodeProfile:
        s = self.shells
        return NodeProfile(
            index=i,
            kappa1=float(self.grid.kappa1[i]),
            kappa2=float(self.grid.kappa2[i]),
            L_plus=float(s.L_plus[i]),
            L_minus=float(s.L_minus[i]),
            r_split=float(s.r_split[i]),
            delta_plus=float(s.delta_plus[i]),
            delta_minus=float(s.delta_minus[i]),
        )


# ---------------------------------------------------------------------------
# global thickness


def solve_thickness(
    surface: ParametricSurface, eps: float, grid: QuadratureGrid | None = None
) -> BilayerProfile:
    """Solve for the inner band half-thickness at the given eps.

    The correction coefficient a satisfies
        a + (2/3) IK + (2 a eps^2 + 2 a^2 eps^4 + (2/3) eps^6 a^3) IK = 0
    with IK the Gauss-curvature integral; this is exactly the statement
    that the inner band carries unit mass.
    """

    if not (np.isfinite(eps) and eps > 0.0):
        raise BilayerError(f"eps must be positive, got {eps}")
    if grid is None:
        grid = build_grid(surface)
    if abs(grid.area - 0.5) > 1e-8:
        raise BilayerError(
            f"surface area is {grid.area:.12g}, expected 1/2; "
            "run normalize_to_unit_mass first"
        )
    ik = surface_integral(surface, grid.gauss_curv, grid)
    a = -(2.0 / 3.0) * ik
    residual = np.inf
    for _ in range(100):
        one = 1.0 + a * eps**2
        g = a + (2.0 / 3.0) * ik + (
            2.0 * a * eps**2 + 2.0 * a**2 * eps**4 + (2.0 / 3.0) * eps**6 * a**3
        ) * ik
        dg = 1.0 + 2.0 * eps**2 * one * one * ik
        if dg <= 0.0 or not np.isfinite(dg):
            raise RootSolveError(
                f"thickness solve failed: derivative {dg:.3g} at a={a:.6g} (eps={eps:g})"
            )
        step = g / dg
        a -= step
        residual = abs(g)
        if abs(step) <= 1e-14 * max(1.0, abs(a)):
            break
    else:
        raise RootSolveError(f"thickness solve failed to converge (eps={eps:g})")
    one = 1.0 + a * eps**2
    residual = abs(
        a + (2.0 / 3.0) * ik
        + (2.0 * a * eps**2 + 2.0 * a**2 * eps**4 + (2.0 / 3.0) * eps**6 * a**3) * ik
    )
    ell_plus = eps + a * eps**3
    if ell_plus <= 0.0:
        raise ReachError(f"inner band collapses: ell_plus={ell_plus:.6g} at eps={eps:g}")
    lo, hi = _interval(grid.kappa1, grid.kappa2)
    if np.any(ell_plus >= hi) or np.any(-ell_plus <= lo):
        bad = int(np.argmin(np.minimum(hi - ell_plus, -ell_plus - lo)))
        raise ReachError(
            f"inner band leaves the admissible offset range at node {bad} "
            f"(ell_plus={ell_plus:.6g}, admissible ({lo if np.isscalar(lo) else lo[bad]:.6g}, "
            f"{hi if np.isscalar(hi) else hi[bad]:.6g}))"
        )
    h, k = grid.mean_curv, grid.gauss_curv
    band_mass = (_poly(ell_plus, h, k) - _poly(-ell_plus, h, k)) / eps
    cond1 = abs(surface_integral(surface, band_mass, grid) - 1.0)
    if cond1 > _COND_TOL:
        raise QuadratureError(
            f"inner-band mass misses 1 by {cond1:.3g} (grid {grid.spec}); "
            "the quadrature grid is too coarse for this surface"
        )
    return BilayerProfile(
        surface=surface,
        grid=grid,
        eps=float(eps),
        a_coef=float(a),
        ell_plus=float(ell_plus),
        ell_minus=float(-ell_plus),
        int_gauss=float(ik),
        thickness_residual=float(residual),
        cond1_residual=float(cond1),
    )


# ---------------------------------------------------------------------------
# outer shells


def _solve_outer_arrays(
    eps: float, ell_plus: float, k1: np.ndarray, k2: np.ndarray, node_offset: int = 0
) -> ShellArrays:
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    h = k1 + k2
    k = k1 * k2
    m_ell_p = _poly(ell_plus, h, k) / eps
    m_ell_m = _poly(-ell_plus, h, k) / eps
    band = m_ell_p - m_ell_m

    target_p = 2.0 + 1.5 * eps * h
    target_m = target_p - 2.0 * band
    target_r = 2.0 * m_ell_p - target_p

    int_lo, int_hi = _interval(k1, k2)
    with np.errstate(invalid="ignore"):
        sup_p = np.where(np.isfinite(int_hi), _poly(int_hi, h, k), np.inf)
        inf_p = np.where(np.isfinite(int_lo), _poly(int_lo, h, k), -np.inf)
    for name, target in (("upper", target_p), ("lower", target_m), ("splitting", target_r)):
        y = target * eps
        out = (y >= sup_p) | (y <= inf_p)
        if np.any(out):
            i = int(np.argmax(out))
            raise ReachError(
                f"shell exceeds reach at node {i + node_offset}: {name} shell needs "
                f"mass {target.flat[i]:.6g} but the ray only carries masses in "
                f"({inf_p.flat[i] / eps:.6g}, {sup_p.flat[i] / eps:.6g}) "
                f"(curvatures {k1.flat[i]:.6g}, {k2.flat[i]:.6g}, eps={eps:g})"
            )

    tol = 1e-13 * eps
    L_p = _poly_invert(target_p * eps, k1, k2, tol)
    L_m = _poly_invert(target_m * eps, k1, k2, tol)
    r = _poly_invert(target_r * eps, k1, k2, tol)

    m_L_p = _poly(L_p, h, k) / eps
    m_L_m = _poly(L_m, h, k) / eps
    m_r = _poly(r, h, k) / eps
    return ShellArrays(
        L_plus=L_p,
        L_minus=L_m,
        r_split=r,
        delta_plus=m_L_p - m_ell_p,
        delta_minus=m_L_m - m_ell_m,
        m_ell_plus=m_ell_p,
        m_ell_minus=m_ell_m,
        m_L_plus=m_L_p,
        m_L_minus=m_L_m,
        m_r=m_r,
    )


def _solve_outer_chunked(eps, ell_plus, k1, k2) -> ShellArrays:
    n = k1.shape[0]
    workers = thread_count()
    if workers <= 1 or n < 4096:
        return _solve_outer_arrays(eps, ell_plus, k1, k2)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(
            pool.map(
                lambda s: _solve_outer_arrays(eps, ell_plus, k1[s[0] : s[1]], k2[s[0] : s[1]], s[0]),
                spans,
            )
        )
    return ShellArrays(*(np.concatenate([getattr(p, f) for p in parts]) for f in ShellArrays._fields))


def solve_outer(profile: BilayerProfile, node: SurfaceSample) -> NodeProfile:
    """Outer shells, splitting offset, and shell masses at one sample."""

    s = _solve_outer_arrays(
        profile.eps,
        profile.ell_plus,
        np.asarray([node.kappa1]),
        np.asarray([node.kappa2]),
    )
    return NodeProfile(
        index=-1,
        kappa1=node.kappa1,
        kappa2=node.kappa2,
        L_plus=float(s.L_plus[0]),
        L_minus=float(s.L_minus[0]),
        r_split=float(s.r_split[0]),
        delta_plus=float(s.delta_plus[0]),
        delta_minus=float(s.delta_minus[0]),
    )


def build_construction(
    surface: ParametricSurface, eps: float, grid: QuadratureGrid | None = None
) -> DensityPair:
    """Full construction: thickness, all node shells, feasibility checks."""

    profile = solve_thickness(surface, eps, grid)
    grid = profile.grid
    shells = _solve_outer_chunked(eps, profile.ell_plus, grid.kappa1, grid.kappa2)

    ell_p = profile.ell_plus
    ordered = (
        (shells.L_minus < -ell_p)
        & (shells.r_split > -ell_p)
        & (shells.r_split < ell_p)
        & (shells.L_plus > ell_p)
    )
    if not np.all(ordered):
        i = int(np.argmin(ordered))
        raise ReachError(
            "shell ordering collapses at node {}: L-={:.6g}, l-={:.6g}, r={:.6g}, "
            "l+={:.6g}, L+={:.6g} (delta_minus={:.6g}; eps={:g} is too large "
            "for this surface)".format(
                i,
                shells.L_minus[i],
                -ell_p,
                shells.r_split[i],
                ell_p,
                shells.L_plus[i],
                shells.delta_minus[i],
                eps,
            )
        )

    cond2 = float(
        np.max(
            np.abs(
                (shells.m_L_plus - shells.m_L_minus)
                - 2.0 * (shells.m_ell_plus - shells.m_ell_minus)
            )
        )
    )
    rp = float(
        np.max(
            np.abs(
                (shells.m_L_plus - shells.m_ell_plus) - (shells.m_ell_plus - shells.m_r)
            )
        )
    )
    if cond2 > _COND_TOL or rp > _COND_TOL:
        raise RootSolveError(
            f"outer-shell solve residuals too large: cond2={cond2:.3g}, rp={rp:.3g}"
        )

    mass_u = surface_integral(surface, shells.m_ell_plus - shells.m_ell_minus, grid)
    mass_v = surface_integral(
        surface,
        (shells.m_L_plus - shells.m_ell_plus) + (shells.m_ell_minus - shells.m_L_minus),
        grid,
    )
    margins = np.minimum(
        np.minimum(1.0 + shells.L_plus * grid.kappa1, 1.0 + shells.L_plus * grid.kappa2),
        np.minimum(1.0 + shells.L_minus * grid.kappa1, 1.0 + shells.L_minus * grid.kappa2),
    )
    return DensityPair(
        profile=profile,
        shells=shells,
        cond2_residual=cond2,
        rp_residual=rp,
        mass_u=float(mass_u),
        mass_v=float(mass_v),
        reach_margin=float(np.min(margins)),
    )


# ---------------------------------------------------------------------------
# per-ray transport map


def transport_phi(profile: BilayerProfile, node: NodeProfile, t):
    """Image of the inner-band offset t under the per-ray transport map.

    Offsets above the splitting point map into the upper shell, offsets
    below into the lower shell; the splitting point itself is excluded.
    """

    t = np.asarray(t, dtype=float)
    eps = profile.eps
    if np.any(t <= profile.ell_minus) or np.any(t >= profile.ell_plus):
        raise BilayerError(
            f"offset outside the inner band ({profile.ell_minus:.6g}, {profile.ell_plus:.6g})"
        )
    if np.any(t == node.r_split):
        raise BilayerError("splitting point: the transport map is not defined at t=r")
    h = node.kappa1 + node.kappa2
    k = node.kappa1 * node.kappa2
    m = _poly(t, h, k) / eps
    shift = np.where(t > node.r_split, node.delta_plus, node.delta_minus)
    out = _poly_invert((m + shift) * eps, node.kappa1, node.kappa2, 1e-13 * eps)
    return out if out.ndim else float(out)


def transport_potential(pair: DensityPair) -> Callable:
    """Candidate Kantorovich potential -|t - r| built from the construction:
    steepest descent along each ray toward the splitting offset.

    Returns a callable mapping an (..., 3) array of points to values,
    suitable for ``transport.dual_certificate``.
    """

    profile = pair.profile
    surface = pair.surface

    def phi(pts):
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, 3)
        t, u, v = project_points(surface, flat)
        r = shells_at(profile, u, v).r_split
        return (-np.abs(t - r)).reshape(pts.shape[:-1])

    return phi


def pushforward_check(pair: DensityPair, g: Callable, n_mass: int = 48, n_t: int = 64):
    """Integrate a test function against the pushed-forward inner density
    and against the shell density by two independent quadratures.

    ``g`` maps an (..., 3) array of points to an (...,) array.  Returns
    (lhs, rhs); agreement is limited only by the two quadratures.
    """

    grid = pair.grid
    s = pair.shells
    eps = pair.eps
    points = grid.points
    normals = grid.normal
    k1, k2 = grid.kappa1, grid.kappa2
    h = k1 + k2

    x_m, w_m = np.polynomial.legendre.leggauss(n_mass)
    lhs = 0.0
    for m_lo, m_hi, shift in (
        (s.m_ell_minus, s.m_r, s.delta_minus),
        (s.m_r, s.m_ell_plus, s.delta_plus),
    ):
        mid = 0.5 * (m_hi + m_lo)
        half = 0.5 * (m_hi - m_lo)
        m_nodes = mid[:, None] + half[:, None] * x_m[None, :]
        t_img = _poly_invert(
            (m_nodes + shift[:, None]) * eps, k1[:, None], k2[:, None], 1e-13 * eps
        )
        vals = g(points[:, None, :] + t_img[:, :, None] * normals[:, None, :])
        inner = np.sum(vals * w_m[None, :], axis=1) * half
        lhs += surface_integral(pair.surface, inner, grid)

    x_t, w_t = np.polynomial.legendre.leggauss(n_t)
    rhs = 0.0
    ell = np.full_like(s.L_plus, pair.profile.ell_plus)
    for t_lo, t_hi in ((ell, s.L_plus), (s.L_minus, -ell)):
        mid = 0.5 * (t_hi + t_lo)
        half = 0.5 * (t_hi - t_lo)
        t_nodes = mid[:, None] + half[:, None] * x_t[None, :]
        jac = 1.0 + t_nodes * h[:, None] + t_nodes**2 * (k1 * k2)[:, None]
        vals = g(points[:, None, :] + t_nodes[:, :, None] * normals[:, None, :])
        inner = np.sum(vals * jac * w_t[None, :], axis=1) * half / eps
        rhs += surface_integral(pair.surface, inner, grid)
    return float(lhs), float(rhs)


# ---------------------------------------------------------------------------
# point projection and voxelization


def project_points(surface: ParametricSurface, pts: np.ndarray):
    """Signed normal offset and chart parameters of the nearest surface
    point, for points within the tubular neighbourhood."""

    pts = np.asarray(pts, dtype=float)
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    if surface.kind == "sphere":
        (radius,) = surface.params
        rad = np.maximum(np.sqrt(x * x + y * y + z * z), np.finfo(float).tiny)
        t = rad - radius
        u = np.clip(z / rad, -1.0 + 1e-12, 1.0 - 1e-12)
        v = np.arctan2(y, x) % (2.0 * np.pi)
        return t, u, v
    if surface.kind == "torus":
        ring, tube = surface.params
        rho = np.sqrt(x * x + y * y)
        d = np.sqrt((rho - ring) ** 2 + z * z)
        t = d - tube
        u = np.arctan2(z, rho - ring) % (2.0 * np.pi)
        v = np.arctan2(y, x) % (2.0 * np.pi)
        return t, u, v
    if surface.kind == "flat":
        (side,) = surface.params
        return z.copy(), x % side, y % side
    if surface.kind == "ellipsoid":
        return _project_ellipsoid(surface, pts)
    raise BilayerError(f"no projection rule for surface kind {surface.kind!r}")


def _project_ellipsoid(surface: ParametricSurface, pts: np.ndarray):
    a, b, c = surface.params
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    u = np.clip(z / c, -1.0 + 1e-9, 1.0 - 1e-9)
    v = np.arctan2(y / b, x / a) % (2.0 * np.pi)
    embed = surface.chart.embed
    for _ in range(60):
        r, ru, rv, *_ = embed(u, v)
        e = r - pts
        g11 = np.einsum("...i,...i->...", ru, ru)
        g12 = np.einsum("...i,...i->...", ru, rv)
        g22 = np.einsum("...i,...i->...", rv, rv)
        b1 = -np.einsum("...i,...i->...", e, ru)
        b2 = -np.einsum("...i,...i->...", e, rv)
        det = g11 * g22 - g12 * g12
        du = (g22 * b1 - g12 * b2) / det
        dv = (g11 * b2 - g12 * b1) / det
        # plain Gauss-Newton with a parameter clamp near the poles
        u = np.clip(u + du, -1.0 + 1e-9, 1.0 - 1e-9)
        v = (v + dv) % (2.0 * np.pi)
        if max(np.max(np.abs(du), initial=0.0), np.max(np.abs(dv), initial=0.0)) < 1e-13:
            break
    else:
        raise QuadratureError("ellipsoid projection did not converge")
    r, normal, *_ = frame_arrays(surface, u, v)
    t = np.einsum("...i,...i->...", pts - r, normal)
    return t, u, v


def _lattice_axes(pair: DensityPair, spacing: float):
    surface = pair.surface
    s = pair.shells
    maxoff = float(max(np.max(s.L_plus), -np.min(s.L_minus)))
    pad = maxoff + 2.0 * spacing
    if surface.kind == "flat":
        (side,) = surface.params
        nxy = max(int(round(side / spacing)), 1)
        sxy = side / nxy
        ax_x = (np.arange(nxy) + 0.5) * sxy
        kmax = int(np.ceil(pad / spacing)) + 1
        ax_z = (np.arange(-kmax, kmax) + 0.5) * spacing
        return (ax_x, ax_x.copy(), ax_z), sxy * sxy * spacing, maxoff
    lo = pair.grid.points.min(axis=0) - pad
    hi = pair.grid.points.max(axis=0) + pad
    counts = np.maximum(np.ceil((hi - lo) / spacing).astype(int), 1)
    if int(np.prod(counts.astype(float))) > 1_000_000_000:
        raise VoxelizationError(
            f"voxel lattice of {counts} cells is unreasonably large; increase the spacing"
        )
    axes = tuple(lo[i] + (np.arange(counts[i]) + 0.5) * spacing for i in range(3))
    return axes, spacing**3, maxoff


def _ellipsoid_prune(surface: ParametricSurface, pts: np.ndarray, pad: float):
    a, b, c = surface.params
    q = np.sqrt((pts[:, 0] / a) ** 2 + (pts[:, 1] / b) ** 2 + (pts[:, 2] / c) ** 2)
    mmin, mmax = min(a, b, c), max(a, b, c)
    # |q - 1| * mmin^2 / mmax under-estimates the distance to the surface
    return np.abs(q - 1.0) * (mmin * mmin / mmax) <= pad


def voxelize(
    pair: DensityPair, spacing: float, support_cap: int = 4000
) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """Voxelize the two densities on a cubic lattice of the given spacing.

    Cell centers inside a band receive weight (cell volume)/eps; weights are
    rescaled to total mass 1 at the end (the pre-rescale mass is recorded on
    the measures).  If a support exceeds ``support_cap`` cells, runs of
    lexicographically consecutive cells are merged into weighted centroids.
    """

    if not (np.isfinite(spacing) and spacing > 0.0):
        raise BilayerError(f"voxel spacing must be positive, got {spacing}")
    surface = pair.surface
    profile = pair.profile
    eps = pair.eps
    ell_p = profile.ell_plus
    (ax_x, ax_y, ax_z), cell_volume, maxoff = _lattice_axes(pair, spacing)
    pad = maxoff + spacing

    u_cells = []
    v_cells = []
    yz = np.stack(
        [np.repeat(ax_y, ax_z.size), np.tile(ax_z, ax_y.size)], axis=1
    )
    for xc in ax_x:
        slab = np.empty((yz.shape[0], 3))
        slab[:, 0] = xc
        slab[:, 1:] = yz
        if surface.kind == "ellipsoid":
            keep = _ellipsoid_prune(surface, slab, pad)
            slab = slab[keep]
            if slab.shape[0] == 0:
                continue
        t, u, v = project_points(surface, slab)
        near = np.abs(t) <= pad
        if not np.any(near):
            continue
        slab, t, u, v = slab[near], t[near], u[near], v[near]
        in_u = (t > -ell_p) & (t < ell_p)
        if np.any(in_u):
            u_cells.append(slab[in_u])
        cand = ~in_u
        if np.any(cand):
            sh = shells_at(profile, u[cand], v[cand])
            tc = t[cand]
            in_v = ((tc > ell_p) & (tc < sh.L_plus)) | ((tc < -ell_p) & (tc > sh.L_minus))
            if np.any(in_v):
                v_cells.append(slab[cand][in_v])

    def finish(cells, label):
        if not cells:
            raise VoxelizationError(
                f"voxelization too coarse: no cells inside the {label} band "
                f"(spacing {spacing:g}, band scale {eps:g})"
            )
        points = np.concatenate(cells, axis=0)
        weights = np.full(points.shape[0], cell_volume / eps)
        raw_mass = float(np.sum(weights))
        n = points.shape[0]
        if n > support_cap:
            k = -(-n // support_cap)
            groups = np.arange(n) // k
            wsum = np.bincount(groups, weights=weights)
            centroid = np.stack(
                [np.bincount(groups, weights=weights * points[:, i]) / wsum for i in range(3)],
                axis=1,
            )
            points, weights = centroid, wsum
        weights = weights / np.sum(weights)
        return DiscreteMeasure(points=points, weights=weights, raw_mass=raw_mass)

    return finish(u_cells, "inner"), finish(v_cells, "outer")


def shells_at(profile: BilayerProfile, u, v) -> ShellArrays:
    """Outer-shell solve at arbitrary chart parameters (vectorized)."""

    _, _, k1, k2, _ = frame_arrays(profile.surface, np.asarray(u, float), np.asarray(v, float))
    return _solve_outer_arrays(profile.eps, profile.ell_plus, k1, k2)
