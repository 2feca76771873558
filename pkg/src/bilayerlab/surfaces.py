"""Parametric surfaces, curvature frames, and quadrature grids.

Each supported surface is covered by a single global chart whose embedding
has closed-form first and second derivatives.  Quadrature nodes always stay
strictly inside the chart rectangle, so frames are only evaluated where the
chart is regular.

Curvature convention: ``kappa1 <= kappa2`` are the eigenvalues of the
derivative of the chosen unit normal field, so the outward-oriented sphere
of radius R has both equal to +1/R.  ``mean_curv`` denotes their sum (the
unnormalized mean curvature) and ``gauss_curv`` their product.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import BilayerError, DescriptorError, ReachError

Embedding = Callable[[np.ndarray, np.ndarray], tuple]

DEFAULT_GRIDS = {
    "sphere": (64, 128),
    "ellipsoid": (64, 128),
    "torus": (128, 128),
    "flat": (32, 32),
}


def _stack3(x, y, z) -> np.ndarray:
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1).astype(float)


@dataclass(frozen=True)
class Chart:
    """Parameter rectangle plus an embedding with derivative evaluators.

    ``embed(u, v)`` returns the tuple ``(r, r_u, r_v, r_uu, r_uv, r_vv)``
    of position and partial-derivative arrays, each of shape ``(..., 3)``.
    """

    u_range: tuple[float, float]
    v_range: tuple[float, float]
    periodic_u: bool
    periodic_v: bool
    embed: Embedding = field(repr=False)


@dataclass(frozen=True)
class ParametricSurface:
    """A closed surface given by one analytic chart.

    ``orientation`` flips the raw chart normal (r_u x r_v)/|.| so that the
    conventional choice (outward normal on closed surfaces) is in force.
    ``scale`` records the homothety applied by mass normalization relative
    to the descriptor the surface was originally built from.
    """

    kind: str
    params: tuple[float, ...]
    chart: Chart = field(repr=False)
    orientation: float
    default_grid: tuple[int, int]
    scale: float = 1.0

    @property
    def descriptor(self) -> str:
        return self.kind + ":" + ",".join(repr(p) for p in self.params)

    @property
    def charts(self) -> tuple[Chart, ...]:
        return (self.chart,)

    def grid(self, nu: int | None = None, nv: int | None = None) -> "QuadratureGrid":
        return build_grid(self, nu, nv)

    def flipped(self) -> "ParametricSurface":
        return replace(self, orientation=-self.orientation)


@dataclass(frozen=True)
class SurfaceSample:
    """Evaluated frame at one parameter point.

    ``weight`` is the quadrature weight when the sample comes from a grid
    node and 0.0 for free evaluations.
    """

    u: float
    v: float
    position: np.ndarray
    normal: np.ndarray
    kappa1: float
    kappa2: float
    mean_curv: float
    gauss_curv: float
    weight: float = 0.0


@dataclass(frozen=True)
class ReachReport:
    passed: bool
    tmax: float
    margin: float
    reach: float
    worst_index: int
    worst_params: tuple[float, float]
    worst_position: np.ndarray
    critical_offset: float

    def __str__(self) -> str:
        state = "pass" if self.passed else "FAIL"
        return (
            f"reach {state}: tmax={self.tmax:g}, reach={self.reach:g}, "
            f"margin={self.margin:g}, worst node {self.worst_index} at "
            f"params {self.worst_params} (critical offset {self.critical_offset:g})"
        )


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensor-product quadrature nodes with precomputed frames.

    Node ordering is row-major in (i_u, i_v); all reductions over nodes run
    in this fixed order so results are reproducible bit for bit.
    """

    surface: ParametricSurface
    nu: int
    nv: int
    u: np.ndarray
    v: np.ndarray
    params_u: np.ndarray
    params_v: np.ndarray
    points: np.ndarray
    normal: np.ndarray
    weight: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    mean_curv: np.ndarray
    gauss_curv: np.ndarray
    area: float
    spec: str

    @property
    def n_nodes(self) -> int:
        return self.points.shape[0]

    def node(self, i: int) -> SurfaceSample:
        return SurfaceSample(
            u=float(self.params_u[i]),
            v=float(self.params_v[i]),
            position=self.points[i],
            normal=self.normal[i],
            kappa1=float(self.kappa1[i]),
            kappa2=float(self.kappa2[i]),
            mean_curv=float(self.mean_curv[i]),
            gauss_curv=float(self.gauss_curv[i]),
            weight=float(self.weight[i]),
        )

    def nodes(self) -> Iterator[SurfaceSample]:
        return (self.node(i) for i in range(self.n_nodes))

    def integrate(self, values: np.ndarray) -> float:
        values = np.asarray(values, dtype=float)
        if values.shape != self.weight.shape:
            raise BilayerError(
                f"integrand has shape {values.shape}, expected {self.weight.shape}"
            )
        return float(np.sum(self.weight * values))


# ---------------------------------------------------------------------------
# chart factories


def _ellipsoid_chart(a: float, b: float, c: float) -> Chart:
    def embed(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        s = np.sqrt(1.0 - u * u)
        ws = u / s
        cv, sv = np.cos(v), np.sin(v)
        r = _stack3(a * s * cv, b * s * sv, c * u)
        ru = _stack3(-a * ws * cv, -b * ws * sv, np.full_like(u, c))
        rv = _stack3(-a * s * sv, b * s * cv, 0.0 * u)
        ruu = _stack3(-a * cv / s**3, -b * sv / s**3, 0.0 * u)
        ruv = _stack3(a * ws * sv, -b * ws * cv, 0.0 * u)
        rvv = _stack3(-a * s * cv, -b * s * sv, 0.0 * u)
        return r, ru, rv, ruu, ruv, rvv

    # u is the cosine of the colatitude: the area element of the round
    # sphere is constant in (u, v) and the poles are excluded endpoints
    return Chart((-1.0, 1.0), (0.0, 2.0 * np.pi), False, True, embed)


def _torus_chart(ring: float, tube: float) -> Chart:
    def embed(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        cu, su = np.cos(u), np.sin(u)
        cv, sv = np.cos(v), np.sin(v)
        rho = ring + tube * cu
        r = _stack3(rho * cv, rho * sv, tube * su)
        ru = _stack3(-tube * su * cv, -tube * su * sv, tube * cu)
        rv = _stack3(-rho * sv, rho * cv, 0.0 * u)
        ruu = _stack3(-tube * cu * cv, -tube * cu * sv, -tube * su)
        ruv = _stack3(tube * su * sv, -tube * su * cv, 0.0 * u)
        rvv = _stack3(-rho * cv, -rho * sv, 0.0 * u)
        return r, ru, rv, ruu, ruv, rvv

    two_pi = 2.0 * np.pi
    return Chart((0.0, two_pi), (0.0, two_pi), True, True, embed)


def _flat_chart(side: float) -> Chart:
    def embed(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        zero = 0.0 * (u + v)
        r = _stack3(u + 0.0 * v, v + 0.0 * u, zero)
        ru = _stack3(1.0 + zero, zero, zero)
        rv = _stack3(zero, 1.0 + zero, zero)
        ruu = _stack3(zero, zero, zero)
        return r, ru, rv, ruu, ruu, ruu

    # both axes identified: a validation fixture with exactly zero curvature
    return Chart((0.0, side), (0.0, side), True, True, embed)


def make_surface(kind: str, params: Sequence[float], scale: float = 1.0) -> ParametricSurface:
    params = tuple(float(p) for p in params)
    if any(not np.isfinite(p) or p <= 0.0 for p in params):
        raise DescriptorError(f"surface parameters must be positive, got {params}")
    if kind == "sphere":
        if len(params) != 1:
            raise DescriptorError("sphere takes one parameter: sphere:<R>")
        (radius,) = params
        chart = _ellipsoid_chart(radius, radius, radius)
        orientation = -1.0
    elif kind == "ellipsoid":
        if len(params) != 3:
            raise DescriptorError("ellipsoid takes three parameters: ellipsoid:<a>,<b>,<c>")
        chart = _ellipsoid_chart(*params)
        orientation = -1.0
    elif kind == "torus":
        if len(params) != 2:
            raise DescriptorError("torus takes two parameters: torus:<R>,<r>")
        ring, tube = params
        if tube >= ring:
            raise DescriptorError(f"torus needs tube radius < ring radius, got {params}")
        chart = _torus_chart(ring, tube)
        orientation = -1.0
    elif kind == "flat":
        if len(params) != 1:
            raise DescriptorError("flat takes one parameter: flat:<side>")
        chart = _flat_chart(params[0])
        orientation = 1.0
    else:
        raise DescriptorError(f"unknown surface kind {kind!r}")
    return ParametricSurface(
        kind=kind,
        params=params,
        chart=chart,
        orientation=orientation,
        default_grid=DEFAULT_GRIDS[kind],
        scale=scale,
    )


def parse_surface(descriptor: str) -> ParametricSurface:
    """Parse descriptors like "sphere:1", "torus:2,1", "ellipsoid:1,1,2",
    "flat:0.5"."""

    kind, sep, rest = descriptor.partition(":")
    kind = kind.strip().lower()
    if not sep or not rest.strip():
        raise DescriptorError(
            f"malformed surface descriptor {descriptor!r}; expected kind:<params>"
        )
    try:
        params = [float(tok) for tok in rest.split(",")]
    except ValueError as exc:
        raise DescriptorError(f"malformed surface descriptor {descriptor!r}: {exc}") from None
    return make_surface(kind, params)


# ---------------------------------------------------------------------------
# frames


def frame_arrays(surface: ParametricSurface, u, v):
    """Vectorized frame evaluation at free parameter points.

    Returns (position, normal, kappa1, kappa2, jacobian) with the jacobian
    |r_u x r_v| of the chart's area element.
    """

    r, ru, rv, ruu, ruv, rvv = surface.chart.embed(u, v)
    cross = np.cross(ru, rv)
    jac = np.sqrt(np.einsum("...i,...i->...", cross, cross))
    ee = np.einsum("...i,...i->...", ru, ru)
    ff = np.einsum("...i,...i->...", ru, rv)
    gg = np.einsum("...i,...i->...", rv, rv)
    det1 = ee * gg - ff * ff
    if np.any(det1 <= 1e-12 * np.maximum(ee * gg, np.finfo(float).tiny)):
        bad = np.argmin(det1)
        raise BilayerError(
            f"degenerate metric on chart of {surface.descriptor} near params "
            f"(u={np.ravel(u)[bad] if np.ndim(u) else u}, "
            f"v={np.ravel(v)[bad] if np.ndim(v) else v})"
        )
    normal = surface.orientation * cross / jac[..., None]
    l2 = np.einsum("...i,...i->...", ruu, normal)
    m2 = np.einsum("...i,...i->...", ruv, normal)
    n2 = np.einsum("...i,...i->...", rvv, normal)
    # shape operator = -(first form)^-1 (second form); splitting its
    # eigenvalues through the entry-wise discriminant stays accurate at
    # umbilic points, where trace^2 - 4 det cancels to sqrt(eps) noise
    inv = 1.0 / det1
    s11 = -(gg * l2 - ff * m2) * inv
    s12 = -(gg * m2 - ff * n2) * inv
    s21 = -(ee * m2 - ff * l2) * inv
    s22 = -(ee * n2 - ff * m2) * inv
    mean = s11 + s22
    gauss = (l2 * n2 - m2 * m2) * inv
    disc = np.sqrt(np.maximum((s11 - s22) ** 2 + 4.0 * s12 * s21, 0.0))
    kappa1 = 0.5 * (mean - disc)
    kappa2 = 0.5 * (mean + disc)
    return r, normal, kappa1, kappa2, jac


def evaluate_frame(surface: ParametricSurface, params: Sequence[float]) -> SurfaceSample:
    """Frame at one parameter pair; the quadrature weight is zero."""

    u, v = float(params[0]), float(params[1])
    lo_u, hi_u = surface.chart.u_range
    lo_v, hi_v = surface.chart.v_range
    if surface.chart.periodic_u:
        u = lo_u + (u - lo_u) % (hi_u - lo_u)
    elif not lo_u < u < hi_u:
        raise DescriptorError(f"parameter u={u} outside chart range ({lo_u}, {hi_u})")
    if surface.chart.periodic_v:
        v = lo_v + (v - lo_v) % (hi_v - lo_v)
    elif not lo_v < v < hi_v:
        raise DescriptorError(f"parameter v={v} outside chart range ({lo_v}, {hi_v})")
    pos, nrm, k1, k2, _ = frame_arrays(surface, u, v)
    k1 = float(k1)
    k2 = float(k2)
    return SurfaceSample(
        u=u,
        v=v,
        position=pos.reshape(3),
        normal=nrm.reshape(3),
        kappa1=k1,
        kappa2=k2,
        mean_curv=k1 + k2,
        gauss_curv=k1 * k2,
        weight=0.0,
    )


# ---------------------------------------------------------------------------
# quadrature


def _line_rule(lo: float, hi: float, n: int, periodic: bool):
    if n < 2:
        raise DescriptorError(f"need at least 2 quadrature nodes per axis, got {n}")
    if periodic:
        # uniform rule: spectrally accurate for smooth periodic integrands
        step = (hi - lo) / n
        return lo + step * np.arange(n), np.full(n, step)
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return mid + half * x, half * w


def build_grid(
    surface: ParametricSurface, nu: int | None = None, nv: int | None = None
) -> QuadratureGrid:
    chart = surface.chart
    nu = surface.default_grid[0] if nu is None else int(nu)
    nv = surface.default_grid[1] if nv is None else int(nv)
    u, wu = _line_rule(*chart.u_range, nu, chart.periodic_u)
    v, wv = _line_rule(*chart.v_range, nv, chart.periodic_v)
    uu = np.repeat(u, nv)
    vv = np.tile(v, nu)
    ww = np.repeat(wu, nv) * np.tile(wv, nu)
    points, normal, kappa1, kappa2, jac = frame_arrays(surface, uu, vv)
    weight = ww * jac
    rule_u = "trap" if chart.periodic_u else "gl"
    rule_v = "trap" if chart.periodic_v else "gl"
    return QuadratureGrid(
        surface=surface,
        nu=nu,
        nv=nv,
        u=u,
        v=v,
        params_u=uu,
        params_v=vv,
        points=points,
        normal=normal,
        weight=weight,
        kappa1=kappa1,
        kappa2=kappa2,
        mean_curv=kappa1 + kappa2,
        gauss_curv=kappa1 * kappa2,
        area=float(np.sum(weight)),
        spec=f"{rule_u}{nu}x{rule_v}{nv}",
    )


def surface_integral(surface: ParametricSurface, integrand, grid: QuadratureGrid) -> float:
    """Weighted node sum of ``integrand`` (an (n_nodes,) array, or a callable
    taking the grid and returning one)."""

    if grid.surface is not surface and grid.surface.descriptor != surface.descriptor:
        raise BilayerError("grid was built for a different surface")
    values = integrand(grid) if callable(integrand) else integrand
    return grid.integrate(np.asarray(values, dtype=float))


def parallel_area(surface: ParametricSurface, offset, grid: QuadratureGrid) -> float:
    """Area of the offset surface p + t nu(p): integral of 1 + tH + t^2 K.

    ``offset`` may be a constant or a per-node array; every node must keep
    1 + t*kappa positive for both principal curvatures.
    """

    t = np.broadcast_to(np.asarray(offset, dtype=float), grid.weight.shape)
    f1 = 1.0 + t * grid.kappa1
    f2 = 1.0 + t * grid.kappa2
    if np.any(f1 <= 0.0) or np.any(f2 <= 0.0):
        bad = int(np.argmin(np.minimum(f1, f2)))
        raise ReachError(
            f"offset {t[bad]:g} violates reach at node {bad} of "
            f"{surface.descriptor} (curvatures {grid.kappa1[bad]:g}, {grid.kappa2[bad]:g})"
        )
    return surface_integral(
        surface, 1.0 + t * grid.mean_curv + t * t * grid.gauss_curv, grid
    )


def reach_check(surface: ParametricSurface, tmax: float, grid: QuadratureGrid) -> ReachReport:
    """Check that offsets up to |t| <= tmax keep 1 + t*kappa positive.

    This is the first-order (curvature) criterion along each normal ray;
    global self-intersections of the offset are not detected.  For the
    surfaces in this package the criterion coincides with the inner reach.
    """

    if tmax < 0.0:
        raise BilayerError("tmax must be nonnegative")
    with np.errstate(divide="ignore"):
        pos_limit = np.where(grid.kappa1 < 0.0, -1.0 / grid.kappa1, np.inf)
        neg_limit = np.where(grid.kappa2 > 0.0, 1.0 / grid.kappa2, np.inf)
    node_reach = np.minimum(pos_limit, neg_limit)
    worst = int(np.argmin(node_reach))
    reach = float(node_reach[worst])
    critical = float(pos_limit[worst]) if pos_limit[worst] <= neg_limit[worst] else -float(
        neg_limit[worst]
    )
    margin = reach - tmax
    return ReachReport(
        passed=bool(margin > 0.0),
        tmax=float(tmax),
        margin=float(margin),
        reach=reach,
        worst_index=worst,
        worst_params=(float(grid.params_u[worst]), float(grid.params_v[worst])),
        worst_position=grid.points[worst],
        critical_offset=critical,
    )


def normalize_to_unit_mass(surface: ParametricSurface) -> ParametricSurface:
    """Rescale about the origin so the grid-computed area is 1/2.

    The bilayer construction distributes total mass 1 over two monolayers,
    which pins the area to 1/2.  The scale factor is recorded on the
    returned surface; curvature integrals like the Gauss integral and the
    dimensionless bending energies are unchanged by the scaling.
    """

    grid = build_grid(surface)
    area = grid.area
    if not np.isfinite(area) or area <= 0.0:
        raise BilayerError(f"surface {surface.descriptor} has invalid area {area}")
    if abs(area - 0.5) <= 1e-13 * 0.5:
        return surface
    s = float(np.sqrt(0.5 / area))
    return make_surface(surface.kind, tuple(p * s for p in surface.params), scale=surface.scale * s)
