"""Command-line driver for the band-energy laboratory.

Subcommands map one-to-one onto the library: ``energy`` evaluates full
reports, ``converge`` runs an eps sweep with Richardson extrapolation,
``lowerbound`` audits the general lower estimate against the construction,
``emd`` cross-checks the per-ray transport cost against a voxelized
discrete solver, ``weakstar`` measures the band-averaging error,
``ray-check`` samples the single-ray gap inequality, and ``surfaces``
prints geometry diagnostics.

Every command refuses a band scale whose 2.5*eps tubular neighbourhood
leaves the admissible offset range of the surface; the library itself only
requires exact admissibility, so this gate is deliberately conservative.
"""

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import fit_decay_exponent, richardson_limit
from .construction import build_construction, transport_potential, voxelize
from .energies import (
    EnergyReport,
    d1_construction_cost,
    energy,
    jump_area,
    limit_energy,
    lower_bound_rhs,
    weakstar_error,
)
from .errors import (
    BilayerError,
    DescriptorError,
    LowerBoundViolation,
    ReachError,
    SandwichViolation,
)
from .rays import RayModel, mass_range, ray_gap_lower_bound
from .surfaces import (
    build_grid,
    normalize_to_unit_mass,
    parse_surface,
    reach_check,
    surface_integral,
)
from .transport import dual_certificate, emd

_GATE_FACTOR = 2.5
_LOWER_SLACK = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated bundle of the flags shared by the experiment commands."""

    surface: str
    eps_values: tuple
    grid: tuple | None = None
    voxel_h: float | None = None
    support_cap: int = 4000
    out: str | None = None
    format: str = "json"

    @classmethod
    def from_args(cls, args) -> "ExperimentConfig":
        return cls(
            surface=args.surface,
            eps_values=_parse_eps(args.eps),
            grid=_parse_grid(args.grid) if getattr(args, "grid", None) else None,
            voxel_h=getattr(args, "voxel_h", None),
            support_cap=getattr(args, "cap", 4000),
            out=getattr(args, "out", None),
            format=getattr(args, "format", "json"),
        )


@dataclass
class ConvergenceRecord:
    """Per-scale outcome of a sweep; ``status`` is "ok" or an error marker."""

    eps: float
    g_eps: float | None = None
    status: str = "ok"

    def to_dict(self) -> dict:
        return {"eps": self.eps, "g_eps": self.g_eps, "status": self.status}


def _parse_eps(text: str) -> tuple:
    if not text:
        raise DescriptorError("--eps must list at least one band scale")
    try:
        values = tuple(float(part) for part in text.split(","))
    except ValueError:
        raise DescriptorError(f"could not parse --eps {text!r}") from None
    if not all(np.isfinite(v) and v > 0.0 for v in values):
        raise DescriptorError(f"band scales must be positive and finite, got {values}")
    if any(a <= b for a, b in zip(values, values[1:])):
        raise DescriptorError(f"band scales must be strictly decreasing, got {values}")
    return values


def _parse_grid(text: str) -> tuple:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise DescriptorError(f"--grid must look like 64x128, got {text!r}")
    try:
        nu, nv = int(parts[0]), int(parts[1])
    except ValueError:
        raise DescriptorError(f"--grid must look like 64x128, got {text!r}") from None
    return nu, nv


def _setup(cfg: ExperimentConfig):
    surface = normalize_to_unit_mass(parse_surface(cfg.surface))
    if cfg.grid is not None:
        grid = build_grid(surface, cfg.grid[0], cfg.grid[1])
    else:
        grid = build_grid(surface)
    return surface, grid


def _gate(surface, eps: float, grid) -> None:
    report = reach_check(surface, _GATE_FACTOR * eps, grid)
    if not report.passed:
        raise ReachError(
            f"eps={eps:g} refused: a tubular neighbourhood of halfwidth "
            f"{_GATE_FACTOR * eps:g} exceeds the surface reach {report.reach:.6g} "
            f"(worst node {report.worst_index})"
        )


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n")
        print(f"wrote {out}")
    else:
        print(text)


def _write_reports(reports, cfg: ExperimentConfig) -> None:
    as_json = json.dumps([r.to_dict() for r in reports], indent=2)
    as_csv = "\n".join([EnergyReport.csv_header()] + [r.csv_row() for r in reports])
    if cfg.out:
        base = Path(cfg.out)
        jpath, cpath = base.with_suffix(".json"), base.with_suffix(".csv")
        jpath.write_text(as_json + "\n")
        cpath.write_text(as_csv + "\n")
        print(f"wrote {jpath} and {cpath}")
    else:
        print(as_json if cfg.format == "json" else as_csv)


# ---------------------------------------------------------------------------
# subcommands


def cmd_energy(args) -> int:
    cfg = ExperimentConfig.from_args(args)
    surface, grid = _setup(cfg)
    reports = []
    for eps in cfg.eps_values:
        _gate(surface, eps, grid)
        pair = build_construction(surface, eps, grid)
        reports.append(energy(pair))
    _write_reports(reports, cfg)
    return 0


def cmd_converge(args) -> int:
    cfg = ExperimentConfig.from_args(args)
    surface, grid = _setup(cfg)
    records, reports = [], []
    first_code = 0
    for eps in cfg.eps_values:
        try:
            _gate(surface, eps, grid)
            pair = build_construction(surface, eps, grid)
            rep = energy(pair)
            records.append(ConvergenceRecord(eps=eps, g_eps=rep.g_eps))
            reports.append(rep)
        except BilayerError as exc:
            records.append(
                ConvergenceRecord(eps=eps, status=f"{type(exc).__name__}: {exc}")
            )
            if first_code == 0:
                first_code = exc.exit_code
    for rec in records:
        if rec.status == "ok":
            print(f"eps={rec.eps:<10g} g_eps={rec.g_eps:.12g}")
        else:
            print(f"eps={rec.eps:<10g} FAILED {rec.status}")
    ok = [rec for rec in records if rec.status == "ok"]
    summary = {
        "surface": surface.descriptor,
        "grid": grid.spec,
        "records": [rec.to_dict() for rec in records],
    }
    if len(ok) >= 3:
        extrapolated = richardson_limit(
            [rec.eps for rec in ok], [rec.g_eps for rec in ok]
        )
        target = limit_energy(surface, grid)
        degenerate = abs(target) < 1e-12
        deviation = (
            abs(extrapolated - target)
            if degenerate
            else abs(extrapolated - target) / abs(target)
        )
        summary.update(
            extrapolated=extrapolated,
            limit=target,
            deviation=deviation,
            degenerate=degenerate,
        )
        kind = "abs" if degenerate else "rel"
        print(
            f"extrapolated={extrapolated:.12g} limit={target:.12g} "
            f"{kind}_deviation={deviation:.3e}"
        )
    else:
        print(f"extrapolation skipped: only {len(ok)} scales succeeded, need 3")
        if first_code == 0:
            first_code = 2
    if cfg.out:
        base = Path(cfg.out)
        base.with_suffix(".json").write_text(json.dumps(summary, indent=2) + "\n")
        if reports:
            base.with_suffix(".csv").write_text(
                "\n".join([EnergyReport.csv_header()] + [r.csv_row() for r in reports])
                + "\n"
            )
        print(f"wrote {base.with_suffix('.json')}")
    return first_code


def cmd_lowerbound(args) -> int:
    cfg = ExperimentConfig.from_args(args)
    surface, grid = _setup(cfg)
    rows = []
    for eps in cfg.eps_values:
        _gate(surface, eps, grid)
        pair = build_construction(surface, eps, grid)
        area = jump_area(pair)
        d1 = d1_construction_cost(pair)
        g_eps = (area + d1 / eps - 2.0) / eps**2
        lower = lower_bound_rhs(pair)
        margin = g_eps + _LOWER_SLACK - lower
        rows.append(
            {"eps": eps, "g_eps": g_eps, "lower_rhs": lower, "margin": margin}
        )
        print(
            f"eps={eps:<10g} g_eps={g_eps:.12g} lower_rhs={lower:.12g} "
            f"margin={margin:.3e}"
        )
        if lower > g_eps + _LOWER_SLACK:
            raise LowerBoundViolation(
                f"lower estimate {lower:.12g} exceeds g_eps {g_eps:.12g} "
                f"at eps={eps:g}"
            )
    if cfg.out:
        _emit(json.dumps(rows, indent=2), cfg.out)
    return 0


def cmd_emd(args) -> int:
    cfg = ExperimentConfig.from_args(args)
    surface, grid = _setup(cfg)
    results = []
    for eps in cfg.eps_values:
        _gate(surface, eps, grid)
        pair = build_construction(surface, eps, grid)
        d1 = d1_construction_cost(pair)
        spacing = cfg.voxel_h if cfg.voxel_h else eps / 4.0
        mu, nu = voxelize(pair, spacing, cfg.support_cap)
        t0 = time.perf_counter()
        plan = emd(mu, nu, cfg.support_cap)
        solve_s = time.perf_counter() - t0
        bound = dual_certificate(mu, nu, transport_potential(pair))
        result = {
            "eps": eps,
            "voxel_h": spacing,
            "support_u": mu.size,
            "support_v": nu.size,
            "raw_mass_u": mu.raw_mass,
            "raw_mass_v": nu.raw_mass,
            "emd": plan.cost,
            "dual_bound": bound.bound,
            "dual_eta": bound.eta,
            "d1_quad": d1,
            "emd_over_d1": plan.cost / d1 if d1 else None,
            "dual_over_emd": bound.bound / plan.cost if plan.cost else None,
            "solve_s": solve_s,
        }
        results.append(result)
        print(
            f"eps={eps:<10g} emd={plan.cost:.10g} dual={bound.bound:.10g} "
            f"(eta={bound.eta:.2e}) d1_quad={d1:.10g} "
            f"emd/d1={result['emd_over_d1']:.4f} solve_s={solve_s:.1f}"
        )
        slack = 1e-12 * (1.0 + abs(plan.cost))
        if bound.bound > plan.cost + slack:
            raise SandwichViolation(
                f"dual bound {bound.bound:.12g} exceeds emd {plan.cost:.12g}"
            )
        if plan.cost > 1.10 * d1 + slack:
            raise SandwichViolation(
                f"emd {plan.cost:.12g} exceeds 1.10 * d1_quad = {1.10 * d1:.12g}"
            )
        if bound.bound < 0.8 * plan.cost - slack:
            raise SandwichViolation(
                f"dual bound {bound.bound:.12g} below 0.8 * emd = {0.8 * plan.cost:.12g}"
            )
    if cfg.out:
        base = Path(cfg.out)
        base.with_suffix(".json").write_text(json.dumps(results, indent=2) + "\n")
        mu.to_csv(base.parent / (base.stem + "_u.csv"))
        nu.to_csv(base.parent / (base.stem + "_v.csv"))
        print(f"wrote {base.with_suffix('.json')} and the two measure CSVs")
    return 0


_TEST_FUNCTIONS = (
    ("const", lambda p: np.ones(p.shape[:-1])),
    ("coord3", lambda p: p[..., 2]),
    ("coord3sq", lambda p: p[..., 2] ** 2),
)


def cmd_weakstar(args) -> int:
    cfg = ExperimentConfig.from_args(args)
    surface, grid = _setup(cfg)
    pairs = []
    for eps in cfg.eps_values:
        _gate(surface, eps, grid)
        pairs.append((eps, build_construction(surface, eps, grid)))
    results = []
    for name, func in _TEST_FUNCTIONS:
        target = 2.0 * surface_integral(surface, func(grid.points), grid)
        errors = [weakstar_error(pair, func) for _, pair in pairs]
        fit = fit_decay_exponent([eps for eps, _ in pairs], errors)
        results.append(
            {
                "function": name,
                "target": target,
                "eps": [eps for eps, _ in pairs],
                "errors": errors,
                "exponent": None if fit.degenerate else fit.exponent,
                "degenerate": fit.degenerate,
            }
        )
        shown = "floor" if fit.degenerate else f"{fit.exponent:.3f}"
        worst = max(errors)
        print(
            f"{name:<9} target={target:.12g} max_err={worst:.3e} exponent={shown}"
        )
    if cfg.out:
        _emit(json.dumps(results, indent=2), cfg.out)
    return 0


def cmd_ray_check(args) -> int:
    eps_values = _parse_eps(args.eps)
    if len(eps_values) != 1:
        raise DescriptorError("ray-check takes exactly one --eps value")
    eps = eps_values[0]
    try:
        k1, k2 = (float(p) for p in args.curvatures.split(","))
    except ValueError:
        raise DescriptorError(
            f"--curvatures must be two comma-separated numbers, got {args.curvatures!r}"
        ) from None
    ray = RayModel(eps=eps, cos_tilt=args.cos_tilt, kappa1=k1, kappa2=k2)
    m_lo, m_hi = mass_range(ray)
    cap = min(m_hi, -m_lo, 5.0)
    if not (cap > 0.0):
        raise ReachError("ray admits no symmetric mass window")
    samples = args.samples
    masses = 0.98 * cap * (np.arange(1, samples + 1) / samples)
    gap, bound = ray_gap_lower_bound(ray, masses)
    slack = gap - bound
    lines = ["m,gap,bound,slack"]
    lines += [
        f"{float(m)!r},{float(g)!r},{float(b)!r},{float(s)!r}"
        for m, g, b, s in zip(masses, gap, bound, slack)
    ]
    _emit("\n".join(lines), args.out)
    worst = float(np.min(slack))
    if worst < -1e-12:
        raise LowerBoundViolation(
            f"gap bound violated by {-worst:.3g} (eps={eps:g}, curvatures {k1:g},{k2:g})"
        )
    return 0


_SHOWCASE = ("sphere:1", "ellipsoid:1,1,1.4", "torus:2,1", "flat:1")


def cmd_surfaces(args) -> int:
    descriptors = [args.surface] if args.surface else list(_SHOWCASE)
    eps_values = _parse_eps(args.eps) if args.eps else ()
    entries = []
    for desc in descriptors:
        surface = normalize_to_unit_mass(parse_surface(desc))
        if getattr(args, "grid", None):
            nu, nv = _parse_grid(args.grid)
            grid = build_grid(surface, nu, nv)
        else:
            grid = build_grid(surface)
        reach = reach_check(surface, 0.0, grid)
        entry = {
            "descriptor": desc,
            "normalized": surface.descriptor,
            "scale": surface.scale,
            "grid": grid.spec,
            "area": grid.area,
            "int_gauss": surface_integral(surface, grid.gauss_curv, grid),
            "int_mean_sq": surface_integral(surface, grid.mean_curv**2, grid),
            "limit": limit_energy(surface, grid),
            "reach": reach.reach,
        }
        checks = []
        for eps in eps_values:
            try:
                _gate(surface, eps, grid)
                build_construction(surface, eps, grid)
                checks.append({"eps": eps, "status": "ok"})
            except BilayerError as exc:
                checks.append(
                    {"eps": eps, "status": f"{type(exc).__name__}: {exc}"}
                )
        if checks:
            entry["scales"] = checks
        entries.append(entry)
    _emit(json.dumps(entries, indent=2), args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bilayerlab",
        description="numerical laboratory for bilayer band energies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, eps_required=True):
        sp.add_argument(
            "--surface",
            required=True,
            help="surface descriptor, e.g. sphere:1 or torus:2,1",
        )
        sp.add_argument(
            "--eps",
            required=eps_required,
            help="comma-separated band scales, strictly decreasing",
        )
        sp.add_argument("--grid", default=None, help="quadrature size, e.g. 64x128")
        sp.add_argument("--out", default=None, help="output path (or base path)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    sp = sub.add_parser("energy", help="full energy reports at each scale")
    add_common(sp)
    sp.set_defaults(func=cmd_energy)

    sp = sub.add_parser("converge", help="eps sweep with Richardson extrapolation")
    add_common(sp)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("lowerbound", help="audit the lower estimate")
    add_common(sp)
    sp.set_defaults(func=cmd_lowerbound)

    sp = sub.add_parser("emd", help="discrete transport cross-check")
    add_common(sp)
    sp.add_argument("--voxel-h", type=float, default=None, dest="voxel_h")
    sp.add_argument("--cap", type=int, default=4000)
    sp.set_defaults(func=cmd_emd)

    sp = sub.add_parser("weakstar", help="band-averaging error of test functions")
    add_common(sp)
    sp.set_defaults(func=cmd_weakstar)

    sp = sub.add_parser("ray-check", help="single-ray gap inequality samples")
    sp.add_argument("--eps", required=True)
    sp.add_argument("--curvatures", default="0,0")
    sp.add_argument("--cos-tilt", type=float, default=1.0, dest="cos_tilt")
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_ray_check)

    sp = sub.add_parser("surfaces", help="geometry diagnostics")
    sp.add_argument("--surface", default=None)
    sp.add_argument("--eps", default=None)
    sp.add_argument("--grid", default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_surfaces)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BilayerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
