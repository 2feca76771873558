"""Convergence post-processing: extrapolation and decay-rate fits."""

from dataclasses import dataclass

import numpy as np

from .errors import BilayerError


@dataclass(frozen=True)
class DecayFit:
    """Least-squares slope of log(error) against log(eps).

    ``degenerate`` flags the case where the errors sit at the noise floor
    (fewer than two usable points), in which case the exponent is +inf by
    convention: the quantity converged faster than the floor can resolve.
    """

    exponent: float
    residual: float
    degenerate: bool


def richardson_limit(eps_values, values) -> float:
    """Eliminate the quadratic error term using the two smallest scales.

    Assumes value(eps) = v0 + C*eps^2 + o(eps^2); returns the v0 estimate.
    """

    e = np.asarray(eps_values, dtype=float)
    v = np.asarray(values, dtype=float)
    if e.shape != v.shape or e.ndim != 1 or e.size < 2:
        raise BilayerError("need matching 1-d arrays with at least two scales")
    order = np.argsort(e)
    e1, e2 = e[order[0]], e[order[1]]
    v1, v2 = v[order[0]], v[order[1]]
    if not (0.0 < e1 < e2):
        raise BilayerError(f"scales must be positive and distinct, got {e1}, {e2}")
    w = e2**2 - e1**2
    return float((v1 * e2**2 - v2 * e1**2) / w)


def fit_decay_exponent(eps_values, errors, floor: float = 1e-13) -> DecayFit:
    e = np.asarray(eps_values, dtype=float)
    err = np.asarray(errors, dtype=float)
    if e.shape != err.shape or e.ndim != 1:
        raise BilayerError("need matching 1-d arrays")
    keep = err > floor
    if np.count_nonzero(keep) < 2:
        return DecayFit(exponent=np.inf, residual=0.0, degenerate=True)
    x = np.log(e[keep])
    y = np.log(err[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return DecayFit(exponent=float(slope), residual=resid, degenerate=False)
