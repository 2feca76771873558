"""Discrete optimal transport between weighted point clouds.

This is the independent check on the per-ray transport cost: an exact
min-cost-flow solver on the complete bipartite graph (successive shortest
paths with potentials), a Kantorovich dual certificate for externally
supplied potentials, and the closed-form one-dimensional solution.

Every ``emd`` solve is audited against LP duality before it is returned,
so a successful call is its own optimality certificate.
"""

import csv
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.spatial.distance import cdist

from .errors import BilayerError, RootSolveError

_MASS_RTOL = 1e-9


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud; ``raw_mass`` records the pre-rescale total of
    a voxelized band, when there was one."""

    points: np.ndarray
    weights: np.ndarray
    raw_mass: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise BilayerError(f"points must be (N, d), got shape {pts.shape}")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise BilayerError(
                f"weights shape {w.shape} does not match {pts.shape[0]} points"
            )
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise BilayerError("points and weights must be finite")
        if np.any(w < 0.0):
            raise BilayerError("weights must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def normalized(self) -> "DiscreteMeasure":
        total = self.total_mass
        if total <= 0.0:
            raise BilayerError("cannot normalize a measure with zero mass")
        return DiscreteMeasure(self.points, self.weights / total, raw_mass=self.raw_mass)

    def to_csv(self, path) -> None:
        if self.points.shape[1] != 3:
            raise BilayerError("CSV export is defined for 3-d supports")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "z", "weight"])
            for p, w in zip(self.points, self.weights):
                writer.writerow(
                    [repr(float(p[0])), repr(float(p[1])), repr(float(p[2])), repr(float(w))]
                )

    @classmethod
    def from_csv(cls, path) -> "DiscreteMeasure":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 4:
            raise BilayerError(f"expected 4 CSV columns (x,y,z,weight), got {data.shape[1]}")
        return cls(points=data[:, :3], weights=data[:, 3])


@dataclass(frozen=True)
class TransportPlan:
    """Sparse optimal coupling plus its cost (row-major entry order)."""

    source_index: np.ndarray
    target_index: np.ndarray
    mass: np.ndarray
    cost: float

    def marginal_error(self, supply: np.ndarray, demand: np.ndarray) -> float:
        row = np.bincount(self.source_index, weights=self.mass, minlength=supply.shape[0])
        col = np.bincount(self.target_index, weights=self.mass, minlength=demand.shape[0])
        return float(max(np.max(np.abs(row - supply)), np.max(np.abs(col - demand))))


class DualBound:
    """Certified lower bound extracted from a candidate dual potential."""

    __slots__ = ("bound", "eta")

    def __init__(self, bound: float, eta: float):
        self.bound = bound
        self.eta = eta

    def __iter__(self):
        return iter((self.bound, self.eta))

    def __repr__(self):
        return f"DualBound(bound={self.bound!r}, eta={self.eta!r})"


# ---------------------------------------------------------------------------
# successive-shortest-path kernel


@njit(cache=True)
def _heap_insert(keys, codes, size, key, code):
    i = size
    while i > 0:
        p = (i - 1) >> 1
        if keys[p] > key or (keys[p] == key and codes[p] > code):
            keys[i] = keys[p]
            codes[i] = codes[p]
            i = p
        else:
            break
    keys[i] = key
    codes[i] = code
    return size + 1


@njit(cache=True)
def _heap_remove(keys, codes, size):
    top_key = keys[0]
    top_code = codes[0]
    size -= 1
    key = keys[size]
    code = codes[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        child = left
        right = left + 1
        if right < size and (
            keys[right] < keys[left]
            or (keys[right] == keys[left] and codes[right] < codes[left])
        ):
            child = right
        if keys[child] < key or (keys[child] == key and codes[child] < code):
            keys[i] = keys[child]
            codes[i] = codes[child]
            i = child
        else:
            break
    keys[i] = key
    codes[i] = code
    return top_key, top_code, size


@njit(cache=True)
def _heap_compact(keys, codes, size, dist, done):
    # drop stale entries, then rebuild the heap bottom-up
    k = 0
    for i in range(size):
        c = codes[i]
        if not done[c] and keys[i] <= dist[c]:
            keys[k] = keys[i]
            codes[k] = codes[i]
            k += 1
    for start in range((k - 2) >> 1, -1, -1):
        key = keys[start]
        code = codes[start]
        i = start
        while True:
            left = 2 * i + 1
            if left >= k:
                break
            child = left
            right = left + 1
            if right < k and (
                keys[right] < keys[left]
                or (keys[right] == keys[left] and codes[right] < codes[left])
            ):
                child = right
            if keys[child] < key or (keys[child] == key and codes[child] < code):
                keys[i] = keys[child]
                codes[i] = codes[child]
                i = child
            else:
                break
        keys[i] = key
        codes[i] = code
    return k


@njit(cache=True)
def _ssp_kernel(cost, supply, demand, thresh):
    n, m = cost.shape
    nodes = n + m
    flow = np.zeros((n, m))
    pot = np.zeros(nodes)
    # warm start: sink potentials at their column minima keep reduced costs
    # nonnegative while flattening distances, so each search stays local
    for j in range(m):
        best = cost[0, j]
        for i in range(1, n):
            if cost[i, j] < best:
                best = cost[i, j]
        pot[n + j] = best
    excess = supply.copy()
    deficit = demand.copy()
    dist = np.empty(nodes)
    parent = np.empty(nodes, np.int64)
    done = np.zeros(nodes, np.bool_)
    cap = 8 * nodes + 64
    heap_keys = np.empty(cap)
    heap_codes = np.empty(cap, np.int64)
    max_phase = 50 * nodes + 1000
    # sources with positive flow into each sink, so the reverse relaxation
    # walks actual arcs instead of scanning a full column; a sink whose list
    # ever overflows falls back to column scans for the rest of the solve
    adj_width = 16
    adj = np.empty((m, adj_width), np.int64)
    deg = np.zeros(m, np.int64)
    over = np.zeros(m, np.bool_)

    for _ in range(max_phase):
        src = -1
        for i in range(n):
            if excess[i] > thresh:
                src = i
                break
        if src < 0:
            return flow, pot, 0

        for v in range(nodes):
            dist[v] = np.inf
            parent[v] = -1
            done[v] = False
        dist[src] = 0.0
        hsize = _heap_insert(heap_keys, heap_codes, 0, 0.0, src)
        target = -1
        target_dist = np.inf
        while hsize > 0:
            key, node, hsize = _heap_remove(heap_keys, heap_codes, hsize)
            if done[node] or key > dist[node]:
                continue
            done[node] = True
            if node >= n and deficit[node - n] > thresh:
                target = node
                target_dist = key
                break
            if node < n:
                base = key + pot[node]
                for j in range(m):
                    v = n + j
                    if done[v]:
                        continue
                    nd = base + cost[node, j] - pot[v]
                    if nd < dist[v]:
                        dist[v] = nd
                        parent[v] = node
                        if hsize >= cap:
                            hsize = _heap_compact(heap_keys, heap_codes, hsize, dist, done)
                        hsize = _heap_insert(heap_keys, heap_codes, hsize, nd, v)
            else:
                j = node - n
                base = key + pot[node]
                if over[j]:
                    for i in range(n):
                        if done[i] or flow[i, j] <= 0.0:
                            continue
                        nd = base - cost[i, j] - pot[i]
                        if nd < dist[i]:
                            dist[i] = nd
                            parent[i] = node
                            if hsize >= cap:
                                hsize = _heap_compact(heap_keys, heap_codes, hsize, dist, done)
                            hsize = _heap_insert(heap_keys, heap_codes, hsize, nd, i)
                else:
                    for a in range(deg[j]):
                        i = adj[j, a]
                        if done[i] or flow[i, j] <= 0.0:
                            continue
                        nd = base - cost[i, j] - pot[i]
                        if nd < dist[i]:
                            dist[i] = nd
                            parent[i] = node
                            if hsize >= cap:
                                hsize = _heap_compact(heap_keys, heap_codes, hsize, dist, done)
                            hsize = _heap_insert(heap_keys, heap_codes, hsize, nd, i)
        if target < 0:
            # either done (only dust remains) or genuinely stuck
            worst = 0.0
            for j in range(m):
                if deficit[j] > worst:
                    worst = deficit[j]
            if worst <= thresh:
                return flow, pot, 0
            return flow, pot, -1

        for v in range(nodes):
            if dist[v] < target_dist:
                pot[v] += dist[v]
            else:
                pot[v] += target_dist

        bottleneck = deficit[target - n]
        if excess[src] < bottleneck:
            bottleneck = excess[src]
        v = target
        while v != src:
            p = parent[v]
            if v < n:
                f = flow[v, p - n]
                if f < bottleneck:
                    bottleneck = f
            v = p
        v = target
        while v != src:
            p = parent[v]
            if v >= n:
                j = v - n
                if flow[p, j] == 0.0 and not over[j]:
                    if deg[j] < adj_width:
                        adj[j, deg[j]] = p
                        deg[j] += 1
                    else:
                        over[j] = True
                flow[p, j] += bottleneck
            else:
                j = p - n
                f = flow[v, j] - bottleneck
                if f < 1e-16:
                    f = 0.0
                    if not over[j]:
                        for a in range(deg[j]):
                            if adj[j, a] == v:
                                deg[j] -= 1
                                adj[j, a] = adj[j, deg[j]]
                                break
                flow[v, j] = f
            v = p
        excess[src] -= bottleneck
        if excess[src] < 1e-16:
            excess[src] = 0.0
        deficit[target - n] -= bottleneck
        if deficit[target - n] < 1e-16:
            deficit[target - n] = 0.0
    return flow, pot, -2


def _audit(cost, supply, demand, flow, pot):
    n, m = cost.shape
    primal = float(np.sum(flow * cost))
    dual = float(-np.dot(pot[:n], supply) + np.dot(pot[n:], demand))
    tau = 1e-9 * (1.0 + float(np.max(cost, initial=0.0)))
    worst_rc = 0.0
    step = max(1, min(n, 1 + 2**22 // max(m, 1)))
    for lo in range(0, n, step):
        hi = min(lo + step, n)
        rc = cost[lo:hi] + pot[lo:hi, None] - pot[None, n:]
        worst_rc = min(worst_rc, float(np.min(rc)))
    if worst_rc < -tau:
        raise RootSolveError(
            f"transport optimality certificate failed: reduced cost {worst_rc:.3g} < -{tau:.3g}"
        )
    gap = abs(primal - dual)
    if gap > tau * (1.0 + abs(primal)):
        raise RootSolveError(
            f"transport duality gap {gap:.3g} exceeds tolerance "
            f"(primal {primal:.12g}, dual {dual:.12g})"
        )
    row = np.sum(flow, axis=1) - supply
    col = np.sum(flow, axis=0) - demand
    marg = max(float(np.max(np.abs(row))), float(np.max(np.abs(col))))
    if marg > 1e-10:
        raise RootSolveError(f"transport marginals off by {marg:.3g}")
    return primal


def emd(mu: DiscreteMeasure, nu: DiscreteMeasure, support_cap: int = 4000) -> TransportPlan:
    """Exact earth-mover distance between two equal-mass measures.

    Solves the transportation problem on the complete bipartite graph with
    Euclidean ground cost and audits the result against LP duality; raises
    if either support exceeds ``support_cap``.
    """

    if mu.size > support_cap or nu.size > support_cap:
        raise BilayerError(
            f"support sizes ({mu.size}, {nu.size}) exceed support_cap={support_cap}; "
            "raise the cap or thin the measures"
        )
    if mu.points.shape[1] != nu.points.shape[1]:
        raise BilayerError("measures live in different ambient dimensions")
    tot_mu, tot_nu = mu.total_mass, nu.total_mass
    if abs(tot_mu - tot_nu) > _MASS_RTOL * max(1.0, tot_mu, tot_nu):
        raise BilayerError(
            f"total masses differ: {tot_mu:.12g} vs {tot_nu:.12g}"
        )
    keep_mu = np.nonzero(mu.weights > 0.0)[0]
    keep_nu = np.nonzero(nu.weights > 0.0)[0]
    if keep_mu.size == 0 or keep_nu.size == 0:
        return TransportPlan(
            source_index=np.empty(0, dtype=np.int64),
            target_index=np.empty(0, dtype=np.int64),
            mass=np.empty(0),
            cost=0.0,
        )
    supply = mu.weights[keep_mu]
    demand = nu.weights[keep_nu] * (tot_mu / tot_nu)
    cost = cdist(mu.points[keep_mu], nu.points[keep_nu])
    thresh = 1e-15 * max(tot_mu, 1e-300)
    flow, pot, status = _ssp_kernel(cost, supply, demand, thresh)
    if status == -1:
        raise RootSolveError("transport solve stalled before routing all mass")
    if status == -2:
        raise RootSolveError("transport solve exceeded its phase budget")
    total_cost = _audit(cost, supply, demand, flow, pot)
    src, dst = np.nonzero(flow > 0.0)
    return TransportPlan(
        source_index=keep_mu[src],
        target_index=keep_nu[dst],
        mass=flow[src, dst],
        cost=total_cost,
    )


def dual_certificate(mu: DiscreteMeasure, nu: DiscreteMeasure, phi) -> DualBound:
    """Lower bound on emd(mu, nu) from a candidate 1-Lipschitz potential.

    ``phi`` maps an (..., d) array of points to values.  The worst relative
    Lipschitz violation eta over cross pairs is measured, and the raw dual
    value is shrunk by 1/(1+eta) so the bound stays valid even when the
    candidate is slightly too steep.
    """

    f_mu = np.asarray(phi(mu.points), dtype=float)
    f_nu = np.asarray(phi(nu.points), dtype=float)
    if f_mu.shape != (mu.size,) or f_nu.shape != (nu.size,):
        raise BilayerError("potential must return one value per support point")
    value = float(np.dot(f_mu, mu.weights) - np.dot(f_nu, nu.weights))
    # potential differences below rounding noise are treated as satisfied,
    # else near-coincident support points would read as steep slopes
    noise = 64.0 * np.finfo(float).eps * max(
        1.0, float(np.max(np.abs(f_mu), initial=0.0)), float(np.max(np.abs(f_nu), initial=0.0))
    )
    eta = 0.0
    step = max(1, min(mu.size, 1 + 2**22 // max(nu.size, 1)))
    for lo in range(0, mu.size, step):
        hi = min(lo + step, mu.size)
        dist = cdist(mu.points[lo:hi], nu.points)
        excess = np.abs(f_mu[lo:hi, None] - f_nu[None, :]) - noise
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = excess / dist - 1.0
        ratio = np.where(
            excess > 0.0, np.where(dist > 0.0, ratio, np.inf), -1.0
        )
        eta = max(eta, float(np.max(ratio, initial=0.0)))
    eta = max(eta, 0.0)
    bound = value / (1.0 + eta) if np.isfinite(eta) else 0.0
    return DualBound(bound=bound, eta=eta)


def monotone_1d(positions_a, weights_a, positions_b, weights_b) -> float:
    """Exact 1-d earth-mover distance via the cumulative functions."""

    xa = np.asarray(positions_a, dtype=float).ravel()
    wa = np.asarray(weights_a, dtype=float).ravel()
    xb = np.asarray(positions_b, dtype=float).ravel()
    wb = np.asarray(weights_b, dtype=float).ravel()
    if xa.shape != wa.shape or xb.shape != wb.shape:
        raise BilayerError("positions and weights must match in length")
    ta, tb = float(np.sum(wa)), float(np.sum(wb))
    if abs(ta - tb) > _MASS_RTOL * max(1.0, ta, tb):
        raise BilayerError(f"total masses differ: {ta:.12g} vs {tb:.12g}")
    oa = np.argsort(xa, kind="stable")
    ob = np.argsort(xb, kind="stable")
    xa, wa = xa[oa], wa[oa]
    xb, wb = xb[ob], wb[ob]
    grid = np.sort(np.concatenate([xa, xb]), kind="stable")
    ca = np.concatenate([[0.0], np.cumsum(wa)])
    cb = np.concatenate([[0.0], np.cumsum(wb)])
    fa = ca[np.searchsorted(xa, grid[:-1], side="right")]
    fb = cb[np.searchsorted(xb, grid[:-1], side="right")]
    return float(np.sum(np.abs(fa - fb) * np.diff(grid)))
