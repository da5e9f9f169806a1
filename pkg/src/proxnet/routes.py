"""Network distances and planted-pair route-length statistics."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import partial
from typing import NamedTuple, Sequence

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .errors import InvalidParameterError, UnreachableError
from .experiment import ExperimentResult, derive_seed, mean_se, pmap
from .geom import Configuration, Window, plant, sample_ppp
from .graphs import Network, build_network


@dataclass(frozen=True)
class RouteStat:
    r: float
    ell: float
    d: float
    seed: int
    network_kind: str

    @property
    def ratio(self) -> float:
        return self.ell / self.r


def _check_index(net: Network, i: int) -> int:
    if not (0 <= int(i) < net.n):
        raise InvalidParameterError(f"city index {i} out of range for n={net.n}")
    return int(i)


def network_distance(net: Network, i: int, j: int) -> float:
    """Shortest route length between cities ``i`` and ``j``; ``inf`` when unreachable."""
    i, j = _check_index(net, i), _check_index(net, j)
    if i == j:
        return 0.0
    adj = net.adjacency()
    indptr, indices, data = adj.indptr, adj.indices, adj.data
    dist = {i: 0.0}
    done = set()
    heap = [(0.0, i)]
    while heap:
        du, u = heapq.heappop(heap)
        if u in done:
            continue
        if u == j:
            return du
        done.add(u)
        for k in range(indptr[u], indptr[u + 1]):
            v = int(indices[k])
            nd = du + data[k]
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return math.inf


def default_margin(r: float) -> float:
    return max(20.0, r / 2.0)


def planted_window(r: float, margin: float, angle: float = 0.0) -> tuple[Window, tuple[float, float]]:
    zx, zy = r * math.cos(angle), r * math.sin(angle)
    return Window(min(0.0, zx) - margin, min(0.0, zy) - margin,
                  max(0.0, zx) + margin, max(0.0, zy) + margin), (zx, zy)


def planted_pair_sample(kind: str, r: float, margin: float | None = None, seed: int = 0,
                        intensity: float = 1.0, angle: float = 0.0,
                        beta: float | None = None) -> RouteStat:
    """Route length ``T_z`` between cities planted at the origin and at ``z = r e^{i angle}``.

    The Poisson cities fill the bounding box of the two planted cities grown
    by ``margin`` on every side.
    """
    if not r > 0:
        raise InvalidParameterError(f"r must be positive, got {r}")
    margin = default_margin(r) if margin is None else float(margin)
    if margin < default_margin(r):
        raise InvalidParameterError(f"margin {margin} below the minimum max(20, r/2) = {default_margin(r)}")
    window, z = planted_window(r, margin, angle)
    base = sample_ppp(window, intensity, seed)
    cfg, idx, _ = plant(base, [(0.0, 0.0), z])
    net = build_network(cfg, kind, beta)
    ell = network_distance(net, idx[0], idx[1])
    if not math.isfinite(ell):
        raise UnreachableError(f"planted pair unreachable in {kind} (seed {seed})")
    return RouteStat(float(r), ell, math.hypot(*z), int(seed), kind)


def replicate_seed(seed: int, rep: int) -> int:
    """Seed of replicate ``rep``; shared across separations so curves use common random numbers."""
    return derive_seed(seed, rep)


ROUTE_COLUMNS = ["kind", "r", "replicate", "seed", "ell", "ratio"]


def resolve_margin(r: float, margin: float | None = None, margin_factor: float | None = None) -> float:
    """Largest of the default margin, ``margin`` and ``margin_factor * r``.

    A factor keeps the window shape fixed across separations, which matters
    for networks whose routes wander far from the straight segment (MST).
    """
    m = default_margin(r)
    if margin is not None:
        m = max(m, float(margin))
    if margin_factor is not None:
        if not margin_factor > 0:
            raise InvalidParameterError("margin_factor must be positive")
        m = max(m, margin_factor * r)
    return m


def _route_cell(task, kind, margin, intensity, angle, beta, margin_factor=None):
    r, rep, s = task
    m = resolve_margin(r, margin, margin_factor)
    st = planted_pair_sample(kind, r, m, s, intensity, angle, beta)
    return {"kind": kind, "r": r, "replicate": rep, "seed": s, "ell": st.ell, "ratio": st.ratio}


def route_rows(kind, rs, replicates, seed, margin=None, intensity=1.0, angle=0.0, beta=None,
               workers=1, margin_factor=None) -> list[dict]:
    tasks = [(float(r), rep, replicate_seed(seed, rep)) for r in rs for rep in range(replicates)]
    fn = partial(_route_cell, kind=kind, margin=margin, intensity=intensity, angle=angle, beta=beta,
                 margin_factor=margin_factor)
    return pmap(fn, tasks, workers)


def fit_gamma(rs: Sequence[float], mean_ell: Sequence[float]) -> float:
    """Least-squares slope of log mean route length against log separation."""
    if len(rs) < 2:
        return math.nan
    return float(np.polyfit(np.log(rs), np.log(mean_ell), 1)[0])


def linearity_curve(kind: str, rs: Sequence[float], replicates: int, seed: int,
                    margin: float | None = None, intensity: float = 1.0, angle: float = 0.0,
                    beta: float | None = None, workers: int = 1,
                    margin_factor: float | None = None) -> ExperimentResult:
    """Per-separation mean, standard error and max of ``T_z / r``, plus the fitted exponent."""
    rs = [float(r) for r in rs]
    if not rs or any(r <= 0 for r in rs):
        raise InvalidParameterError("rs must be positive")
    if replicates < 1:
        raise InvalidParameterError("replicates must be >= 1")
    rows = route_rows(kind, rs, replicates, seed, margin, intensity, angle, beta, workers,
                      margin_factor)
    per_r = []
    for r in rs:
        ratios = [row["ratio"] for row in rows if row["r"] == r]
        ells = [row["ell"] for row in rows if row["r"] == r]
        m, se = mean_se(ratios)
        per_r.append({"r": r, "mean_ratio": m, "stderr": se, "max_ratio": max(ratios),
                      "mean_ell": float(np.mean(ells)), "replicates": len(ratios)})
    gamma = fit_gamma(rs, [p["mean_ell"] for p in per_r])
    summary = {"kind": kind, "per_r": per_r, "gamma_hat": gamma, "angle": angle,
               "margins": [resolve_margin(r, margin, margin_factor) for r in rs]}
    return ExperimentResult("linearity", ROUTE_COLUMNS, rows, summary)


class MomentEstimate(NamedTuple):
    value: float
    stderr: float
    replicates: int


def moment_ratio(kind: str, r: float, k: int, replicates: int, seed: int,
                 margin: float | None = None, intensity: float = 1.0,
                 beta: float | None = None, workers: int = 1) -> MomentEstimate:
    """Monte Carlo ``E[T_z^k] / max(1, r^k)`` with its standard error."""
    if k < 1:
        raise InvalidParameterError("k must be >= 1")
    rows = route_rows(kind, [r], replicates, seed, margin, intensity, 0.0, beta, workers)
    scale = max(1.0, float(r) ** k)
    m, se = mean_se([row["ell"] ** k / scale for row in rows])
    return MomentEstimate(m, se, len(rows))


def double_sum_estimate(kind: str, z: float, replicates: int, seed: int, side: float = 1.0,
                        margin: float | None = None, intensity: float = 1.0) -> MomentEstimate:
    """Integrated form: ``E sum_{A} sum_{z+B} l(xi, xi')`` for squares of side ``side``.

    ``A`` is centred at the origin and ``z + B`` at ``(z, 0)``; with unit
    squares this is directly comparable to ``E T_z`` at large ``z``.
    """
    margin = default_margin(z) if margin is None else margin
    vals = []
    for rep in range(replicates):
        window, _ = planted_window(z, margin)
        cfg = sample_ppp(window, intensity, replicate_seed(seed, rep))
        a = np.flatnonzero(Window.centered((0.0, 0.0), side).contains(cfg.points, closed=False))
        b = np.flatnonzero(Window.centered((z, 0.0), side).contains(cfg.points, closed=False))
        if len(a) == 0 or len(b) == 0:
            vals.append(0.0)
            continue
        net = build_network(cfg, kind)
        dist = dijkstra(net.adjacency(), directed=False, indices=a)[:, b]
        if not np.isfinite(dist).all():
            raise UnreachableError("unreachable pair in double-sum estimate")
        vals.append(float(dist.sum()))
    m, se = mean_se(vals)
    return MomentEstimate(m, se, replicates)


def max_stretch(net: Network, config: Configuration) -> float:
    """Largest ``l(x, y) / d(x, y)`` over pairs of distinct positions."""
    if net.n != config.n:
        raise InvalidParameterError("network and configuration differ in size")
    if net.n < 2:
        return 1.0
    dist = dijkstra(net.adjacency(), directed=False)
    pts = config.points
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    iu = np.triu_indices(net.n, 1)
    ell, d = dist[iu], d[iu]
    if not np.isfinite(ell).all():
        raise UnreachableError(f"{int((~np.isfinite(ell)).sum())} city pairs are unreachable")
    pos = d > 0
    if not pos.any():
        return 1.0
    return float((ell[pos] / d[pos]).max())


STRETCH_COLUMNS = ["kind", "n", "replicate", "seed", "stretch"]


def _stretch_cell(task, kind, beta):
    n, rep, s = task
    side = math.sqrt(n)
    rng = np.random.default_rng(s)
    pts = rng.uniform(0.0, side, size=(n, 2))
    cfg = Configuration(pts, Window.square(side), s, 1.0)
    net = build_network(cfg, kind, beta)
    return {"kind": kind, "n": n, "replicate": rep, "seed": s, "stretch": max_stretch(net, cfg)}


def stretch_sweep(kind: str, ns: Sequence[int], replicates: int, seed: int,
                  beta: float | None = None, workers: int = 1) -> ExperimentResult:
    """Stretch of networks on ``n`` uniform cities in a square of area ``n``."""
    tasks = [(int(n), rep, derive_seed(seed, k, rep))
             for k, n in enumerate(ns) for rep in range(replicates)]
    rows = pmap(partial(_stretch_cell, kind=kind, beta=beta), tasks, workers)
    per_n = []
    for n in ns:
        vals = [row["stretch"] for row in rows if row["n"] == int(n)]
        m, se = mean_se(vals)
        per_n.append({"n": int(n), "mean": m, "stderr": se, "max": max(vals)})
    return ExperimentResult("stretch", STRETCH_COLUMNS, rows, {"kind": kind, "per_n": per_n})
