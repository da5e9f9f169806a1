"""Diagnostics for the essential-connectedness argument on the RNG.

These are invariant checks: ``theta_chain`` and ``prop2_events`` raise
:class:`InvariantViolation` if a deterministic consequence of the RNG
geometry fails, which would indicate a defect in the builders.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .errors import InvalidParameterError, InvariantViolation, WorkCapExceeded
from .experiment import ExperimentResult, derive_seed, mean_se, pmap
from .geom import Configuration, Window, lenses_inside_window, sample_ppp
from .graphs import build_mst
from .robust import RobustReport, robust_subnetwork


@dataclass(frozen=True)
class ThetaChain:
    cities: tuple[int, ...]
    gaps: tuple[float, ...]
    terminal: bool
    connected: bool = False

    @property
    def m(self) -> int:
        return max(len(self.cities) - 1, 0)


def _nearest_other(points: np.ndarray, labels: np.ndarray, v: int) -> tuple[int, float]:
    """Nearest city in a different component; ties go to the smaller index."""
    other = np.flatnonzero(labels != labels[v])
    d = np.hypot(*(points[other] - points[v]).T)
    k = np.lexsort((other, d))[0]
    return int(other[k]), float(d[k])


def theta_chain(report: RobustReport, config: Configuration, v0: int) -> ThetaChain:
    """Follow ``v -> theta(v)`` (nearest city in another component) until a terminal city.

    A city is terminal when the lune towards its nearest other-component
    city is not inside the window.  The three chain properties are checked
    before returning.
    """
    if not (0 <= v0 < config.n):
        raise InvalidParameterError(f"city index {v0} out of range")
    if report.connected:
        return ThetaChain((), (), False, connected=True)
    pts = config.points
    labels = report.components.labels
    window = report.window
    chain = [int(v0)]
    gaps: list[float] = []
    v = int(v0)
    while True:
        w, dist = _nearest_other(pts, labels, v)
        inside = lenses_inside_window(pts[[v]], pts[[w]], dist, window)[0]
        if not inside:
            break
        if w in chain:
            raise InvariantViolation(f"theta chain revisits city {w}")
        chain.append(w)
        gaps.append(dist)
        v = w
    result = ThetaChain(tuple(chain), tuple(gaps), True)
    _check_chain(result, report, config)
    return result


def _check_chain(chain: ThetaChain, report: RobustReport, config: Configuration) -> None:
    pts = config.points
    labels = report.components.labels
    delta = report.window.boundary_distance(pts)
    if len(set(chain.cities)) != len(chain.cities):
        raise InvariantViolation("chain cities are not distinct")
    if any(b >= a for a, b in zip(chain.gaps, chain.gaps[1:])):
        raise InvariantViolation(f"chain gaps not strictly decreasing: {chain.gaps}")
    v0 = chain.cities[0]
    if chain.m == 0:
        d = np.hypot(*(pts - pts[v0]).T)
        near = d <= delta[v0]
        if (labels[near] != labels[v0]).any():
            raise InvariantViolation(f"city {v0}: other component within its boundary distance")
    else:
        vm = chain.cities[-1]
        if not delta[vm] < chain.gaps[0]:
            raise InvariantViolation(f"terminal city {vm} too far from the boundary")


# --- decreasing chains -----------------------------------------------------

def chain_bound(L: float, d0: float, n: int) -> float:
    """Expected number of qualifying chains: ``L^2 pi^n d0^(2n) / n!``."""
    return L * L * math.pi ** n * d0 ** (2 * n) / math.factorial(n)


def has_decreasing_chain(points: np.ndarray, starts: np.ndarray, d0: float, n: int,
                         work_cap: int = 10**8) -> tuple[bool, int]:
    """Is there a chain of ``n+1`` distinct points starting in ``starts`` with
    ``d0 >= gap_1 >= gap_2 >= ... >= gap_n``?  Returns ``(found, visits)``."""
    if d0 <= 0 or len(points) < n + 1:
        return False, 0
    tree = cKDTree(points)
    nbrs = tree.query_ball_point(points, d0)
    dist_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def nb(u):
        if u not in dist_cache:
            idx = np.asarray([x for x in nbrs[u] if x != u], dtype=np.intp)
            d = np.hypot(*(points[idx] - points[u]).T) if len(idx) else np.empty(0)
            order = np.argsort(d)
            dist_cache[u] = (idx[order], d[order])
        return dist_cache[u]

    visits = 0
    for s in starts.tolist():
        path = [s]
        on_path = {s}
        # explicit stack of (node, last_gap, neighbour cursor)
        stack = [(s, d0, 0)]
        while stack:
            u, last, cur = stack[-1]
            idx, d = nb(u)
            advanced = False
            while cur < len(idx) and d[cur] <= last:
                w = int(idx[cur])
                cur += 1
                if w in on_path:
                    continue
                visits += 1
                if visits > work_cap:
                    raise WorkCapExceeded(f"chain search exceeded {work_cap} visits; "
                                          "use a smaller n or d0")
                if len(path) == n:
                    return True, visits
                stack[-1] = (u, last, cur)
                stack.append((w, float(d[cur - 1]), 0))
                path.append(w)
                on_path.add(w)
                advanced = True
                break
            if not advanced:
                stack.pop()
                on_path.discard(path.pop())
    return False, visits


CHAIN_COLUMNS = ["L", "d0", "n", "replicate", "seed", "found", "visits"]


def _chain_cell(task, L, d0, n, intensity, work_cap):
    rep, s = task
    pad = n * d0
    cfg = sample_ppp(Window(-pad, -pad, L + pad, L + pad), intensity, s)
    starts = np.flatnonzero(Window.square(L).contains(cfg.points))
    found, visits = has_decreasing_chain(cfg.points, starts, d0, n, work_cap)
    return {"L": L, "d0": d0, "n": n, "replicate": rep, "seed": s, "found": found, "visits": visits}


def decreasing_chain_probability(L: float, d0: float, n: int, intensity: float = 1.0,
                                 replicates: int = 1000, seed: int = 0,
                                 work_cap: int = 10**8, workers: int = 1):
    """Empirical probability of a non-increasing chain, next to the analytic bound.

    The first chain point lies in ``[0, L]^2``; the others may lie anywhere,
    so the process is sampled on the square grown by ``n * d0``.  Returns
    ``(probability, stderr, bound, result)``.
    """
    if n < 1 or d0 < 0:
        raise InvalidParameterError("need n >= 1 and d0 >= 0")
    # with intensity lam the expected chain count picks up lam^(n+1)
    bound = chain_bound(L, d0, n) * intensity ** (n + 1)
    if d0 == 0:
        return 0.0, 0.0, 0.0, ExperimentResult("chains", CHAIN_COLUMNS, [], {"bound": 0.0})
    tasks = [(rep, derive_seed(seed, rep)) for rep in range(replicates)]
    rows = pmap(partial(_chain_cell, L=float(L), d0=float(d0), n=int(n), intensity=intensity,
                        work_cap=work_cap), tasks, workers)
    prob, se = mean_se([float(r["found"]) for r in rows])
    summary = {"L": L, "d0": d0, "n": n, "probability": prob, "stderr": se, "bound": bound,
               "within_bound": bool(prob <= bound + 3 * (se if se == se else 0.0))}
    return prob, se, bound, ExperimentResult("chains", CHAIN_COLUMNS, rows, summary)


# --- MST and pair sums -----------------------------------------------------

def longest_mst_edge(config: Configuration) -> float:
    if config.n < 2:
        raise InvalidParameterError("need at least two cities")
    return float(build_mst(config).lengths.max())


def pairwise_distance_sum(config: Configuration, sigma: float) -> float:
    """Sum of distances over unordered pairs of cities in the open disc of radius ``sigma`` at the origin."""
    if sigma < 0:
        raise InvalidParameterError("sigma must be >= 0")
    if config.n < 2 or sigma == 0:
        return 0.0
    tree = cKDTree(config.points)
    idx = np.asarray(tree.query_ball_point((0.0, 0.0), sigma), dtype=np.intp)
    if len(idx) < 2:
        return 0.0
    # query_ball_point is closed; the disc here is open
    idx = idx[np.hypot(*config.points[idx].T) < sigma]
    if len(idx) < 2:
        return 0.0
    return float(pdist(config.points[idx]).sum())


MST_COLUMNS = ["L", "replicate", "seed", "n", "longest"]


def _mst_cell(task, intensity):
    L, rep, s = task
    cfg = sample_ppp(Window.square(L), intensity, s)
    longest = longest_mst_edge(cfg) if cfg.n >= 2 else math.nan
    return {"L": L, "replicate": rep, "seed": s, "n": cfg.n, "longest": longest}


def longest_edge_sweep(Ls, replicates: int, seed: int, intensity: float = 1.0,
                       workers: int = 1) -> ExperimentResult:
    """Mean longest MST edge per window side, with log-L and sqrt-L fits compared."""
    tasks = [(float(L), rep, derive_seed(seed, k, rep))
             for k, L in enumerate(Ls) for rep in range(replicates)]
    rows = pmap(partial(_mst_cell, intensity=intensity), tasks, workers)
    Ls = [float(L) for L in Ls]
    means = np.array([np.nanmean([r["longest"] for r in rows if r["L"] == L]) for L in Ls])
    fits = {}
    for name, x in (("log", np.log(Ls)), ("sqrt", np.sqrt(Ls))):
        coef, res, *_ = np.polyfit(x, means, 1, full=True)
        fits[name] = {"slope": float(coef[0]), "intercept": float(coef[1]),
                      "sse": float(res[0]) if len(res) else 0.0}
    summary = {"per_L": [{"L": L, "mean": float(m)} for L, m in zip(Ls, means)], "fits": fits,
               "prefers_log": fits["log"]["sse"] < fits["sqrt"]["sse"]}
    return ExperimentResult("mst_longest", MST_COLUMNS, rows, summary)


# --- Long-edge versus decreasing-chain events -----------------------------

@dataclass(frozen=True)
class Prop2Scales:
    n: int
    d0: float
    M: float

    @classmethod
    def for_L(cls, L: float, c_star: float) -> "Prop2Scales":
        n = int(math.floor(math.sqrt(L)))
        d0 = c_star * math.log(L)
        return cls(n, d0, L - 2 * (1 + n) * d0)


PROP2_COLUMNS = ["L", "c_star", "replicate", "seed", "n_cities", "A", "B", "implication", "inner_cities"]


def prop2_indicators(config: Configuration, L: float, scales: Prop2Scales) -> dict:
    """Indicators of A_L, B_L and of the conclusion for one configuration on ``[0, L]^2``."""
    report = robust_subnetwork(config, "rng", Window.square(L))
    labels = report.components.labels
    pts = config.points
    delta = report.window.boundary_distance(pts)
    deep = delta >= scales.d0 * (scales.n + 1)
    A = False
    if config.n >= 2 and deep.any():
        pairs = cKDTree(pts).query_pairs(scales.d0, output_type="ndarray")
        if len(pairs):
            split = labels[pairs[:, 0]] != labels[pairs[:, 1]]
            A = bool((split & (deep[pairs[:, 0]] | deep[pairs[:, 1]])).any())
    off = (L - scales.M) / 2
    inner, idx = config.restrict(Window(off, off, off + scales.M, off + scales.M))
    B = inner.n >= 2 and longest_mst_edge(inner) > scales.d0
    same = len(idx) == 0 or bool((labels[idx] == labels[idx[0]]).all())
    implication = A or B or same
    if not implication:
        raise InvariantViolation("neither A_L nor B_L, yet the inner square is split across components")
    return {"A": A, "B": bool(B), "implication": implication, "inner_cities": int(len(idx)),
            "n_cities": config.n}


def _prop2_cell(task, L, scales, c_star, intensity):
    rep, s = task
    cfg = sample_ppp(Window.square(L), intensity, s)
    row = prop2_indicators(cfg, L, scales)
    return {"L": L, "c_star": c_star, "replicate": rep, "seed": s, **row}


def prop2_events(L: float, intensity: float = 1.0, replicates: int = 100, seed: int = 0,
                 c_star: float = 2.0, workers: int = 1) -> ExperimentResult:
    """Per replicate, events A_L and B_L and the implication "neither => inner square joined".

    Scales: ``n = floor(sqrt L)``, ``d0 = c_star log L``,
    ``M = L - 2 (1 + n) d0``; ``M`` must exceed 1.
    """
    scales = Prop2Scales.for_L(L, c_star)
    if scales.M <= 1:
        raise InvalidParameterError(f"M = {scales.M:.3f} <= 1 at L={L}, c*={c_star}; "
                                    "use a larger L or smaller c*")
    tasks = [(rep, derive_seed(seed, rep)) for rep in range(replicates)]
    rows = pmap(partial(_prop2_cell, L=float(L), scales=scales, c_star=c_star, intensity=intensity),
                tasks, workers)
    pA, _ = mean_se([float(r["A"]) for r in rows])
    pB, _ = mean_se([float(r["B"]) for r in rows])
    pAB, seAB = mean_se([float(r["A"] or r["B"]) for r in rows])
    summary = {"L": L, "c_star": c_star, "n": scales.n, "d0": scales.d0, "M": scales.M,
               "p_A": pA, "p_B": pB, "p_A_or_B": pAB, "stderr_A_or_B": seAB,
               "implication_holds": all(r["implication"] for r in rows),
               "chain_bound": chain_bound(L, scales.d0, scales.n)}
    return ExperimentResult("prop2", PROP2_COLUMNS, rows, summary)
