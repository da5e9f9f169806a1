"""Oriented site percolation on the tilted lattice and the block construction.

Lattice sites are ``(n1, n2)`` with ``n1 + n2`` even; oriented-up steps go
from ``(n1, n2)`` to ``(n1 +/- 1, n2 + 1)``.  A finite patch with
``|n1| <= half_width`` and ``|n2| <= half_height`` is stored as a boolean
array indexed ``[n2 + half_height, n1 + half_width]``; cells of the wrong
parity are never good.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import partial
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .errors import InvalidParameterError
from .experiment import ExperimentResult, derive_seed, mean_se, pmap
from .geom import Configuration, Window, sample_ppp
from .robust import robust_subnetwork


@dataclass(frozen=True)
class TiltedLattice:
    half_width: int
    half_height: int

    def __post_init__(self):
        if self.half_width < 0 or self.half_height < 0:
            raise InvalidParameterError("lattice half sizes must be >= 0")

    @property
    def shape(self) -> tuple[int, int]:
        return (2 * self.half_height + 1, 2 * self.half_width + 1)

    def parity_mask(self) -> np.ndarray:
        rows, cols = np.indices(self.shape)
        n2 = rows - self.half_height
        n1 = cols - self.half_width
        return (n1 + n2) % 2 == 0

    def __contains__(self, site) -> bool:
        n1, n2 = site
        return (abs(n1) <= self.half_width and abs(n2) <= self.half_height
                and (n1 + n2) % 2 == 0)

    def sites(self) -> list[tuple[int, int]]:
        return [(n1, n2) for n2 in range(-self.half_height, self.half_height + 1)
                for n1 in range(-self.half_width, self.half_width + 1) if (n1 + n2) % 2 == 0]

    def index(self, site) -> tuple[int, int]:
        n1, n2 = site
        return n2 + self.half_height, n1 + self.half_width


@dataclass(frozen=True, eq=False)
class SiteField:
    lattice: TiltedLattice
    marks: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        marks = np.asarray(self.marks, dtype=bool)
        if marks.shape != self.lattice.shape:
            raise InvalidParameterError(f"marks shape {marks.shape} != lattice {self.lattice.shape}")
        marks = marks & self.lattice.parity_mask()
        marks.setflags(write=False)
        object.__setattr__(self, "marks", marks)

    def good(self, site) -> bool:
        return site in self.lattice and bool(self.marks[self.lattice.index(site)])

    def with_marks(self, marks: np.ndarray) -> "SiteField":
        return SiteField(self.lattice, marks, dict(self.provenance))


# --- synthetic 1-dependent fields ------------------------------------------

MECHANISMS = ("independent", "edge_and")


def synthetic_site_field(lattice: TiltedLattice, p: float, mechanism: str = "independent",
                         seed: int = 0) -> SiteField:
    """Good/bad marks with ``P(good) = p``.

    ``edge_and`` draws a coin of bias ``p**(1/4)`` on every lattice edge and
    calls a site good when its four incident coins all succeed, so only
    adjacent sites are dependent.
    """
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise InvalidParameterError(f"p must lie in [0, 1], got {p}")
    if mechanism not in MECHANISMS:
        raise InvalidParameterError(f"mechanism must be one of {MECHANISMS}")
    rng = np.random.default_rng(seed)
    h, w = lattice.shape
    if mechanism == "independent":
        marks = rng.random((h, w)) < p
    else:
        q = p ** 0.25
        # coins on up-left / up-right edges leaving each cell of a padded grid
        up_left = rng.random((h + 1, w + 2)) < q
        up_right = rng.random((h + 1, w + 2)) < q
        # cell (r, c) of the patch is (r + 1, c + 1) in the padded grid
        own_ul = up_left[1:, 1:-1]
        own_ur = up_right[1:, 1:-1]
        # incoming down-edges: from (n1+1, n2-1) via its up-left, from (n1-1, n2-1) via up-right
        in_ul = up_left[:-1, 2:]
        in_ur = up_right[:-1, :-2]
        marks = own_ul & own_ur & in_ul & in_ur
    return SiteField(lattice, marks, {"kind": "synthetic_p", "p": p, "mechanism": mechanism,
                                      "seed": seed})


# --- reachability ----------------------------------------------------------

def oriented_reach(field_: SiteField, start, direction: str = "up") -> set[tuple[int, int]]:
    """Sites reachable from ``start`` along oriented steps through good sites."""
    if direction not in ("up", "down"):
        raise InvalidParameterError("direction must be 'up' or 'down'")
    lat = field_.lattice
    if start not in lat:
        raise InvalidParameterError(f"site {start} not in lattice")
    start = (int(start[0]), int(start[1]))
    if not field_.good(start):
        return set()
    step = 1 if direction == "up" else -1
    seen = {start}
    queue = deque([start])
    while queue:
        n1, n2 = queue.popleft()
        for nxt in ((n1 - 1, n2 + step), (n1 + 1, n2 + step)):
            if nxt not in seen and field_.good(nxt):
                seen.add(nxt)
                queue.append(nxt)
    return seen


def _sweep(marks: np.ndarray, seed_row: np.ndarray, rows) -> np.ndarray:
    """Propagate reachability across ``rows`` (in order), starting from ``seed_row``."""
    out = np.zeros_like(marks)
    prev = None
    for k in rows:
        if prev is None:
            cur = marks[k] & seed_row
        else:
            src = out[prev]
            nb = np.zeros_like(src)
            nb[1:] |= src[:-1]
            nb[:-1] |= src[1:]
            cur = marks[k] & nb
        out[k] = cur
        prev = k
    return out


def spanning_sets(field_: SiteField) -> tuple[np.ndarray, np.ndarray]:
    """``(from_bottom, to_top)``: sites on a good path from the bottom row, and to the top row."""
    marks = field_.marks
    h = marks.shape[0]
    ones = np.ones(marks.shape[1], dtype=bool)
    from_bottom = _sweep(marks, ones, range(h))
    to_top = _sweep(marks, ones, range(h - 1, -1, -1))
    return from_bottom, to_top


class TResult(NamedTuple):
    T: int | None
    truncated: bool


def t_statistic(field_: SiteField, variant: str = "doubly") -> TResult:
    """Smallest even ``T >= 2`` with ``(T, 0)`` on a strip-spanning good path.

    ``doubly`` asks for a path crossing the whole patch from bottom to top
    row (the finite stand-in for a doubly-infinite path); ``semi`` only for a
    path from ``(T, 0)`` up to the top row.  ``T`` is ``None`` and
    ``truncated`` is set when no ``T <= half_width`` qualifies.
    """
    if variant not in ("doubly", "semi"):
        raise InvalidParameterError("variant must be 'doubly' or 'semi'")
    lat = field_.lattice
    from_bottom, to_top = spanning_sets(field_)
    row = lat.half_height
    ok = to_top[row] if variant == "semi" else (from_bottom[row] & to_top[row])
    for T in range(2, lat.half_width + 1, 2):
        if ok[T + lat.half_width]:
            return TResult(T, False)
    return TResult(None, True)


T_COLUMNS = ["mechanism", "p", "half_width", "half_height", "replicate", "seed", "T", "truncated",
             "T_semi", "truncated_semi"]


def _t_cells(task, p, mechanism, half_width, half_heights):
    rep, s = task
    top = max(half_heights)
    big = synthetic_site_field(TiltedLattice(half_width, top), p, mechanism, s)
    out = []
    for hh in half_heights:
        # central rows of the tallest strip: every height sees the same field
        lat = TiltedLattice(half_width, hh)
        f = SiteField(lat, big.marks[top - hh: top + hh + 1], dict(big.provenance))
        d = t_statistic(f, "doubly")
        semi = t_statistic(f, "semi")
        out.append({"mechanism": mechanism, "p": p, "half_width": half_width, "half_height": hh,
                    "replicate": rep, "seed": s, "T": d.T, "truncated": d.truncated,
                    "T_semi": semi.T, "truncated_semi": semi.truncated})
    return out


def tail_profile(values: Sequence[int]) -> dict:
    """Empirical pmf and survival of an even-valued statistic on ``2, 4, ..., max``."""
    v = np.asarray([x for x in values if x is not None], dtype=int)
    if len(v) == 0:
        return {"t": [], "pmf": [], "survival": [], "pmf_nonincreasing": False}
    ts = np.arange(2, v.max() + 1, 2)
    pmf = np.array([(v == t).mean() for t in ts])
    surv = np.array([(v > t).mean() for t in ts])
    return {"t": ts.tolist(), "pmf": pmf.tolist(), "survival": surv.tolist(),
            "pmf_nonincreasing": bool(np.all(np.diff(pmf) <= 0))}


def t_sweep(p: float, mechanism: str, half_width: int, half_heights: Sequence[int],
            replicates: int, seed: int, workers: int = 1) -> ExperimentResult:
    """T statistic over replicate fields at several strip heights, with the adequacy check.

    Replicate ``r`` draws one field of the tallest strip from
    ``derive_seed(seed, r)``; shorter strips are its central rows.  The
    finite strip is judged adequate when the mean ``T`` at the first and last
    heights agree within two combined standard errors; otherwise every
    summary entry is flagged truncated.
    """
    heights = [int(hh) for hh in half_heights]
    if not heights or min(heights) < 1:
        raise InvalidParameterError("half_heights must be positive")
    tasks = [(rep, derive_seed(seed, rep)) for rep in range(replicates)]
    cells = pmap(partial(_t_cells, p=p, mechanism=mechanism, half_width=half_width,
                         half_heights=heights), tasks, workers)
    rows = sorted((row for cell in cells for row in cell),
                  key=lambda r: (heights.index(r["half_height"]), r["replicate"]))
    per_h = []
    for hh in half_heights:
        sub = [r for r in rows if r["half_height"] == int(hh)]
        ts = [r["T"] for r in sub if not r["truncated"]]
        m, se = mean_se(ts)
        semi = [r["T_semi"] for r in sub if not r["truncated_semi"]]
        ms, ses = mean_se(semi)
        per_h.append({"half_height": int(hh), "mean_T": m, "stderr": se,
                      "truncated": len(sub) - len(ts), "mean_T_semi": ms, "stderr_semi": ses,
                      "tail": tail_profile(ts)})
    a, b = per_h[0], per_h[-1]
    gap = abs(a["mean_T"] - b["mean_T"])
    band = 2 * math.sqrt(np.nan_to_num(a["stderr"]) ** 2 + np.nan_to_num(b["stderr"]) ** 2)
    adequate = bool(gap <= band) if len(per_h) > 1 else True
    summary = {"p": p, "mechanism": mechanism, "half_width": half_width, "per_height": per_h,
               "adequate": adequate, "truncated": (not adequate) or any(h["truncated"] for h in per_h)}
    return ExperimentResult("perc_t", T_COLUMNS, rows, summary)


# --- block construction ----------------------------------------------------

@dataclass(frozen=True)
class BlockParams:
    L: float
    c_L: float = math.inf

    def __post_init__(self):
        if not self.L > 0 or not self.c_L > 0:
            raise InvalidParameterError("block scale L and cap c_L must be positive")


class NiceResult(NamedTuple):
    nice: bool
    counts_ok: bool
    largest_ok: bool
    length_ok: bool
    counts: tuple[int, int, int, int]
    largest: int
    length: float


def classify_nice(config: Configuration, center, params: BlockParams) -> NiceResult:
    """Nice test for the open ``L x L`` square centred at ``center``.

    (i) each quarter holds between ``0.24 L^2`` and ``0.26 L^2`` cities
    (closed interval); (ii) the largest component of the robust subnetwork
    of the square has at least ``0.99 L^2`` cities; (iii) that subnetwork has
    total length at most ``c_L``.
    """
    L = params.L
    sq = Window.centered(center, L)
    if not config.window.contains_window(sq):
        raise InvalidParameterError("block square is not inside the configuration window")
    inside = sq.contains(config.points, closed=False)
    pts = config.points[inside]
    cx, cy = sq.center
    left, low = pts[:, 0] < cx, pts[:, 1] < cy
    counts = (int((left & low).sum()), int((~left & low).sum()),
              int((left & ~low).sum()), int((~left & ~low).sum()))
    lo, hi = 0.24 * L * L, 0.26 * L * L
    counts_ok = all(lo <= c <= hi for c in counts)
    report = robust_subnetwork(Configuration(pts, sq), "rng")
    largest = report.largest_component_size
    length = report.net.total_length()
    largest_ok = largest >= 0.99 * L * L
    length_ok = length <= params.c_L
    return NiceResult(counts_ok and largest_ok and length_ok, counts_ok, largest_ok, length_ok,
                      counts, largest, length)


MIDPOINT_OFFSETS = ((-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5))


def site_goodness(config: Configuration, center, params: BlockParams) -> tuple[bool, list[NiceResult]]:
    """Good iff the site square and its four diagonal midpoint squares are all nice."""
    cx, cy = center
    res = [classify_nice(config, (cx, cy), params)]
    res += [classify_nice(config, (cx + dx * params.L, cy + dy * params.L), params)
            for dx, dy in MIDPOINT_OFFSETS]
    return all(r.nice for r in res), res


def block_site_field(config: Configuration, lattice: TiltedLattice, params: BlockParams) -> SiteField:
    """Good marks of the scaled lattice ``L * (n1, n2)`` computed from a city configuration."""
    marks = np.zeros(lattice.shape, dtype=bool)
    cache: dict[tuple[float, float], NiceResult] = {}

    def nice(c):
        if c not in cache:
            cache[c] = classify_nice(config, c, params)
        return cache[c].nice

    L = params.L
    for n1, n2 in lattice.sites():
        cx, cy = n1 * L, n2 * L
        marks[lattice.index((n1, n2))] = nice((cx, cy)) and all(
            nice((cx + dx * L, cy + dy * L)) for dx, dy in MIDPOINT_OFFSETS)
    return SiteField(lattice, marks, {"kind": "block", "L": L, "c_L": params.c_L,
                                      "fingerprint": config.fingerprint()})


GOOD_COLUMNS = ["L", "c_L", "replicate", "seed", "good", "nice_v", "nice_m1", "nice_m2", "nice_m3",
                "nice_m4", "counts_ok_all", "largest_ok_all", "max_len"]


def _good_cell(task, c_Ls, intensity):
    L, rep, s = task
    config = sample_ppp(Window.centered((0.0, 0.0), 2 * L), intensity, s)
    _, res = site_goodness(config, (0.0, 0.0), BlockParams(L))
    counts_ok = all(r.counts_ok for r in res)
    largest_ok = all(r.largest_ok for r in res)
    max_len = max(r.length for r in res)
    out = []
    for c in c_Ls:
        nice = [r.counts_ok and r.largest_ok and r.length <= c for r in res]
        out.append({"L": L, "c_L": c, "replicate": rep, "seed": s, "good": all(nice),
                    "nice_v": nice[0], "nice_m1": nice[1], "nice_m2": nice[2], "nice_m3": nice[3],
                    "nice_m4": nice[4], "counts_ok_all": counts_ok, "largest_ok_all": largest_ok,
                    "max_len": max_len})
    return out


def good_probability(Ls: Sequence[float], c_Ls: Sequence[float], replicates: int, seed: int,
                     intensity: float = 1.0, thresholds: Sequence[float] = (0.9, 0.95, 0.99),
                     workers: int = 1) -> ExperimentResult:
    """Monte Carlo ``P(site good)`` on a grid of block scales and length caps.

    Each replicate samples the ``2L x 2L`` square around the site once and
    re-evaluates condition (iii) for every cap, so all caps share replicates.
    """
    if replicates < 1:
        raise InvalidParameterError("replicates must be >= 1")
    Ls = [float(L) for L in Ls]
    c_Ls = [float(c) for c in c_Ls]
    tasks = [(L, rep, derive_seed(seed, k, rep)) for k, L in enumerate(Ls) for rep in range(replicates)]
    rows = [row for cell in pmap(partial(_good_cell, c_Ls=c_Ls, intensity=intensity), tasks, workers)
            for row in cell]
    grid = []
    for L in Ls:
        for c in c_Ls:
            vals = [float(r["good"]) for r in rows if r["L"] == L and r["c_L"] == c]
            m, se = mean_se(vals)
            grid.append({"L": L, "c_L": c, "p_good": m, "stderr": se,
                         "crosses": {str(t): bool(m >= t) for t in thresholds}})
    lens = {L: [r["max_len"] for r in rows if r["L"] == L and r["c_L"] == c_Ls[0]] for L in Ls}
    summary = {"intensity": intensity, "grid": grid, "thresholds": list(thresholds),
               "len_p99": {str(L): float(np.percentile(v, 99)) for L, v in lens.items()}}
    return ExperimentResult("good_prob", GOOD_COLUMNS, rows, summary)


# --- 1-dependence ----------------------------------------------------------

def independence_pvalue(a: Sequence[bool], b: Sequence[bool]) -> tuple[float, bool]:
    """P-value of a 2x2 independence test; ``(1.0, True)`` when a margin is empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    table = np.array([[np.sum(a & b), np.sum(a & ~b)], [np.sum(~a & b), np.sum(~a & ~b)]])
    if (table.sum(axis=0) == 0).any() or (table.sum(axis=1) == 0).any():
        return 1.0, True
    expected = np.outer(table.sum(1), table.sum(0)) / table.sum()
    if expected.min() < 5:
        return float(stats.fisher_exact(table)[1]), False
    return float(stats.chi2_contingency(table, correction=False)[1]), False


SYNTHETIC_PAIRS = {
    "adjacent": ((0, 0), (1, 1)),
    "horizontal2": ((0, 0), (2, 0)),
    "vertical2": ((0, 0), (0, 2)),
    "diagonal2": ((0, 0), (2, 2)),
}


@dataclass
class DependenceReport:
    mechanism: str
    pvalues: dict
    alpha: float
    degenerate: dict
    marginal: dict

    @property
    def corrected_alpha(self) -> float:
        return self.alpha / max(1, len(self.pvalues))

    @property
    def rejected(self) -> dict:
        return {k: p < self.corrected_alpha for k, p in self.pvalues.items()}

    @property
    def any_rejected(self) -> bool:
        return any(self.rejected.values())


def one_dependence_test(mechanism: str, p: float = 0.5, samples: int = 2000, seed: int = 0,
                        pairs: Sequence[str] = ("horizontal2", "vertical2", "diagonal2"),
                        params: BlockParams | None = None, intensity: float = 1.0,
                        alpha: float = 0.001) -> DependenceReport:
    """Empirical pairwise independence of good marks, Bonferroni-corrected.

    ``mechanism`` is a synthetic mechanism or ``"block"``; for blocks each
    sample is a fresh Poisson configuration on the squares needed by the two
    sites, and only non-adjacent pairs make sense.
    """
    marks: dict[str, tuple[list, list]] = {k: ([], []) for k in pairs}
    for k in pairs:
        if k not in SYNTHETIC_PAIRS:
            raise InvalidParameterError(f"unknown pair {k!r}; choose from {sorted(SYNTHETIC_PAIRS)}")
    if mechanism == "block":
        if params is None:
            raise InvalidParameterError("block mechanism needs BlockParams")
        if "adjacent" in pairs:
            raise InvalidParameterError("block pairs must be at lattice distance >= 2")
        L = params.L
        for s in range(samples):
            for k in pairs:
                (a1, a2), (b1, b2) = SYNTHETIC_PAIRS[k]
                lo = (min(a1, b1) * L - L, min(a2, b2) * L - L)
                hi = (max(a1, b1) * L + L, max(a2, b2) * L + L)
                cfg = sample_ppp(Window(lo[0], lo[1], hi[0], hi[1]), intensity,
                                 derive_seed(seed, s, sorted(SYNTHETIC_PAIRS).index(k)))
                ga, _ = site_goodness(cfg, (a1 * L, a2 * L), params)
                gb, _ = site_goodness(cfg, (b1 * L, b2 * L), params)
                marks[k][0].append(ga)
                marks[k][1].append(gb)
    else:
        lat = TiltedLattice(3, 3)
        for s in range(samples):
            f = synthetic_site_field(lat, p, mechanism, derive_seed(seed, s))
            for k in pairs:
                a, b = SYNTHETIC_PAIRS[k]
                marks[k][0].append(f.good(a))
                marks[k][1].append(f.good(b))
    pvals, degen, marg = {}, {}, {}
    for k, (a, b) in marks.items():
        pvals[k], degen[k] = independence_pvalue(a, b)
        marg[k] = (float(np.mean(a)), float(np.mean(b)))
    return DependenceReport(mechanism, pvals, alpha, degen, marg)
