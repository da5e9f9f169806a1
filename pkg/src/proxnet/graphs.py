"""Proximity networks on point configurations.

All lune-type rules (RNG, Gabriel, lune-based beta-skeletons) are computed
the same way: candidate pairs come from the Delaunay graph, which contains
every such network with region at least as large as the Gabriel disc, and a
candidate survives iff its region holds no third city.  The MST is Kruskal
over the same candidates.
"""
from __future__ import annotations

import json
import math
from itertools import chain
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.spatial import Delaunay, QhullError, cKDTree

from .errors import InvalidParameterError
from .geom import SQ_TOL, Configuration, strictly_less

KINDS = ("rng", "gabriel", "beta_skeleton", "delaunay", "mst", "robust_sub")


# --- networks --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Network:
    """Undirected geometric graph on cities ``0..n-1``.

    ``edges`` is an ``(m, 2)`` int array with ``i < j`` per row, sorted
    lexicographically; ``lengths`` holds the Euclidean length of each edge.
    """

    n: int
    edges: np.ndarray
    lengths: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)
    flags: frozenset = frozenset()
    fingerprint: str | None = None

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.intp).reshape(-1, 2)
        ln = np.asarray(self.lengths, dtype=float).reshape(-1)
        if len(e) != len(ln):
            raise InvalidParameterError("edges and lengths differ in size")
        e.setflags(write=False)
        ln.setflags(write=False)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "lengths", ln)

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set[tuple[int, int]]:
        return set(map(tuple, self.edges.tolist()))

    def total_length(self) -> float:
        return float(self.lengths.sum())

    def adjacency(self) -> csr_matrix:
        """Symmetric sparse weight matrix.  Zero-length edges are kept explicitly."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        w = np.concatenate([self.lengths, self.lengths])
        return csr_matrix((w, (rows, cols)), shape=(self.n, self.n))

    def neighbors(self) -> list[list[int]]:
        nb: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges.tolist():
            nb[i].append(j)
            nb[j].append(i)
        return nb

    def subnetwork(self, keep: np.ndarray, kind: str | None = None, **params) -> "Network":
        keep = np.asarray(keep, dtype=bool)
        return Network(self.n, self.edges[keep], self.lengths[keep], kind or self.kind,
                       {**self.params, **params}, self.flags, self.fingerprint)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params, "n": self.n,
                "flags": sorted(self.flags), "fingerprint": self.fingerprint,
                "edges": self.edges.tolist(), "lengths": self.lengths.tolist()}


def _canonical(points: np.ndarray, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    edges = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
    if len(edges) == 0:
        return np.empty((0, 2), dtype=np.intp), np.empty(0)
    edges = np.sort(edges, axis=1)
    edges = edges[edges[:, 0] != edges[:, 1]]
    n = int(edges.max()) + 1 if len(edges) else 1
    key = np.unique(edges[:, 0].astype(np.int64) * n + edges[:, 1])
    edges = np.stack([key // n, key % n], axis=1).astype(np.intp)
    d = points[edges[:, 1]] - points[edges[:, 0]]
    return edges, np.hypot(d[:, 0], d[:, 1])


def _make(config: Configuration, edges, kind: str, params=None, flags=()) -> Network:
    e, ln = _canonical(config.points, edges)
    return Network(config.n, e, ln, kind, dict(params or {}), frozenset(flags), config.fingerprint())


def write_network(net: Network, stem: str | Path) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (i,j,len) and a ``<stem>.json`` header."""
    stem = Path(stem)
    csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("i,j,len\n")
        for (i, j), ln in zip(net.edges.tolist(), net.lengths.tolist()):
            fh.write(f"{i},{j},{ln!r}\n")
    head = net.to_dict()
    del head["edges"], head["lengths"]
    head["m"] = net.m
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(head, fh, indent=2, sort_keys=True)
    return csv_path, json_path


# --- templates -------------------------------------------------------------

@dataclass(frozen=True)
class ProximityTemplate:
    """Forbidden region attached to a pair ``(p, q)``.

    ``full_lune``
        the RNG lune, ``max(d(z,p), d(z,q)) < d(p,q)``.
    ``gabriel_disc``
        the open disc on diameter ``pq``.
    ``beta_lune``
        intersection of the two open discs of radius ``beta*d/2`` centred at
        ``(1-beta/2) p + (beta/2) q`` and its mirror image.  ``beta = 1`` is
        the Gabriel disc and ``beta = 2`` the RNG lune; the region grows with
        ``beta``, so ``1 <= beta <= 2`` gives supergraphs of the RNG.
    """

    kind: str
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in ("full_lune", "gabriel_disc", "beta_lune"):
            raise InvalidParameterError(f"unknown template kind {self.kind!r}")
        if self.kind == "beta_lune":
            if self.beta is None or not math.isfinite(self.beta) or self.beta < 1:
                raise InvalidParameterError(f"beta_lune needs finite beta >= 1, got {self.beta}")
        elif self.beta is not None:
            raise InvalidParameterError(f"{self.kind} takes no beta")

    @property
    def network_kind(self) -> str:
        return {"full_lune": "rng", "gabriel_disc": "gabriel", "beta_lune": "beta_skeleton"}[self.kind]

    def lens(self, p: np.ndarray, q: np.ndarray):
        """Centres and common radius of the two discs whose intersection is the region."""
        d = np.hypot(*(q - p).T)
        if self.kind == "full_lune":
            return p, q, d
        if self.kind == "gabriel_disc":
            mid = 0.5 * (p + q)
            return mid, mid, 0.5 * d
        b = self.beta / 2.0
        return (1 - b) * p + b * q, b * p + (1 - b) * q, b * d

    def blocks(self, p: np.ndarray, q: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Row-wise: does ``z`` lie in the open region of ``(p, q)``?"""
        dzp = np.einsum("ij,ij->i", z - p, z - p)
        dzq = np.einsum("ij,ij->i", z - q, z - q)
        dpq = np.einsum("ij,ij->i", q - p, q - p)
        if self.kind == "full_lune":
            return strictly_less(np.maximum(dzp, dzq), dpq)
        if self.kind == "gabriel_disc":
            # Thales: z is inside the diameter disc iff the angle pzq is obtuse
            return strictly_less(dzp + dzq, dpq)
        c1, c2, rho = self.lens(p, q)
        far = np.maximum(np.einsum("ij,ij->i", z - c1, z - c1), np.einsum("ij,ij->i", z - c2, z - c2))
        return strictly_less(far, rho * rho)

    def reach(self, p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """A disc ``(centre, radius)`` covering the region, for spatial queries."""
        c1, c2, rho = self.lens(p, q)
        h2 = 0.25 * np.einsum("ij,ij->i", c2 - c1, c2 - c1)
        return 0.5 * (c1 + c2), np.sqrt(np.maximum(rho * rho - h2, 0.0))

    def tag(self) -> str:
        return f"beta_lune({self.beta!r})" if self.kind == "beta_lune" else self.kind


FULL_LUNE = ProximityTemplate("full_lune")
GABRIEL = ProximityTemplate("gabriel_disc")


def blocked_edges(points: np.ndarray, edges: np.ndarray, template: ProximityTemplate,
                  tree: cKDTree | None = None) -> np.ndarray:
    """For each candidate edge, whether some third point lies in its region."""
    m = len(edges)
    if m == 0 or len(points) < 3:
        return np.zeros(m, dtype=bool)
    tree = tree if tree is not None else cKDTree(points)
    p, q = points[edges[:, 0]], points[edges[:, 1]]
    centre, rad = template.reach(p, q)
    hits = tree.query_ball_point(centre, rad * (1 + 1e-9) + 1e-12)
    counts = np.fromiter(map(len, hits), dtype=np.intp, count=m)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(m, dtype=bool)
    owner = np.repeat(np.arange(m), counts)
    z = np.fromiter(chain.from_iterable(hits), dtype=np.intp, count=total)
    third = (z != edges[owner, 0]) & (z != edges[owner, 1])
    owner, z = owner[third], z[third]
    inside = template.blocks(points[edges[owner, 0]], points[edges[owner, 1]], points[z])
    out = np.zeros(m, dtype=bool)
    out[owner[inside]] = True
    return out


# --- Delaunay --------------------------------------------------------------

def _incircle(a, b, c, d):
    """Sign-carrying in-circle determinant for rows (positive: d inside abc if ccw)."""
    ad, bd, cd = a - d, b - d, c - d
    alift = np.einsum("ij,ij->i", ad, ad)
    blift = np.einsum("ij,ij->i", bd, bd)
    clift = np.einsum("ij,ij->i", cd, cd)
    t1 = alift * (bd[:, 0] * cd[:, 1] - cd[:, 0] * bd[:, 1])
    t2 = blift * (cd[:, 0] * ad[:, 1] - ad[:, 0] * cd[:, 1])
    t3 = clift * (ad[:, 0] * bd[:, 1] - bd[:, 0] * ad[:, 1])
    return t1 + t2 + t3, np.abs(t1) + np.abs(t2) + np.abs(t3)


class _Triangulation:
    """Delaunay triangulation of distinct points, with cocircular cells."""

    def __init__(self, pts: np.ndarray):
        self.pts = pts
        self.collinear = False
        self.simplices = np.empty((0, 3), dtype=np.intp)
        self.cocircular = False
        n = len(pts)
        if n < 3:
            return
        try:
            tri = Delaunay(pts)
        except QhullError:
            self.collinear = True
            return
        self.simplices = tri.simplices.astype(np.intp)
        self.neighbors = tri.neighbors

    def path_edges(self) -> np.ndarray:
        """Collinear fallback: consecutive points along the line."""
        pts = self.pts
        if len(pts) < 2:
            return np.empty((0, 2), dtype=np.intp)
        lo = np.lexsort((pts[:, 1], pts[:, 0]))[0]
        far = np.argmax(np.einsum("ij,ij->i", pts - pts[lo], pts - pts[lo]))
        direction = pts[far] - pts[lo]
        t = (pts - pts[lo]) @ direction
        order = np.lexsort((pts[:, 1], pts[:, 0], t))
        return np.stack([order[:-1], order[1:]], axis=1)

    def triangle_edges(self) -> np.ndarray:
        if self.collinear or len(self.simplices) == 0:
            return self.path_edges()
        s = self.simplices
        return np.concatenate([s[:, [0, 1]], s[:, [1, 2]], s[:, [0, 2]]])

    def graph_edges(self) -> np.ndarray:
        """Triangle edges plus every chord of each cocircular cell.

        When four or more points share an empty circumcircle the triangulation
        picks one diagonal arbitrarily; the Delaunay graph has them all.
        """
        base = self.triangle_edges()
        if self.collinear or len(self.simplices) == 0:
            return base
        s, nb, pts = self.simplices, self.neighbors, self.pts
        t_idx, k = np.nonzero(nb >= 0)
        u = nb[t_idx, k]
        keep = t_idx < u
        t_idx, k, u = t_idx[keep], k[keep], u[keep]
        if len(t_idx) == 0:
            return base
        # vertex of u not shared with t
        su = s[u]
        st = s[t_idx]
        shared = (su[:, :, None] == st[:, None, :]).any(axis=2)
        opp = su[np.arange(len(u)), np.argmax(~shared, axis=1)]
        det, scale = _incircle(pts[st[:, 0]], pts[st[:, 1]], pts[st[:, 2]], pts[opp])
        cocirc = np.abs(det) <= 1e-9 * scale
        if not cocirc.any():
            return base
        self.cocircular = True
        parent = list(range(len(s)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for a, b in zip(t_idx[cocirc].tolist(), u[cocirc].tolist()):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        cells: dict[int, set] = {}
        for t in set(t_idx[cocirc].tolist()) | set(u[cocirc].tolist()):
            cells.setdefault(find(t), set()).update(s[t].tolist())
        extra = [(a, b) for verts in cells.values() for a in verts for b in verts if a < b]
        return np.concatenate([base, np.asarray(extra, dtype=np.intp).reshape(-1, 2)])


def _dedup(points: np.ndarray):
    """Unique points (first-occurrence order) and the map back to original indices."""
    n = len(points)
    if n == 0:
        return points, np.empty(0, dtype=np.intp), []
    order = np.lexsort((points[:, 1], points[:, 0]))
    srt = points[order]
    if not (srt[1:] == srt[:-1]).all(axis=1).any():
        return points, np.arange(n), [[i] for i in range(n)]
    uniq, first, inverse = np.unique(points, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    inverse = rank[inverse]
    copies: list[list[int]] = [[] for _ in range(len(uniq))]
    for idx, u in enumerate(inverse.tolist()):
        copies[u].append(idx)
    return points[first[order]], inverse, copies


def _expand(edges_u: np.ndarray, copies: list[list[int]]) -> np.ndarray:
    """Lift edges on unique points to all duplicate copies, joining copies pairwise."""
    if all(len(c) == 1 for c in copies):
        rep = np.array([c[0] for c in copies], dtype=np.intp)
        return rep[edges_u] if len(edges_u) else edges_u
    out = []
    for a, b in edges_u.tolist():
        out.extend((i, j) for i in copies[a] for j in copies[b])
    for c in copies:
        out.extend((i, j) for x, i in enumerate(c) for j in c[x + 1:])
    return np.asarray(out, dtype=np.intp).reshape(-1, 2)


def _candidates(config: Configuration):
    uniq, _, copies = _dedup(config.points)
    tri = _Triangulation(uniq)
    flags = set()
    if tri.collinear:
        flags.add("collinear")
    if len(uniq) < config.n:
        flags.add("duplicates")
    return tri, copies, flags


def delaunay_candidates(config: Configuration) -> np.ndarray:
    """The Delaunay graph (all cocircular chords included), on original indices."""
    tri, copies, _ = _candidates(config)
    return _canonical(config.points, _expand(tri.graph_edges(), copies))[0]


def build_delaunay(config: Configuration) -> Network:
    """Delaunay triangulation.

    Exactly cocircular groups get whichever diagonal Qhull chooses.  When all
    cities are collinear the result is the path along the line, flagged
    ``collinear``.
    """
    tri, copies, flags = _candidates(config)
    edges = _expand(tri.triangle_edges(), copies)
    return _make(config, edges, "delaunay", flags=flags)


def build_proximity(config: Configuration, template: ProximityTemplate) -> Network:
    if not isinstance(template, ProximityTemplate):
        raise InvalidParameterError("template must be a ProximityTemplate")
    tri, copies, flags = _candidates(config)
    cand = _canonical(config.points, _expand(tri.graph_edges(), copies))[0]
    keep = ~blocked_edges(config.points, cand, template)
    params = {"beta": template.beta} if template.kind == "beta_lune" else {}
    return _make(config, cand[keep], template.network_kind, params, flags)


def build_rng(config: Configuration) -> Network:
    """Relative neighbourhood graph: pairs whose open lune holds no other city."""
    return build_proximity(config, FULL_LUNE)


def build_gabriel(config: Configuration) -> Network:
    return build_proximity(config, GABRIEL)


# --- union-find, MST, components ------------------------------------------

class UnionFind:
    """Disjoint sets over ``0..n-1`` with union by size and path halving."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.count -= 1
        return True


def kruskal(n: int, edges: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Indices of the minimum spanning forest edges, ties broken by ``(len, i, j)``."""
    order = np.lexsort((edges[:, 1], edges[:, 0], lengths))
    uf = UnionFind(n)
    chosen = []
    for k in order.tolist():
        i, j = edges[k]
        if uf.union(int(i), int(j)):
            chosen.append(k)
            if uf.count == 1:
                break
    return np.asarray(chosen, dtype=np.intp)


def build_mst(config: Configuration) -> Network:
    """Euclidean minimum spanning tree, searched over the Delaunay graph."""
    if config.n < 1:
        raise InvalidParameterError("MST needs at least one city")
    tri, copies, flags = _candidates(config)
    cand, lens = _canonical(config.points, _expand(tri.graph_edges(), copies))
    chosen = kruskal(config.n, cand, lens)
    return _make(config, cand[chosen], "mst", flags=flags)


class Partition:
    """Connected components, each labelled by its smallest member."""

    def __init__(self, labels: np.ndarray):
        self.labels = np.asarray(labels, dtype=np.intp)
        uniq, counts = np.unique(self.labels, return_counts=True)
        self.roots = uniq
        self.sizes = counts

    def __len__(self) -> int:
        return len(self.roots)

    @property
    def groups(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == r) for r in self.roots]

    def largest(self) -> int:
        """Label of the largest component; equal sizes go to the smallest label."""
        if len(self.roots) == 0:
            return -1
        return int(self.roots[np.argmax(self.sizes)])

    def largest_size(self) -> int:
        return int(self.sizes.max()) if len(self.sizes) else 0

    def same(self, i: int, j: int) -> bool:
        return self.labels[i] == self.labels[j]


def components(net: Network) -> Partition:
    uf = UnionFind(net.n)
    for i, j in net.edges.tolist():
        uf.union(i, j)
    roots = np.fromiter((uf.find(i) for i in range(net.n)), dtype=np.intp, count=net.n)
    # relabel each root by the smallest member of its set
    smallest = np.full(net.n, net.n, dtype=np.intp)
    np.minimum.at(smallest, roots, np.arange(net.n))
    return Partition(smallest[roots] if net.n else roots)


def is_subgraph(a: Network, b: Network) -> bool:
    if a.n != b.n:
        raise InvalidParameterError(f"networks on different city counts ({a.n} vs {b.n})")
    if a.m == 0:
        return True
    ka = a.edges[:, 0].astype(np.int64) * a.n + a.edges[:, 1]
    kb = b.edges[:, 0].astype(np.int64) * b.n + b.edges[:, 1]
    return bool(np.isin(ka, kb).all())


def build_network(config: Configuration, kind: str, beta: float | None = None) -> Network:
    """Dispatch on a network tag: ``rng``, ``gabriel``, ``beta_skeleton``, ``delaunay``, ``mst``."""
    if kind == "rng":
        return build_rng(config)
    if kind == "gabriel":
        return build_gabriel(config)
    if kind == "beta_skeleton":
        return build_proximity(config, ProximityTemplate("beta_lune", beta))
    if kind == "delaunay":
        return build_delaunay(config)
    if kind == "mst":
        return build_mst(config)
    raise InvalidParameterError(f"unknown network kind {kind!r}; expected one of rng, gabriel, "
                                "beta_skeleton, delaunay, mst")


__all__ = [
    "Network", "ProximityTemplate", "FULL_LUNE", "GABRIEL", "SQ_TOL", "build_rng",
    "build_gabriel", "build_proximity", "build_delaunay", "build_mst", "build_network",
    "components", "is_subgraph", "Partition", "UnionFind", "kruskal", "delaunay_candidates",
    "blocked_edges", "write_network",
]
