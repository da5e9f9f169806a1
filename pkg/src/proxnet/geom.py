"""Point configurations, sampling windows and lune geometry.

Every network rule in the package reduces to "is some region empty of
cities", and the regions are all lenses: the intersection of two open discs
of equal radius.  The RNG lune, the Gabriel disc and the lune-based
beta-skeleton regions differ only in where the two centres sit.  This module
owns those predicates and the single tolerance policy they share.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidParameterError

# Absolute slack on squared-distance comparisons.  Builders, oracles and the
# robust certificate all go through `strictly_less`, so they agree on ties.
SQ_TOL = 1e-12


def strictly_less(a, b):
    """``a < b`` for squared distances, with ties inside SQ_TOL counted as equal."""
    return a < b - SQ_TOL


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidParameterError(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y


def _xy(p) -> tuple[float, float]:
    if isinstance(p, Point):
        return p.x, p.y
    x, y = p
    return float(x), float(y)


@dataclass(frozen=True)
class Window:
    """Closed axis-aligned rectangle ``[x0, x1] x [y0, y1]``."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        vals = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameterError(f"non-finite window bounds {vals}")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise InvalidParameterError(f"degenerate window {vals}")

    @classmethod
    def square(cls, side: float, origin: tuple[float, float] = (0.0, 0.0)) -> "Window":
        ox, oy = origin
        return cls(ox, oy, ox + side, oy + side)

    @classmethod
    def centered(cls, center, side: float) -> "Window":
        cx, cy = _xy(center)
        h = side / 2.0
        return cls(cx - h, cy - h, cx + h, cy + h)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def expanded(self, margin: float) -> "Window":
        return Window(self.x0 - margin, self.y0 - margin, self.x1 + margin, self.y1 + margin)

    def contains(self, pts, closed: bool = True) -> np.ndarray:
        """Vectorised membership test for an ``(n, 2)`` array."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        x, y = pts[:, 0], pts[:, 1]
        if closed:
            return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)
        return (x > self.x0) & (x < self.x1) & (y > self.y0) & (y < self.y1)

    def contains_window(self, other: "Window") -> bool:
        return (other.x0 >= self.x0 and other.x1 <= self.x1
                and other.y0 >= self.y0 and other.y1 <= self.y1)

    def boundary_distance(self, pts) -> np.ndarray:
        """Distance from each point to the window boundary."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return np.minimum.reduce([pts[:, 0] - self.x0, self.x1 - pts[:, 0],
                                  pts[:, 1] - self.y0, self.y1 - pts[:, 1]])

    def to_dict(self) -> dict:
        return {"x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1}


@dataclass(frozen=True, eq=False)
class Configuration:
    """A finite multiset of cities in a window.

    ``points`` is a read-only ``(n, 2)`` float array; row ``i`` is city ``i``
    for the lifetime of the configuration.
    """

    points: np.ndarray
    window: Window
    seed: int | None = None
    intensity: float = 0.0
    _fingerprint: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise InvalidParameterError("configuration has non-finite coordinates")
        w = self.window
        tol = 1e-9 * max(1.0, abs(w.x0), abs(w.x1), abs(w.y0), abs(w.y1))
        if len(pts) and not np.all(w.expanded(tol).contains(pts)):
            raise InvalidParameterError("configuration has points outside its window")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def n(self) -> int:
        return len(self.points)

    def point(self, i: int) -> Point:
        x, y = self.points[i]
        return Point(float(x), float(y))

    @property
    def has_duplicates(self) -> bool:
        if self.n < 2:
            return False
        return len(np.unique(self.points, axis=0)) < self.n

    def fingerprint(self) -> str:
        """SHA-256 of the little-endian float64 coordinate buffer."""
        if not self._fingerprint:
            buf = np.ascontiguousarray(self.points, dtype="<f8").tobytes()
            self._fingerprint.append(hashlib.sha256(buf).hexdigest())
        return self._fingerprint[0]

    def restrict(self, window: Window, closed: bool = True) -> tuple["Configuration", np.ndarray]:
        """Cities inside ``window``, plus their indices in this configuration."""
        idx = np.flatnonzero(window.contains(self.points, closed=closed))
        return Configuration(self.points[idx], window, self.seed, self.intensity), idx

    def to_dict(self, include_points: bool = True) -> dict:
        d = {"window": self.window.to_dict(), "intensity": self.intensity,
             "seed": self.seed, "n": self.n, "fingerprint": self.fingerprint()}
        if include_points:
            d["points"] = self.points.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Configuration":
        w = d["window"]
        return cls(np.asarray(d.get("points", []), dtype=float).reshape(-1, 2),
                   Window(w["x0"], w["y0"], w["x1"], w["y1"]),
                   d.get("seed"), float(d.get("intensity", 0.0)))


def configuration(points: Iterable, window: Window | None = None, **kw) -> Configuration:
    """Deterministic configuration; the window defaults to the unit-padded bounding box."""
    pts = np.array([_xy(p) for p in points], dtype=float).reshape(-1, 2)
    if window is None:
        if len(pts):
            lo, hi = pts.min(axis=0) - 1.0, pts.max(axis=0) + 1.0
            window = Window(lo[0], lo[1], hi[0], hi[1])
        else:
            window = Window(0.0, 0.0, 1.0, 1.0)
    return Configuration(pts, window, **kw)


def sample_ppp(window: Window, intensity: float, seed: int) -> Configuration:
    """Homogeneous Poisson process of the given intensity on ``window``.

    The output is a pure function of ``(window, intensity, seed)``.
    """
    if not isinstance(window, Window):
        raise InvalidParameterError("window must be a Window")
    if not math.isfinite(intensity) or intensity < 0:
        raise InvalidParameterError(f"intensity must be finite and >= 0, got {intensity}")
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(intensity * window.area))
    pts = rng.uniform((window.x0, window.y0), (window.x1, window.y1), size=(n, 2))
    return Configuration(pts, window, seed, float(intensity))


class Planted(NamedTuple):
    config: Configuration
    indices: np.ndarray
    degenerate: bool


def plant(config: Configuration, extra: Sequence) -> Planted:
    """Append ``extra`` cities, keeping existing indices.

    ``degenerate`` is set when a planted city coincides with another city.
    """
    ext = np.array([_xy(p) for p in extra], dtype=float).reshape(-1, 2)
    if len(ext) == 0:
        return Planted(config, np.empty(0, dtype=np.intp), False)
    pts = np.vstack([config.points, ext])
    new = Configuration(pts, config.window, config.seed, config.intensity)
    idx = np.arange(config.n, new.n, dtype=np.intp)
    degenerate = bool(len(np.unique(pts, axis=0)) < len(np.unique(config.points, axis=0)) + len(ext))
    return Planted(new, idx, degenerate)


@dataclass(frozen=True)
class Lune:
    """The open lune of a pair: points closer than d(p, q) to both p and q."""

    p: Point
    q: Point

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidParameterError("lune of coincident points")

    @property
    def radius(self) -> float:
        return math.hypot(self.q.x - self.p.x, self.q.y - self.p.y)


def lune_contains(lune: Lune, z) -> bool:
    px, py = _xy(lune.p)
    qx, qy = _xy(lune.q)
    zx, zy = _xy(z)
    d2 = (qx - px) ** 2 + (qy - py) ** 2
    far = max((zx - px) ** 2 + (zy - py) ** 2, (zx - qx) ** 2 + (zy - qy) ** 2)
    return bool(strictly_less(far, d2))


def _lens_candidates(c1, c2, rho):
    """Candidate extreme points of lenses ``disc(c1, rho) & disc(c2, rho)``.

    A lens boundary is two circular arcs meeting at two corners, so each axis
    extreme is either a corner or the axis-extreme point of one circle lying
    on its own arc (inside the other disc).  Returns points ``(m, 10, 2)`` and
    a validity mask ``(m, 10)``.
    """
    c1 = np.asarray(c1, dtype=float).reshape(-1, 2)
    c2 = np.asarray(c2, dtype=float).reshape(-1, 2)
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (len(c1),))
    mid = 0.5 * (c1 + c2)
    half = 0.5 * (c2 - c1)
    h2 = np.einsum("ij,ij->i", half, half)
    hn = np.sqrt(h2)
    t = np.sqrt(np.maximum(rho * rho - h2, 0.0))
    safe = np.where(hn > 0, hn, 1.0)
    perp = np.stack([-half[:, 1] / safe, half[:, 0] / safe], axis=1)
    perp[hn == 0] = 0.0
    pts = [mid + t[:, None] * perp, mid - t[:, None] * perp]
    ok = [np.ones(len(c1), dtype=bool)] * 2
    r2 = rho * rho
    for a, b in ((c1, c2), (c2, c1)):
        for axis in (0, 1):
            for sign in (-1.0, 1.0):
                ext = a.copy()
                ext[:, axis] += sign * rho
                pts.append(ext)
                ok.append(np.einsum("ij,ij->i", ext - b, ext - b) <= r2 + SQ_TOL)
    return np.stack(pts, axis=1), np.stack(ok, axis=1)


def lens_bounds(c1, c2, rho) -> np.ndarray:
    """Bounding boxes ``(m, 4)`` = ``xmin, ymin, xmax, ymax`` of lenses, vectorised over rows."""
    pts, ok = _lens_candidates(c1, c2, rho)
    x = np.where(ok, pts[:, :, 0], np.nan)
    y = np.where(ok, pts[:, :, 1], np.nan)
    return np.stack([np.nanmin(x, 1), np.nanmin(y, 1), np.nanmax(x, 1), np.nanmax(y, 1)], axis=1)


def lens_extremes(c1, c2, rho) -> np.ndarray:
    """Lens points attaining ``xmin, ymin, xmax, ymax``, shape ``(m, 4, 2)``."""
    pts, ok = _lens_candidates(c1, c2, rho)
    x = np.where(ok, pts[:, :, 0], np.nan)
    y = np.where(ok, pts[:, :, 1], np.nan)
    picks = [np.nanargmin(x, 1), np.nanargmin(y, 1), np.nanargmax(x, 1), np.nanargmax(y, 1)]
    rows = np.arange(len(pts))
    return np.stack([pts[rows, k] for k in picks], axis=1)


def lenses_inside_window(c1, c2, rho, window: Window) -> np.ndarray:
    """True where the open lens has no point outside the closed window."""
    b = lens_bounds(c1, c2, rho)
    return ((b[:, 0] >= window.x0) & (b[:, 1] >= window.y0)
            & (b[:, 2] <= window.x1) & (b[:, 3] <= window.y1))


def lune_inside_window(lune: Lune, window: Window) -> bool:
    p = np.array([_xy(lune.p)])
    q = np.array([_xy(lune.q)])
    # the RNG lune is the lens of the discs of radius d(p, q) centred at p and q
    return bool(lenses_inside_window(p, q, lune.radius, window)[0])


# --- serialisation ---------------------------------------------------------

def write_config(config: Configuration, stem: str | Path) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (index,x,y) and ``<stem>.json`` (envelope)."""
    stem = Path(stem)
    csv_path = stem.with_suffix(".csv")
    json_path = stem.with_suffix(".json")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("index,x,y\n")
        for i, (x, y) in enumerate(config.points):
            fh.write(f"{i},{float(x)!r},{float(y)!r}\n")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(include_points=False), fh, indent=2, sort_keys=True)
    return csv_path, json_path


def read_config(stem: str | Path) -> Configuration:
    stem = Path(stem)
    with open(stem.with_suffix(".json"), encoding="utf-8") as fh:
        env = json.load(fh)
    rows = np.loadtxt(stem.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    pts = rows[np.argsort(rows[:, 0]), 1:3] if len(rows) else np.empty((0, 2))
    env["points"] = pts
    return Configuration.from_dict(env)
