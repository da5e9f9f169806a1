"""Boundary-robust subnetworks and the essential-connectedness statistic.

For a lune-type rule the edge ``(x, y)`` between two cities of a window is
present for every configuration outside the window exactly when its region
holds no window city and lies inside the closed window: if any part of the
open region pokes outside, that part is open and a single outside city
placed there removes the edge.  ``robust_subnetwork`` applies that
certificate; ``adversarial_soundness_check`` tries to break it by brute
force.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from .errors import InvalidParameterError
from .experiment import ExperimentResult, derive_seed, mean_se, pmap
from .geom import Configuration, Window, lens_extremes, lenses_inside_window, sample_ppp
from .graphs import (FULL_LUNE, Network, Partition, ProximityTemplate, build_proximity,
                     components)


@dataclass(frozen=True)
class RobustRule:
    """Network rule with a sound local certificate: ``rng`` or a proximity template."""

    kind: str = "rng"
    template: ProximityTemplate = FULL_LUNE

    def __post_init__(self):
        if self.kind == "rng":
            object.__setattr__(self, "template", FULL_LUNE)
        elif self.kind != "proximity":
            raise InvalidParameterError(
                f"no robust certificate for rule {self.kind!r}; supported: rng, proximity "
                "(MST and Delaunay have no local certificate)")

    @classmethod
    def parse(cls, spec) -> "RobustRule":
        """``"rng"``, ``"gabriel"``, ``"beta:1.5"``, a template, or a rule."""
        if isinstance(spec, RobustRule):
            return spec
        if isinstance(spec, ProximityTemplate):
            return cls("proximity", spec)
        if spec == "rng":
            return cls("rng")
        if spec == "gabriel":
            return cls("proximity", ProximityTemplate("gabriel_disc"))
        if isinstance(spec, str) and spec.startswith("beta:"):
            return cls("proximity", ProximityTemplate("beta_lune", float(spec[5:])))
        return cls(str(spec))

    @property
    def name(self) -> str:
        return "rng" if self.kind == "rng" else self.template.tag()


@dataclass(frozen=True, eq=False)
class RobustReport:
    window: Window
    net: Network
    n_cities: int
    largest_component_size: int
    n0: int
    components: Partition

    @property
    def connected(self) -> bool:
        return len(self.components) <= 1


def region_inside(points: np.ndarray, edges: np.ndarray, template: ProximityTemplate,
                  window: Window) -> np.ndarray:
    if len(edges) == 0:
        return np.zeros(0, dtype=bool)
    c1, c2, rho = template.lens(points[edges[:, 0]], points[edges[:, 1]])
    return lenses_inside_window(c1, c2, rho, window)


def robust_subnetwork(config: Configuration, rule="rng", window: Window | None = None) -> RobustReport:
    """G_L for the cities of ``config`` in ``window`` (default: the configuration window).

    Every city must lie in ``window``.
    """
    rule = RobustRule.parse(rule)
    window = window or config.window
    if config.n and not window.contains(config.points).all():
        raise InvalidParameterError("robust_subnetwork needs every city inside the window")
    full = build_proximity(config, rule.template)
    keep = region_inside(config.points, full.edges, rule.template, window)
    net = full.subnetwork(keep, kind="robust_sub", rule=rule.name)
    parts = components(net)
    big = parts.largest_size()
    return RobustReport(window, net, config.n, big, config.n - big, parts)


# --- adversarial check -----------------------------------------------------

def _targeted_adversaries(points, edges, template, window: Window) -> np.ndarray:
    """Outside cities hugging each edge region where it comes closest to each side."""
    if len(edges) == 0:
        return np.empty((0, 2))
    c1, c2, rho = template.lens(points[edges[:, 0]], points[edges[:, 1]])
    ext = lens_extremes(c1, c2, rho)
    eps = 1e-9 * max(1.0, window.width, window.height)
    out = []
    for side, (axis, bound, sign) in enumerate(((0, window.x0, -1), (1, window.y0, -1),
                                                (0, window.x1, 1), (1, window.y1, 1))):
        pts = ext[:, side].copy()
        pts[:, axis] = bound + sign * eps
        other = 1 - axis
        lo, hi = (window.y0, window.y1) if other == 1 else (window.x0, window.x1)
        pts[:, other] = np.clip(pts[:, other], lo - eps, hi + eps)
        out.append(pts)
    w = window
    out.append(np.array([[w.x0 - eps, w.y0 - eps], [w.x1 + eps, w.y0 - eps],
                         [w.x0 - eps, w.y1 + eps], [w.x1 + eps, w.y1 + eps]]))
    return np.unique(np.concatenate(out), axis=0)


def _survives(config: Configuration, report: RobustReport, rule: RobustRule, extra: np.ndarray,
              outer: Window) -> bool:
    if len(extra) == 0 or report.net.m == 0:
        return True
    pts = np.vstack([config.points, extra])
    big = Configuration(pts, outer)
    rebuilt = build_proximity(big, rule.template)
    n = pts.shape[0]
    want = report.net.edges[:, 0].astype(np.int64) * n + report.net.edges[:, 1]
    have = rebuilt.edges[:, 0].astype(np.int64) * n + rebuilt.edges[:, 1]
    return bool(np.isin(want, have).all())


def adversarial_soundness_check(config: Configuration, rule="rng", trials: int = 50,
                                seed: int = 0, ring: float | None = None,
                                intensity: float | None = None) -> bool:
    """Try to delete G_L edges by adding cities outside the window.

    Runs one rebuild with targeted cities just outside the window next to
    every edge region, then ``trials`` rebuilds with random Poisson cities in
    a ring around the window.  Returns ``True`` iff every G_L edge survives.
    """
    rule = RobustRule.parse(rule)
    report = robust_subnetwork(config, rule)
    if report.net.m == 0:
        return True
    w = config.window
    targeted = _targeted_adversaries(config.points, report.net.edges, rule.template, w)
    lo = targeted.min(axis=0)
    hi = targeted.max(axis=0)
    ring = ring if ring is not None else max(1.0, 2.0 * float(report.net.lengths.max()))
    outer = Window(min(lo[0], w.x0 - ring) - 1, min(lo[1], w.y0 - ring) - 1,
                   max(hi[0], w.x1 + ring) + 1, max(hi[1], w.y1 + ring) + 1)
    if not _survives(config, report, rule, targeted, outer):
        return False
    rate = intensity if intensity is not None else max(config.intensity, 1.0)
    for t in range(trials):
        rng = np.random.default_rng(derive_seed(seed, t))
        # random rate per trial so sparse and crowded outsides both get tried
        cloud = sample_ppp(outer, rate * float(rng.uniform(0.25, 4.0)), int(rng.integers(2**63)))
        outside = cloud.points[~w.contains(cloud.points)]
        if not _survives(config, report, rule, outside, outer):
            return False
    return True


# --- AC sweep --------------------------------------------------------------

AC_COLUMNS = ["rule", "L", "replicate", "seed", "n_cities", "n0", "n0_over_L2"]


def _ac_cell(task, rule: RobustRule, intensity: float):
    L, rep, s = task
    config = sample_ppp(Window.square(L), intensity, s)
    rep_ = robust_subnetwork(config, rule)
    return {"rule": rule.name, "L": L, "replicate": rep, "seed": s, "n_cities": rep_.n_cities,
            "n0": rep_.n0, "n0_over_L2": rep_.n0 / (L * L)}


def ac_sweep(rule, Ls, replicates: int, seed: int, intensity: float = 1.0,
             workers: int = 1) -> ExperimentResult:
    """Monte Carlo of ``N0_L / L^2`` over window sides ``Ls``.

    Replicate ``r`` at the ``k``-th side uses seed ``derive_seed(seed, k, r)``.
    """
    rule = RobustRule.parse(rule)
    Ls = [float(L) for L in Ls]
    if not Ls or any(L <= 0 for L in Ls) or any(b <= a for a, b in zip(Ls, Ls[1:])):
        raise InvalidParameterError("Ls must be positive and increasing")
    if replicates < 1:
        raise InvalidParameterError("replicates must be >= 1")
    tasks = [(L, r, derive_seed(seed, k, r)) for k, L in enumerate(Ls) for r in range(replicates)]
    rows = pmap(partial(_ac_cell, rule=rule, intensity=intensity), tasks, workers)
    per_L = []
    for L in Ls:
        vals = [r["n0_over_L2"] for r in rows if r["L"] == L]
        m, se = mean_se(vals)
        per_L.append({"L": L, "mean": m, "stderr": se, "replicates": len(vals)})
    means = [p["mean"] for p in per_L]
    summary = {"rule": rule.name, "intensity": intensity, "per_L": per_L,
               "decreasing": all(b < a for a, b in zip(means, means[1:]))}
    return ExperimentResult("ac_sweep", AC_COLUMNS, rows, summary)

