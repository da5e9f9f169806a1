"""Proximity networks on Poisson cities: robust subnetworks, route lengths, block percolation."""

__version__ = "0.1.0"

from .errors import InvalidParameterError, InvariantViolation, UnreachableError, WorkCapExceeded  # noqa: E402
from .geom import (Configuration, Lune, Point, Window, configuration, lune_contains,  # noqa: E402
                   lune_inside_window, plant, sample_ppp)
from .graphs import (Network, ProximityTemplate, build_delaunay, build_mst, build_network,  # noqa: E402
                     build_proximity, build_rng, components, is_subgraph)

__all__ = [
    "InvalidParameterError", "InvariantViolation", "UnreachableError", "WorkCapExceeded",
    "Configuration", "Lune", "Point", "Window", "configuration", "lune_contains",
    "lune_inside_window", "plant", "sample_ppp", "Network", "ProximityTemplate",
    "build_delaunay", "build_mst", "build_network", "build_proximity", "build_rng",
    "components", "is_subgraph",
]
