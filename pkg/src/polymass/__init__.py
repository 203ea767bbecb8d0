"""ADM mass of asymptotically flat metrics from large Euclidean polyhedra."""

__version__ = "0.1.0"
