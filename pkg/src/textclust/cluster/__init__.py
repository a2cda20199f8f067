"""The five clustering algorithms behind one entry point, :func:`run`."""

from .ahc import ahc_ward, cut_tree, ward_merges
from .base import (ALGORITHMS, ClusterAssignment, ClusteringError, ClusterParams,
                   FuzzyOptions, KMeansOptions, SpectralOptions)
from .fuzzy import fuzzy_cmeans, memberships
from .kmeans import kmeans, kmeans_pp_init
from .spectral import discretize, normalized_laplacian, rbf_affinity, spectral

_DISPATCH = {
    "kmeans": kmeans,
    "kmeans_pp": kmeans,
    "ahc_ward": ahc_ward,
    "fuzzy_cm": fuzzy_cmeans,
    "spectral": spectral,
}


def run(X, params: ClusterParams) -> ClusterAssignment:
    return _DISPATCH[params.algorithm](X, params)


__all__ = [
    "ALGORITHMS", "ClusterAssignment", "ClusterParams", "ClusteringError",
    "FuzzyOptions", "KMeansOptions", "SpectralOptions", "ahc_ward", "cut_tree",
    "discretize", "fuzzy_cmeans", "kmeans", "kmeans_pp_init", "memberships",
    "normalized_laplacian", "rbf_affinity", "run", "spectral", "ward_merges",
]
