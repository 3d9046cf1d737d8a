"""orbitlab: multi-particle orbit distance arrays for coupled dynamical systems.

Sample distance arrays from joinings of compact metric systems, estimate
Wasserstein gaps between array laws against closed-form oracles, and compute
twin-free quotients of finite marked colored kernel spaces.
"""

from .arrays import (
    ArraySample,
    ArraySpec,
    EmpiricalLaw,
    Observable,
    ProjectedLaw,
    anchored_pair,
    empirical_law,
    obs_avg_distance,
    obs_mismatch,
    pair_00,
    project,
    sample_array,
    sample_observable,
    test_functions,
)
from .joinings import (
    convex_mixture,
    diagonal_joining,
    graph_joining_rotation,
    product_joining,
    relindep_joining,
)
from .systems import (
    bernoulli_shift,
    circle_rotation,
    cyclic_rotation,
    doubling_map,
    markov_shift,
    product_system,
)
from .transport import (
    DepEstimate,
    GapEstimate,
    certificate_search,
    dep_lower_bound,
    kr_gap,
    w1_1d,
    wp_assignment,
)

__version__ = "0.1.0"

__all__ = [
    "ArraySample", "ArraySpec", "EmpiricalLaw", "Observable", "ProjectedLaw",
    "anchored_pair", "empirical_law", "obs_avg_distance", "obs_mismatch",
    "pair_00", "project", "sample_array", "sample_observable", "test_functions",
    "convex_mixture", "diagonal_joining", "graph_joining_rotation",
    "product_joining", "relindep_joining",
    "bernoulli_shift", "circle_rotation", "cyclic_rotation", "doubling_map",
    "markov_shift", "product_system",
    "DepEstimate", "GapEstimate", "certificate_search", "dep_lower_bound",
    "kr_gap", "w1_1d", "wp_assignment",
    "__version__",
]
