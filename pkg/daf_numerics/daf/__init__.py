# daf/__init__.py

from .tau_field import TauField, center_displacement, recover_tau, tau_floor_check
from .center_probes import (
    qi_check,
    topological_anosov_probe,
    coherence_saturation_check,
    uniform_compactness_check,
    leaf_length_bound,
)
from .plaque_expansivity import PseudoOrbitPair, plaque_expansivity_test
from .integrability import unique_integrability_probe
from .compact_leaf import boundary_index, find_compact_periodic_center_leaf, winding_number
