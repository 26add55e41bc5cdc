"""Self-improving maxima and upper hulls over product distributions.

A learning phase looks at a few instances drawn from a product distribution
and builds search structures; the limiting phase then uses them to compute
the maxima or the upper hull of fresh instances, each with a checkable
certificate.
"""

from .bucket_heap import BucketHeap
from .certificates import (CCertificate, HullCertificate, MaximaCertificate, SLabel,
                           verify_c_certificate, verify_hull_certificate, verify_maxima_certificate)
from .distributions import FAMILIES, ProductDistribution, make_family
from .errors import (ContractViolation, DegenerateInputError, InvalidHandleError,
                     InvalidInputError, StaleStructuresError)
from .geometry import (OpCounter, Point, maxima_sweep, orientation, upper_hull_monotone,
                       upper_hull_output_sensitive)
from .hull import HullStructures, c_certificate, fallback_hull, learn_hull_structures, run_hull
from .hull_learning import CanonicalHull, HullParams, learn_canonical_hull
from .maxima import MaximaStructures, RunMetrics, learn_maxima_structures, run_maxima
from .search_trees import LearningConstants, SearchTree, build_tree
from .slabs import SlabStructure, build_slab_structure

__all__ = [
    "BucketHeap", "CCertificate", "HullCertificate", "MaximaCertificate", "SLabel",
    "verify_c_certificate", "verify_hull_certificate", "verify_maxima_certificate",
    "FAMILIES", "ProductDistribution", "make_family", "ContractViolation",
    "DegenerateInputError", "InvalidHandleError", "InvalidInputError", "StaleStructuresError",
    "OpCounter", "Point", "maxima_sweep", "orientation", "upper_hull_monotone",
    "upper_hull_output_sensitive", "HullStructures", "c_certificate", "fallback_hull",
    "learn_hull_structures", "run_hull", "CanonicalHull", "HullParams", "learn_canonical_hull",
    "MaximaStructures", "RunMetrics", "learn_maxima_structures", "run_maxima",
    "LearningConstants", "SearchTree", "build_tree", "SlabStructure", "build_slab_structure",
]
