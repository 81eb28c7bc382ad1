"""Vector and box embeddings for compositional item-attribute queries."""

from .boxgeom import BoxTensor, GumbelParams
from .boxmodel import BoxModel
from .core import (EntityCatalog, HierarchyEdges, Literal, ObservationMatrix, Query,
                   expand_with_hierarchy, format_query, ground_truth_match, parse_query, rho)
from .training import HyperGrid, TrainConfig, fit, random_search
from .vecmodel import VectorModel

__version__ = "0.1.0"
