"""Computational toolkit for the amenability hierarchy on bounded-degree
graphs: Folner sets and functions, separator measures and Property A
witnesses, Folner tilings, and Laplacian spectral convergence tests.
"""

from .graphs import (
    BallSignature,
    Graph,
    GraphFormatError,
    MarginError,
    RootedBall,
    SizeCapError,
    Window,
    ball,
    canonical_signature,
    dump_graph,
    induced_subgraph,
    load_graph,
    vertex_boundary,
    vset,
)
from .folner import (
    AdmissibilityError,
    BudgetExceededError,
    ExtractionError,
    ExtractionTrace,
    FolnerFunction,
    extract_folner_from_function,
    extraction_delta_enclosure,
    folner_quality,
    function_defect,
    grow_folner,
    is_folner,
    min_folner_in_ball,
)

__version__ = "0.1.0"
