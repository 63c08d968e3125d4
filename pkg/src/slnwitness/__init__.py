"""Witness detection of steering of latent optical nonclassicality.

Alice measures one mode of a phase-randomized two-mode squeezed vacuum with a
displaced on-off detector at two LO amplitudes; Bob counts clicks on a
two-detector array.  The package models the click statistics, searches for
violations of the local-hidden-classical-states model, quantifies them in
units of the statistical error and simulates finite data.
"""

from .cases import CASES, ReferenceCase, get_case
from .errors import (
    ConditioningError,
    ConsistencyError,
    DomainError,
    InfeasibleRegionError,
    SLNError,
    TailBoundError,
    UnphysicalVectorError,
)
from .geometry import (
    STRATEGIES,
    Strategy,
    reconstruct_full,
    reduce_to_independent,
    vertex,
    vertex_grid,
)
from .optimizer import OptimizationResult, SearchConfig, optimize
from .physics import (
    ARRAY,
    SINGLE,
    ExperimentParams,
    JointTable,
    classicality_margin,
    conditional_dist,
    fock_oracle_table,
    gamma_min,
    joint_table,
)
from .stats import Events, estimate, lambda_decompose, simulate
from .witness import Verdict, ViolationReport, evaluate, find_witness, rhs_sup

__version__ = "0.1.0"
