"""Submodular multiway partition: relaxations, rounding and gap instances."""
from .core import (ExplicitTable, GridPartition, GroundSet, HypergraphCutCount, SubmodularOracle,
                   SymmetricGamma, WeightedCoverage, check_submodular, evaluate, lovasz_extension,
                   multilinear_extension, oracle_from_dict)
from .errors import (CapacityError, DomainError, InfeasibleError, MultiwayError, NumericError,
                     SubmodularityError)
from .instance import MultiwayInstance, Partition, SymmetrySpec
from .mincsp import (CspEdge, MinCspInstance, brute_force_csp, build_basic_lp, check_certificate,
                     compare_relaxations, solve_lp)
from .relaxation import SolverConfig, solve_submp_rel
from .rounding import check_analysis_lemmas, expected_cost_exact, lp_cost_exact, round_at
from .brute import brute_force_partition, brute_force_symmetric

__version__ = "0.1.0"
