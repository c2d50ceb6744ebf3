"""Bayesian network structure learning for discrete and Gaussian data."""

from .constraint import (ALGORITHM_NAMES, ALGORITHMS, LearnConfig,
                         constraint_learn, learn_markov_blanket,
                         neighbourhood_from_mb, orient_vstructures,
                         symmetry_correction)
from .data import (ContingencyTable, DataError, Dataset, DiscreteCPT,
                   FittedNetwork, LinearGaussian, contingency_counts,
                   correlation_matrix, fit_mle, forward_sample, load_table,
                   partial_correlation, write_table)
from .graph import (CYCLE_MESSAGE, ComparisonReport, CycleError, Graph,
                    GraphError, Provenance, average_branching, average_mb_size,
                    average_nbr_size, compare, drop_arc, empty_graph,
                    extend_pdag, find_vstructures, format_modelstring,
                    mutate_arc, nparams, parse_modelstring,
                    propagate_directions, reverse_arc, set_arc,
                    structure_query, to_dot, topological_order)
from .hillclimb import (HillClimbConfig, apply_move, enumerate_moves,
                        hill_climb, perturb_graph)
from .independence import (CONTINUOUS_TESTS, DISCRETE_TESTS, TEST_LABELS,
                           TEST_NAMES, TestError, TestResult, aic_test,
                           ci_test, fmi_statistic, gaussian_statistic,
                           mi_discrete, permutation_pvalue, x2_discrete)
from .priors import (ArcList, Constraints, PriorError, PriorKnowledge,
                     normalize_priors)
from .scores import (SCORE_LABELS, SCORE_NAMES, ScoreCache, ScoreError,
                     ScoreSpec, local_score, network_score, score_delta)
from .trace import LearnTrace, TraceEvent

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
