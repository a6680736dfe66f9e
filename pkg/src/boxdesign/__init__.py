"""Shipping box assortment design via weighted k-medoids selection."""
from .model import (BoxType, CandidatePool, Item, Order, OrderLine, ValidationError, canonicalize,
                    generate_candidate_pool)
from .packer import PackingResult, Placement, fit_single_box, pack_order, utilization
from .analytics import (TuningParams, WeightVector, build_cost_matrix, compute_weights,
                        estimate_effective_volumes, substitution_cost)
from .solver import Selection, SelectionProblem, objective, solve_em, solve_exhaustive, solve_greedy
from .pipeline import (AssortmentReport, GridResult, SplitSpec, compare, evaluate_assortment, finalize,
                       grid_search, make_grid, select_model, split_corpus)

__version__ = "0.1.0"
