"""hiermotion: learning directed motion hierarchies from point trajectories.

The library decomposes observed motion into parent-inherited and residual
parts over a learnable forest of parent assignments, trains the assignment
weights with straight-through Gumbel-Softmax sampling and a truncated
power-series decoder, and applies learned hierarchies to structured
deformation with an as-rigid-as-possible solver.
"""

__version__ = "0.1.0"

from .datasets import (Body, PlanetaryConfig, SyntheticDataset, ToyConfig,
                       gen_planetary, gen_toy_1d)
from .decoder import decompose_check, neumann_reconstruct
from .deform import (DeformRequest, DeformResult, apply_rigid_to_elements,
                     arap_solve, write_ply)
from .encoder import (EdgeWeights, ModelParams, PolarRates, aggregate_polar,
                      attention_logits, edge_logits, init_params,
                      neighborhood_softmax, polar_rates, relative_velocity,
                      time_averaged_logits)
from .evaluation import (count_valid_hierarchies, depth1_clusters, exact_match,
                         monte_carlo_baseline, toy_validate, wilson_ci)
from .hierarchy import (HierarchyMatrix, SampledHierarchy, gumbel_sample,
                        ml_hierarchy, trace_descendants, validate_hierarchy)
from .motion import (DataFormatError, InvalidInputError, ProximityGraph,
                     Trajectory, VelocityField, build_knn_graph,
                     compute_deltas, load_trajectory_csv, load_trajectory_json,
                     save_trajectory_csv, save_trajectory_json)
from .objective import (LossWeights, algebraic_connectivity, base_loss,
                        connectivity_hinge, rotational_loss)
from .trainer import (Adam, NumericalError, SweepReport, TrainConfig,
                      TrainRecord, anneal_tau, backward, sweep, train_run)

__all__ = [
    "Adam", "Body", "DataFormatError", "DeformRequest", "DeformResult",
    "EdgeWeights", "HierarchyMatrix", "InvalidInputError", "LossWeights",
    "ModelParams", "NumericalError", "PlanetaryConfig", "PolarRates",
    "ProximityGraph", "SampledHierarchy", "SweepReport", "SyntheticDataset",
    "ToyConfig", "TrainConfig", "TrainRecord", "Trajectory", "VelocityField",
    "aggregate_polar", "algebraic_connectivity", "anneal_tau",
    "apply_rigid_to_elements", "arap_solve", "attention_logits", "backward",
    "base_loss", "build_knn_graph", "compute_deltas", "connectivity_hinge",
    "count_valid_hierarchies", "decompose_check", "depth1_clusters",
    "edge_logits", "exact_match", "gen_planetary", "gen_toy_1d",
    "gumbel_sample", "init_params", "load_trajectory_csv",
    "load_trajectory_json", "ml_hierarchy", "monte_carlo_baseline",
    "neighborhood_softmax", "neumann_reconstruct", "polar_rates",
    "relative_velocity", "rotational_loss", "save_trajectory_csv",
    "save_trajectory_json", "sweep", "time_averaged_logits", "toy_validate",
    "trace_descendants", "train_run", "validate_hierarchy", "wilson_ci",
    "write_ply",
]
