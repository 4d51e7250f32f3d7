"""Range-based sensor network localization as a potential game.

The package models a planar network of anchor and non-anchor sensors,
draws bounded measurement noise, evaluates the localization potential
with analytic derivatives built on rigidity matrices, finds equilibria
by multi-start damped least squares, and certifies a measurement-noise
bound under which the equilibrium is unique and close to the truth.
"""

from .deltabound import (DeltaReport, Weights, default_outer_radius,
                         delta_bound, noise_budget_check, noise_weights,
                         phi1, phi2, phi2_grid)
from .network import (MeasurementSet, NoiseDraw, NoiseSpec, SensorNetwork,
                      build_edges, draw_noise, exact_measurements, measure,
                      zero_noise)
from .potential import (Derivatives, check_potential_identity, derivatives,
                        gradient, hessian, payoff, potential)
from .rigidity import (Framework, IndeterminateRigidityError, RigidityError,
                       RigidityMatrixSet, framework_at_truth,
                       graph_is_generically_globally_rigid,
                       graph_is_generically_rigid, is_generically_globally_rigid,
                       is_generically_rigid, lambda_matrix, residual_vector,
                       rigidity_matrices)
from .scenario import (Scenario, generate_network, load_scenario, save_scenario,
                       scenario_from_dict, scenario_to_dict)
from .solver import (SolveOptions, SolveResult, StationaryPoint,
                     classify_stationary, default_box, local_minimize,
                     mean_localization_error, multistart_solve)

__version__ = "0.1.0"
