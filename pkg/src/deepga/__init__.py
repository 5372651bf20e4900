"""Deep-BSDE and deep-GA solvers for high-dimensional semilinear parabolic PDEs."""

from .bsde import BaselineConfig, LandscapeTable, initial_loss_sweep, train_deep_bsde
from .ga import (GaConfig, Population, crossover, evaluate_fitness, expand_population,
                 generate_population, mean_mutations, mutate, run_deep_ga, sort_and_eliminate)
from .network import NetConfig, SolverParams, adam_step, init_params, load_checkpoint, save_checkpoint
from .oracles import (OracleResult, bs_linear_closed_form, bs_linear_euler_mc, fixture,
                      hjb_exact_mc, hjb_lambda_sweep)
from .paths import BrownianBatch, PathBatch, sample_brownian, sample_paths, simulate_forward
from .problems import BsParams, HjbParams, ProblemSpec, make_bs_problem, make_hjb_problem
from .report import RunReport, TraceRow, emit_csv, read_csv
from .rollout import NumericalError, RolloutError, candidate_losses, loss_and_grads, rollout

__version__ = "0.1.0"
