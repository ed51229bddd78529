"""Exact support recovery in high-dimensional sparse linear regression."""
from .bounds import (BoundsReport, MonteCarloConfig, bounds_report, chi2_tail_bound,
                     lower_bound_prop3, lower_bound_thm1, lower_bound_thm3, phase_table_regime,
                     psi_mc, psi_plus_mc, student_tail_envelope, sufficient_n, upper_bound_cor2,
                     upper_bound_thm2, upper_bound_thm4)
from .model import (Dataset, ParameterError, ProblemInstance, SplitScheme, hamming_distance,
                    make_problem, membership_omega, split_sample, support_of)
from .mom import MomConfig, MomSelector, Pilot, mom_select
from .selector import Regime, ThresholdSpec, TwoStepSelector, select
from .sim import ContaminationSpec, GeneratorSpec, Mom, RiskEstimate, TwoStep, gen_instance, mc_risk, phase_sweep
from .slope import (A_PRACTICAL, A_THEORY, SolverConfig, SqrtSlope, lambda_weights,
                    prox_sorted_l1, sorted_l1_norm, sqrt_slope_solve)

__version__ = "0.1.0"

__all__ = [
    "A_PRACTICAL", "A_THEORY", "BoundsReport", "ContaminationSpec", "Dataset", "GeneratorSpec",
    "Mom", "MomConfig", "MomSelector", "MonteCarloConfig", "ParameterError", "Pilot",
    "ProblemInstance", "Regime", "RiskEstimate", "SolverConfig", "SplitScheme", "SqrtSlope",
    "ThresholdSpec", "TwoStep", "TwoStepSelector", "bounds_report", "chi2_tail_bound",
    "gen_instance", "hamming_distance", "lambda_weights", "lower_bound_prop3",
    "lower_bound_thm1", "lower_bound_thm3", "make_problem", "mc_risk", "membership_omega",
    "mom_select", "phase_sweep", "phase_table_regime", "prox_sorted_l1", "psi_mc",
    "psi_plus_mc", "select", "sorted_l1_norm", "split_sample", "sqrt_slope_solve",
    "student_tail_envelope", "sufficient_n", "support_of", "upper_bound_cor2",
    "upper_bound_thm2", "upper_bound_thm4",
]
