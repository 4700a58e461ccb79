"""Extrapolation-controlled prediction profiler."""

from .factors import (Categorical, Column, Continuous, DataError, Dataset,
                      EncodedMatrix, FactorDef, FactorSpace, Ordinal, encode,
                      encode_settings, decode_row, holdout_split, infer_factor_space,
                      inject_missing, level_column, load_csv, numeric_column)
from .covariance import (CovarianceError, ShrunkCovariance, pairwise_moments,
                         shrinkage_lambda, shrunk_covariance)
from .extrapolation import (AverageLeverage, ExtrapolationStatus, FeasibleInterval,
                            FeasibleLevels, LeverageModel, MaxLeverage, RegT2Model,
                            SingularDesignError, classify, f_limit, feasible_interval,
                            fit_leverage_model, fit_regt2_model, leverage, t2)
from .desirability import (Goal, MatchTarget, Maximize, Minimize, desirability,
                           overall_desirability)
from .models import (BoostConfig, BoostedTanhNet, LeastSquaresModel, MissingPolicy,
                     Predictor, TrainingSummary, apply_missing_policy,
                     fit_boosted_tanh, fit_least_squares, load_artifact, save_artifact)
from .optimizer import GAConfig, OptimumReport, optimize
from .engine import Profiler, ProfileTrace
from .simulation import (SimulationScenario, StudyResult, discretize,
                         extrapolation_grid, run_study, simulate_factor_matrix)

__version__ = "0.1.0"
