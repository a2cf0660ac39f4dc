"""Sequential double cross-validation for the added predictive value of a second data source."""
from .cv import CvPrediction, CvStrategy, Loops, SelectionRule, cv_predict, make_folds
from .errors import (ConvergenceError, DegenerateResponseError, InputError, SeqDCVError,
                     SimulationError)
from .io import SPEC_VERSION
from .penreg import FitResult, PenaltyConfig, fit, fit_path, lambda_grid, predict
from .permtest import PermutationResult, permutation_test
from .seqassess import (SequentialConfig, SequentialResult, StackResult, sequential_assess,
                        stack_assess)
from .simgen import SCENARIOS, ScenarioSpec, build_scenario, scenario

__version__ = "0.1.0"
