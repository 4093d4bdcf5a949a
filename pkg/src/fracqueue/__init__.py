"""Simulation and closed-form inference for fractional M/M/1 queues and
fractional linear birth-death processes."""

__version__ = "0.1.0"

from .errors import (ConvergenceError, DataFormatError, DegenerateDataError, FracQueueError,
                     IllConditionedError, InsufficientDataError, NoSteadyStateError,
                     ParameterError, UnsupportedParameterError)
from .estimate import (EstimationResult, RegressionFit, fit_linear_bd, fit_mm1, interval_alpha,
                       interval_rates_linear, interval_rates_mm1, ks_two_sample, rate_fit_test)
from .rng import RngStream, sample_inverse_subordinator, sample_ml_sojourn, sample_stable
from .sim import (ModelParams, PathSample, SojournData, StopRule, extract_sojourns,
                  simulate_linear_bd, simulate_mm1, simulate_mm1_subordinated)
from .specfun import MLParams, log_ml_moments, ml, ml_survival, rl_fractional_integral
from .transient import (TransientQuery, TransientResult, invert_laplace, laplace_p0,
                        mean_queue_length, state_probability, state_probability_classical,
                        steady_state)
