"""Joint spectrum sensing, receive beamforming and power design for hybrid
interweave/underlay SIMO cognitive radio uplinks, with closed-form outage and
rate expressions, their optimizers, and Monte Carlo validation."""

__version__ = "0.1.0"

from .config import SystemConfig, default_config, from_db, to_db
from .channel import (ChannelDraw, CorrelationSet, complex_normal,
                      exp_correlation, matrix_sqrt, sample_channels,
                      seeded_rng, uniform_correlation_set)
from .numerics import (EULER_GAMMA, QuadratureSpec, bisect_root,
                       dominant_generalized_eigvec, exp_e1,
                       maximize_concave_1d, q_function, q_inverse,
                       ratio_quadform_mean)
from .sensing import (SensingDesign, clamp_free_tau, design_sensing,
                      detection_prob, false_alarm_prob, frame_coefficients,
                      threshold_for_target)
from .outage import (OutageModel, build_outage_model, norm_sq_cdf, outage_F,
                     outage_G, outage_hybrid, outage_interweave,
                     outage_underlay)
from .rates import (Case0Rates, RateContext, make_rate_context, objective_C,
                    rate_case0_bound, rate_case1_exact, rate_case1_highinr)
from .design import (ConstraintReport, DesignSolution,
                     InfeasibleConstraintError, SecantCoefficients,
                     alternating_optimize, dge_beamformer, optimize_beamformer,
                     optimize_interweave, optimize_sensing, optimize_underlay,
                     secant_coefficients, sensing_derivative, solve_power)
from .montecarlo import (EdEstimate, McSpec, mc_conditional_rate,
                         mc_ed_probabilities, mc_lambda_bar, mc_outage,
                         mc_secondary_rate)
from .experiments import (CSV_COLUMNS, ExperimentConfig, experiment_config,
                          load_config, run_experiment, write_results)
from .validation import CheckResult, format_report, overall_pass, validate_suite
