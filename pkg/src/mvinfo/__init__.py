"""Information measures and generalization bounds for multi-view learning."""
from .errors import (ApproximateOnly, InfiniteDivergenceError, LemmaViolation, MVInfoError, NondeterminismError,
                     NumericalError, RegimeError, ValidationError)
from .finite_info import (Alphabet, JointDistribution, conditional_entropy, conditional_mutual_information, entropy,
                          kl_divergence, mutual_information, renyi_entropy, total_correlation)
from .common_info import (CommonPartLabeling, disentanglement_tc, gk_common_information,
                          multiview_common_information)
from .bounds import BoundBreakdown, BoundParams, evaluate_bound, evaluate_validation_bound, xi_min

__version__ = "0.1.0"
