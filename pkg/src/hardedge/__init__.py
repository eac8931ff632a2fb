"""Hard-edge gap probabilities for real and quaternion Wishart matrices."""

from .gap import eval_F, eval_P, eval_Q, evaluate_quantity, gap_curve
from .special import PrecisionError, PrecisionRequest

__all__ = ["PrecisionError", "PrecisionRequest", "eval_F", "eval_P", "eval_Q", "evaluate_quantity", "gap_curve"]
