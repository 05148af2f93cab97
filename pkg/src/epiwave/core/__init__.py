from .adam import AdamState, NonFiniteGradient, adam_step
from .autodiff import ShapeError, Tape
from .checkpoint import load_params, save_params
from .gradcheck import NondeterministicLoss, finite_diff_check

__all__ = [
    "AdamState", "NonFiniteGradient", "adam_step", "ShapeError", "Tape",
    "load_params", "save_params", "NondeterministicLoss", "finite_diff_check",
]
