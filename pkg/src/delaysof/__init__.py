"""Static output-feedback synthesis for linear time-delay systems."""

from .estimator import OutputFeedbackSynthesizer, check_system
from .grad import GradientResult, batch_loss_and_gradient, loss_and_gradient
from .model import DelaySystem, InitialFunction, delayed_matrix, eval_history, validate
from .sim import Trajectory, simulate, terminal_norm
from .train import AdamState, TrainConfig, TrainReport, adam_step, sample_initial_functions, synthesize
from .verify import SpectralReport, generator_matrix, is_stable, spectral_abscissa

__all__ = [
    "AdamState",
    "DelaySystem",
    "GradientResult",
    "InitialFunction",
    "OutputFeedbackSynthesizer",
    "SpectralReport",
    "TrainConfig",
    "TrainReport",
    "Trajectory",
    "adam_step",
    "batch_loss_and_gradient",
    "check_system",
    "delayed_matrix",
    "eval_history",
    "generator_matrix",
    "is_stable",
    "loss_and_gradient",
    "sample_initial_functions",
    "simulate",
    "spectral_abscissa",
    "synthesize",
    "terminal_norm",
    "validate",
]
