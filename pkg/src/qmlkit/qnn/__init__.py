from .engine import QNN, SHIFT_RULES, shift_gradient
from .training import (
    SGD, Adam, FitResult, FixedShots, RstdShots, TrainConfig, TrainingError, choose_shots, fit, init_theta,
    loss_and_grad, model_from_text, model_to_text, regularized_loss, tanh_link,
)

__all__ = [
    "QNN", "SHIFT_RULES", "shift_gradient", "SGD", "Adam", "FitResult", "FixedShots", "RstdShots",
    "TrainConfig", "TrainingError", "choose_shots", "fit", "init_theta", "loss_and_grad", "model_from_text",
    "model_to_text", "regularized_loss", "tanh_link",
]
