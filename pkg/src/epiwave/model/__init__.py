from .bundle import load_model, save_model
from .config import ModelConfig
from .data import Batch, PreparedData, prepare
from .network import SabGnn, temporal_forward
from .train import TrainingError, TrainResult, batch_loss, forecast, loss_and_grads, predict_counts, train

__all__ = [
    "load_model", "save_model", "ModelConfig", "Batch", "PreparedData", "prepare", "SabGnn",
    "temporal_forward", "TrainingError", "TrainResult", "batch_loss", "forecast", "loss_and_grads",
    "predict_counts", "train",
]
