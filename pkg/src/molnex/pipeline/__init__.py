"""Dataset generation, training, prediction and evaluation."""
from .config import ConfigError, PipelineConfig, load_config, parse_config
from .dataset import DatasetMismatch, DatasetRecord, EmptyInput, generate_dataset, load_dataset
from .evaluate import EvalReport, LineCountMismatch, evaluate, evaluate_lines, normalize_smiles
from .predict import CheckpointLoadError, Prediction, load_model, predict, predict_images, write_predictions
from .train import TrainResult, train

__all__ = [
    "CheckpointLoadError",
    "ConfigError",
    "DatasetMismatch",
    "DatasetRecord",
    "EmptyInput",
    "EvalReport",
    "LineCountMismatch",
    "PipelineConfig",
    "Prediction",
    "TrainResult",
    "evaluate",
    "evaluate_lines",
    "generate_dataset",
    "load_config",
    "load_dataset",
    "load_model",
    "normalize_smiles",
    "parse_config",
    "predict",
    "predict_images",
    "train",
    "write_predictions",
]
