from .config import ALL_MODELS, ConfigError, ExperimentConfig
from .metrics import mae, relative_error, rmse
from .runner import RESULT_HEADER, RunReport, RunSpec, execute, run, summarize
from .split import Split, SplitError, split_anchors

__all__ = [
    "ALL_MODELS", "ConfigError", "ExperimentConfig", "mae", "relative_error", "rmse", "RESULT_HEADER",
    "RunReport", "RunSpec", "execute", "run", "summarize", "Split", "SplitError", "split_anchors",
]
