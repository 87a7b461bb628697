from .checkpoint import TrainState, load_checkpoint, save_checkpoint
from .config import TrainConfig, desk_config
from .metrics import (discriminator_accuracy, ema_update, export_sample_grid, mse, sample_grid,
                      ssim)
from .trainer import (MetricsRow, evaluate, generate, generator_only_steps, init_state,
                      run_training, train_step)

__all__ = [
    "MetricsRow", "TrainConfig", "TrainState", "desk_config", "discriminator_accuracy",
    "ema_update", "evaluate", "export_sample_grid", "generate", "generator_only_steps",
    "init_state", "load_checkpoint", "mse", "run_training", "sample_grid", "save_checkpoint",
    "ssim", "train_step",
]
