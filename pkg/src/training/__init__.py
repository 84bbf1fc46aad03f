from .ema import ema_copy_to, ema_init, ema_update
from .optim import AdaFactor, AdamW, Optimizer, build_optimizer, clip_grad_norm
from .schemas import EmaState, OptimizerConfig, StepRecord, TrainConfig, TrainingExample
from .service import Trainer, sample_timesteps
from .surgery import Audit, extend_frames_init, init_from_both, init_t2v_from_t2i, is_temporal
