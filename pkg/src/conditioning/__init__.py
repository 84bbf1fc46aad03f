from .schemas import LossMask, TaskMode, pinned_frames
from .service import (
    apply_frame_replacement,
    choose_task_mode,
    image_condition,
    micro_for_mode,
    pin_state,
    replace_batch,
    sample_training_condition,
)
