from .corpus import (
    all_specs,
    export_corpus,
    import_clip,
    is_heldout,
    split_corpus,
    training_example,
    training_examples,
)
from .dao import CaptionDAO, FrameDAO, load_video, save_video
from .evaluation import eval_suite, heldout_loss, score_videos
from .oracle import centroids, motion_oracle
from .render import generate_clip, sprite
from .schemas import Clip, ClipSpec, EvalReport, MotionVerdict
