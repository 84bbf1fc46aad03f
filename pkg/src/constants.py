from enum import Enum


class RopeKind(str, Enum):
    TEMPORAL_1D = "temporal_1d"
    SPATIAL_2D = "spatial_2d"


class ModulationSource(str, Enum):
    SHARED_ADALN = "shared_adaln"
    FIXED_IDENTITY = "fixed_identity"


class MaskAxis(str, Enum):
    SPATIAL = "spatial"
    TEMPORAL = "temporal"


class TaskKind(str, Enum):
    T2V = "t2v"
    TI2V = "ti2v"
    PREDICT4 = "predict4"
    INTERPOLATE = "interpolate"
    KEYFRAME = "keyframe"
    UPSAMPLE2 = "upsample2"


class GuidanceScheme(str, Enum):
    NONE = "none"
    JIT = "jit"
    SIT = "sit"


class OptimizerKind(str, Enum):
    ADAFACTOR = "adafactor"
    ADAMW = "adamw"


class TimestepSampling(str, Enum):
    UNIFORM = "uniform"
    LOGIT_NORMAL = "logit_normal"


class RopeMode(str, Enum):
    INTERPOLATE = "interpolate"
    EXTRAPOLATE = "extrapolate"


class Provenance(str, Enum):
    T2I = "t2i"
    T2I_INFLATED = "t2i:inflated"
    T2V = "t2v"
    SHORT = "short"
    INIT = "init"


NORM_EPS = 1e-6
ROPE_BASE = 10000.0
TIMESTEP_SCALE = 1000.0
SAMPLER_DELTA = 1e-3

JIT_DEFAULT_SCALE = 7.5
SIT_GRID_SCALES = (1.1, 1.5, 4.5, 7.5, 10.5)

KEYFRAME_STRIDE = 20
PREDICT_FRAMES = 4

# original_resolution (h, w), crop_coords (top, left), sampling_stride, num_frames
MICRO_FIELDS = ("height", "width", "crop_top", "crop_left", "sampling_stride", "num_frames")

# Toy caption vocabulary. Index 0 pads, index 1 is the null (empty) prompt.
PAD_TOKEN = "<pad>"
NULL_TOKEN = "<null>"
SHAPES = ("square", "circle", "triangle")
COLORS = ("red", "green", "blue")
DIRECTIONS = ("up", "down", "left", "right")
SPEED_WORDS = {0: "still", 1: "slowly", 2: "quickly"}
VOCABULARY = (
    PAD_TOKEN,
    NULL_TOKEN,
    "a",
    "the",
    "moves",
    "drifts",
    "object",
    *SHAPES,
    *COLORS,
    *DIRECTIONS,
    *SPEED_WORDS.values(),
    "small",
    "large",
    "bright",
    "dark",
    "on",
    "black",
    "background",
    "video",
    "of",
    "clip",
    "frame",
    "toward",
    "away",
    "from",
    "center",
    "edge",
    "top",
    "bottom",
    "side",
    "and",
    "then",
    "stops",
    "keeps",
    "moving",
    "fast",
    "slow",
    "very",
    "steady",
    "pace",
    "orange",
    "yellow",
    "purple",
    "white",
    "star",
    "ring",
    "line",
    "dot",
    "shape",
    "scene",
)

CHECKPOINT_MAGIC = b"STIV1"

# Published sizes: (blocks, hidden, heads, reported parameters).
MODEL_PRESETS = {
    "XL": (28, 1152, 18, 600e6),
    "XXL": (38, 1536, 24, 1.5e9),
    "M": (46, 3072, 48, 8.7e9),
}
PRESET_TEXT_DIM = 1280
