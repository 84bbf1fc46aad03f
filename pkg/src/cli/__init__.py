from .dao import CheckpointDAO, GridDAO, LossLogDAO, ReportDAO
from .router import build_parser, dispatch
from .schemas import Checkpoint, CheckpointHeader, DataConfig, RunConfig, TensorEntry, load_run_config, parse_run_config
from .service import CheckpointService, EvalService, SampleService, SurgeryService, TrainService
