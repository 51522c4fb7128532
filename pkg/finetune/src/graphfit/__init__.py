"""Two-stage low-rank adapter fine-tuning driver for graph-derived corpora."""

from .config import FinetuneConfig, load_config
from .corpus import (
    STAGE1,
    STAGE1_FILE,
    STAGE2,
    STAGE2_FILE,
    Stage1Record,
    Stage2Record,
    load_stage1,
    load_stage2,
    read_manifest,
    verify_corpus_dir,
)
from .errors import CorpusSchemaError, ModelLoadError, NonFiniteLoss
from .lora import attach_lora, load_adapter, save_adapter, trainable_parameter_names
from .model import build_model, count_parameters
from .probe import ProbeReport, memorization_probe
from .trainer import (
    STOP_EMPTY,
    STOP_MAX_EPOCHS,
    STOP_THRESHOLD,
    StageResult,
    TwoStageResult,
    run_two_stage,
    train_stage,
)
from .vocab import WordTokenizer

__version__ = "0.1.0"

__all__ = [
    "FinetuneConfig",
    "load_config",
    "STAGE1",
    "STAGE1_FILE",
    "STAGE2",
    "STAGE2_FILE",
    "Stage1Record",
    "Stage2Record",
    "load_stage1",
    "load_stage2",
    "read_manifest",
    "verify_corpus_dir",
    "CorpusSchemaError",
    "ModelLoadError",
    "NonFiniteLoss",
    "attach_lora",
    "load_adapter",
    "save_adapter",
    "trainable_parameter_names",
    "build_model",
    "count_parameters",
    "ProbeReport",
    "memorization_probe",
    "STOP_EMPTY",
    "STOP_MAX_EPOCHS",
    "STOP_THRESHOLD",
    "StageResult",
    "TwoStageResult",
    "run_two_stage",
    "train_stage",
    "WordTokenizer",
]
