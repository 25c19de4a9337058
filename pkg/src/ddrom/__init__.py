from ddrom.config import PipelineConfig, load_config
from ddrom.errors import RomError
from ddrom.pipeline import StudyResult, run_study

__all__ = [
    "PipelineConfig",
    "RomError",
    "StudyResult",
    "load_config",
    "run_study",
]
