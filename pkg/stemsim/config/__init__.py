from .config import apply_overrides, build_run_config, load_run_config, validate_run_document
from .types import RunConfig, SegmentationSettings
