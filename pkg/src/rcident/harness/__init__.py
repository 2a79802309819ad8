"""Command-line harness: configs, datasets, pipelines and reports."""

from .config import DEFAULT_INPUTS, DEFAULT_TOLERANCES, PIPELINES, PipelineConfig, load_config, resolve
from .datasets import Dataset, load_dataset
from .pipelines import run_pipeline
from .report import RunReport, emit_report

__all__ = ["DEFAULT_INPUTS", "DEFAULT_TOLERANCES", "PIPELINES", "PipelineConfig", "load_config", "resolve",
           "Dataset", "load_dataset", "run_pipeline", "RunReport", "emit_report"]
