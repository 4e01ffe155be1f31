"""Dataset assembly, training loop, full-gather inference and metrics."""

from .patches import patch_origins, patchify, unpatchify
from .normalize import NormRecord, compute_norm
from .dataset import (DatasetManifest, ExampleRecord, build_deblend_dataset,
                      build_srme_dataset, load_example)
from .training import LrSchedule, train
from .inference import denoise
from .metrics import snr_db, stack_residual_report

__all__ = [
    "patch_origins", "patchify", "unpatchify", "NormRecord", "compute_norm",
    "DatasetManifest", "ExampleRecord", "build_deblend_dataset",
    "build_srme_dataset", "load_example", "LrSchedule", "train", "denoise",
    "snr_db", "stack_residual_report",
]
