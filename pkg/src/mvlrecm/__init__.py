"""Multi-view evidential clustering with low-rank mass fusion."""

from .clustering import (
    CredalPartition,
    CredalState,
    MultiViewDataset,
    MvlrecmParams,
    ecm_average,
    ecm_fit,
    fit,
)
from .datagen import BallSpec, generate_3dball, load_manifest, standardize, write_dataset
from .lowrank import nnp_objective, svt
from .metrics import MetricsReport, evaluate
from .powerset import FocalElement, Frame, enumerate_nonempty, format_subset, meta_center, parse_subset

__version__ = "0.1.0"
