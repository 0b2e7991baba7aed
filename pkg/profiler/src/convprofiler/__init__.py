"""Toy trainer for retraining-free operator variants.

Trains a small conv backbone, derives fire / lowrank / channel-scale /
depth-skip variants from its weights (function-preserving transforms where
the algebra allows, distillation otherwise), measures each variant on a
held-out split, and exports the accuracy-profile JSON consumed by the
convshrink engine. The JSON files are the only interface between the two
packages.
"""

from .backbone import BACKBONE_NAME, BlockNet, build_backbone, evaluate, train_backbone
from .dataset import make_loaders, synthetic_shapes
from .export import STOCK_CATALOG, SkippedVariant, encode_plan, profile_document
from .importance import filter_norm_importance
from .pipeline import ProfilerRun, run_profiler, write_run
from .variants import (
    VariantRecord,
    applicability,
    apply_group,
    apply_plan,
    build_variant,
    tune,
)

__version__ = "0.1.0"
