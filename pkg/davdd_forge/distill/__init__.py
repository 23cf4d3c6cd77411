"""
Sentetik küme, eşleme kayıpları ve damıtma döngüsü
"""

from .distiller import (
    DistillConfig,
    distill_step,
    matching_objective,
    run_distillation,
    sample_draw,
    smoothed_trajectory,
    trailing_rolling_std,
)
from .matching import loss_common, loss_private
from .synthetic import SyntheticSet, factor_expand, init_synthetic
