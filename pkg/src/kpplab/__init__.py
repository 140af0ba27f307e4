"""Monte Carlo laboratory for the KPP equation with branching noise."""
from __future__ import annotations

__version__ = "0.1.0"

from .field import (
    Bump, ConstantPsiN, Field, GaussianKernel, Grid, HalfLineZetaN, KinkF0, MirroredXiN,
    Zero, inner_product, materialize, shift, total_mass, weighted_sup_norm,
)
from .integrator import Coefficients, StepParams, Trajectory, simulate, step, superprocess_mode
from .markers import (
    SmoothingKernel, exp_marker, left_marker, level_front, right_marker, smoothed_marker,
    truncated_marker,
)
