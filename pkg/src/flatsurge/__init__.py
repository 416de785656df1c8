"""Flat geometry of translation surfaces: saddle connections, surgeries and counting statistics."""
from .errors import FlatSurgeError
from .geodesy import (
    SaddleConnection,
    count_closed,
    count_open,
    cylinder_on_side,
    enumerate_saddle_connections,
    is_separating,
    multiplicity,
    side_angles,
    siegel_veech_transform,
)
from .io import load, save
from .sampler import parse_stratum, sample_batch, sample_surface
from .stats import (
    factorial_moment,
    lambda_closed,
    lambda_closed_general,
    lambda_open,
    poisson_tv,
)
from .surface import Mesh, TranslationSurface, build_surface, isometric
from .surgery import (
    collapse_open_connection,
    collapse_pipeline,
    detect_exception,
    move_zero,
    open_zero,
    pinch,
    unpinch,
)

__version__ = "0.1.0"
