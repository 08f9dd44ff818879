"""krick: heavy-tailed Z-extension suspension flows at desk scale.

Simulation of first-return excursions with exact-by-construction tails,
twisted-eigenvalue and resolvent-integral numerics, Fourier inversion
machinery, and a CLI tying them into reproducible runs.
"""

__version__ = "0.1.0"

from .model import Model, ModelParams, build_model  # noqa: F401
