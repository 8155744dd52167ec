"""Recurrent regression network for cross-pose and video face identification.

A recurrent encoder-decoder trained with reconstruction, sequence-statistic,
and discriminative losses, plus the sequence-construction protocols, training
loop, and gallery/probe evaluation tooling around it.
"""

__version__ = "0.1.0"

from .linalg import Matrix, Vector, backend_name

__all__ = ["Matrix", "Vector", "backend_name", "__version__"]
