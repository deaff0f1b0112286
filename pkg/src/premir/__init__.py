"""Precursor miRNA classification with a three-branch LSTM network.

The pipeline folds each RNA sequence into a dot-bracket structure, splits
the structure at its loop center, flips the 3' half, and feeds the sequence
plus both structure halves to separate LSTM branches whose outputs are
merged by small sigmoid dense layers.
"""

__version__ = "0.1.0"

from .errors import ValidationError, InvariantError

__all__ = ["ValidationError", "InvariantError", "__version__"]
