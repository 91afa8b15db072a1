"""Discrete Heisenberg group geometry: word metric, Poincare inequalities, distortion and cocycle numerics."""
from .group import GroupElement, Word, word_eval

__version__ = "0.1.0"

__all__ = ["GroupElement", "Word", "word_eval", "__version__"]
