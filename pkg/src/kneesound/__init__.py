"""Knee-sound screening experiments.

Time-frequency feature parameterisations of acoustic knee recordings,
threshold-driven feature selection, from-scratch classifiers (SMO-trained
soft-margin SVM, LDA, CART) and the repeated knee-level cross-validation
protocol tying them together, plus a synthetic corpus generator for
end-to-end verification.
"""

from .classify import COMPILED_SMO

__all__ = ["COMPILED_SMO", "__version__"]

__version__ = "0.1.0"
