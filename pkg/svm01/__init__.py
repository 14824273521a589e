# svm01/__init__.py
"""Sparse hard-margin SVM solver (inexact proximal ALM with a gradient-Newton inner loop)."""

__version__ = "0.1.0"
