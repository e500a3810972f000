"""Render subspace-Laplace metric CSVs into publication-style figures.

This package is a pure file-to-file transform: it reads the per-run
metrics CSV and the parameter-sensitivity CSV emitted by the experiment
pipeline and produces line plots (metric vs subspace dimension, with
seed standard-error bands) and sensitivity heatmaps.  It never imports
the experiment code.
"""

__version__ = "0.1.0"
