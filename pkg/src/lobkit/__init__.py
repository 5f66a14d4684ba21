"""Limit-order-book benchmarking toolkit.

Modules: book (data model), engine (CDA matching), sampling (grid snapshot
pipeline), preprocess (normalization/windowing/labeling), metrics (losses
and gradients), models (reference autoencoder + training), synth (calibrated
synthetic order flow), io (file formats), cli (pipeline commands).
"""

__version__ = "0.1.0"
