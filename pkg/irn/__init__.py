"""Interpretable multi-hop reasoning over knowledge bases.

Subpackages cover the full pipeline: triple store (`kb`), numeric kernels
(`numerics`), dataset generation (`dataset`), the reasoning model itself
(`model`), multitask training (`trainer`), traceable inference
(`inference`), metrics (`evaluator`), and the command-line front end
(`cli`).
"""

__version__ = "0.1.0"
