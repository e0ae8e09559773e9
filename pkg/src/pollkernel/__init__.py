"""Stationary visit-epoch queue-length distributions for polling systems.

Submodules: ``model`` (system description), ``pgf`` (coefficient tensors and
torus grids), ``kernels`` (visit maps), ``lattice`` (path-count
coefficients), ``amc`` (truncated-chain oracle), ``iterate`` (cycle fixed
point), ``sim`` (discrete-event simulation), ``checks`` and ``cli``.
"""

__version__ = "0.1.0"
