"""FEM-BEM coupling and multilevel quasi-Monte Carlo for Poisson problems on
randomly perturbed 2D domains."""

__version__ = "0.1.0"
