"""Linearized Laplace approximation and affine subspace posterior models.

The toolbox covers the full desk-scale pipeline: MAP training of small
MLPs, generalized Gauss-Newton / Fisher curvature factors, Laplace
posterior approximations (full, diagonal, Kronecker-factored), subspace
projector construction (coordinate subsets and low-rank maps, including
the provably optimal one), epistemic predictive covariances, and the
metrics used to compare them (relative error, trace criterion, NLL).
"""

__version__ = "0.1.0"
