"""Boundary controllability toolkit for viscoelastic plates and beams.

Modules
-------
numgrid   time/boundary grids, trapezoid quadrature and causal convolution
kernels   Prony memory kernels, resolvent and the MacCamy reformulation
spectral  hinged beam/rectangle and synthetic modal bases, state norms
dynamics  memory-perturbed cosines, forward simulation, adjoint traces
control   moment problems, minimum-norm synthesis and diagnostics
cli       config-driven batch front end
"""

__version__ = "0.1.0"
