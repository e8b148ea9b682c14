"""Arbitrary-order polytopal DG solver for coupled thermo/poro-viscoelasticity.

The package discretizes the two-field (displacement / generalized pressure)
system on 2D polygonal meshes with a weighted symmetric interior penalty
scheme and advances it in time with implicit Newmark-type integrators.
Subpackage layout:

- :mod:`porodg.mesh` -- polygonal meshes (generation, IO, quality checks)
- :mod:`porodg.quadrature` -- Gauss rules on segments and triangles
- :mod:`porodg.basis` -- broken orthonormal polynomial spaces
- :mod:`porodg.dg_forms` -- face operators, heterogeneity weights, penalties
- :mod:`porodg.models` -- physical coefficients, presets, source terms
- :mod:`porodg.assembly` -- sparse operators and right-hand sides
- :mod:`porodg.timestepping` -- Newmark and coupled Newmark/theta schemes
- :mod:`porodg.verification` -- manufactured solutions, error norms, sweeps
- :mod:`porodg.cli` -- command-line drivers for the experiments
"""

__version__ = "0.1.0"
