"""shadowlab: a numerical laboratory for finite-time shadowing
near nonhyperbolic fixed points.

Subpackages by concern:

* ``maps``       -- map families, neighborhoods, JSON interchange
* ``lyapunov``   -- Lyapunov function pairs, regions, boundary parts
* ``conditions`` -- sampled sufficient-condition checks and reports
* ``pseudo``     -- pseudotrajectory generation and error models
* ``solver``     -- shadowing searches and verification
* ``scaling``    -- d_max(eps) scaling studies and exponent fits
* ``report``     -- figure rendering for CLI reports
* ``cli``        -- the ``shadowlab`` command-line entry point
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import ConvergenceError, DomainError, UsageError  # noqa: F401
