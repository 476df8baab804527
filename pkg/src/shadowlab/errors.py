"""Exception taxonomy shared across the package.

Three failure classes are distinguished so that callers (and the CLI
exit-code contract) can react appropriately:

* ``UsageError``     -- the caller asked for something malformed (bad
                        dimensions, empty configs, out-of-range knobs).
                        CLI maps this to exit code 2.
* ``DomainError``    -- inputs are structurally fine but lie outside the
                        mathematical domain of the requested quantity
                        (e.g. weighted x-distance at x == 0).
* ``ConvergenceError`` -- an iterative numeric routine failed; carries the
                        last residual for diagnostics.
"""

from __future__ import annotations


class UsageError(ValueError):
    """Malformed request: wrong dimension, bad parameter combination, ..."""


class DomainError(ValueError):
    """Input outside the mathematical domain of the requested operation."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not converge.

    Attributes
    ----------
    residual : float
        Max-norm residual at the final iterate.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = float(residual)
