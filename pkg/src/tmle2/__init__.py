"""Second-order targeted maximum likelihood estimation.

Estimators for two targets: the integrated square of a discrete density and
the treatment-specific mean.  Both pair a first-order TMLE with a
second-order update along the canonical gradient of the fluctuated target,
with highly adaptive lasso fits supplying the reference measure, and ship
with a Monte-Carlo harness, a FastAPI service, and a thin-client CLI.
"""

__version__ = "0.1.0"

from . import core, density2, hal, sim, tsm

__all__ = ["core", "density2", "hal", "sim", "tsm", "__version__"]
