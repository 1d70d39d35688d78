"""Shape-constrained convex regression: CR, PCR, LCR, ALCR, and WRCR estimators."""

try:
    from ._cvxreg import *  # noqa: F401,F403
except ImportError:  # running against a bare build tree
    from _cvxreg import *  # noqa: F401,F403
