"""Joint-model diagnostics: npd/npde residuals for longitudinal + time-to-event models.

The compiled core lives in ``jmdiag._core`` inside installed wheels; in a
development tree the extension may sit on ``PYTHONPATH`` as a top-level
module instead.
"""

try:
    from ._core import *  # noqa: F401,F403
    from ._core import __version__  # noqa: F401
except ImportError:  # development tree: extension built outside the package
    from _core import *  # noqa: F401,F403
    from _core import __version__  # noqa: F401
