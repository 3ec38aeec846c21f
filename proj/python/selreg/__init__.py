"""Selective regression with bootstrap uncertainty, conformal baselines,
and Shapley-based rejection auditing.

The heavy lifting lives in the compiled extension ``selreg._core``; this
package re-exports its public surface.
"""

try:
    from ._core import *  # noqa: F401,F403
    from . import _core as _core  # noqa: F401
except ImportError:  # build-tree layout: extension sits next to the package dir
    from _core import *  # noqa: F401,F403
    import _core as _core  # noqa: F401

__version__ = "0.1.0"

__all__ = [name for name in dir(_core) if not name.startswith("_")]
