"""Kernel backend selection.

The Cython extension is used when it was built; otherwise the numpy
fallback is imported. Setting ``DMNLS_PURE_PYTHON=1`` forces the fallback.
"""
import os

BACKEND = "python"

if os.environ.get("DMNLS_PURE_PYTHON") != "1":
    try:
        from ._kernels import pairwise_l2, pvar_chain  # noqa: F401
        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._kernels_py import pairwise_l2, pvar_chain  # noqa: F401

__all__ = ["BACKEND", "pairwise_l2", "pvar_chain"]
