"""Backend selection for the numerical kernels.

The compiled Cython extension is preferred. Set ``WINDBMA_PURE_PYTHON=1``
to force the NumPy fallback (useful for debugging and benchmarking).
"""
from __future__ import annotations

import os

if os.environ.get("WINDBMA_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        from . import _pykernels as _impl

BACKEND = "cython" if _impl.__name__.endswith("_ckernels") else "python"

gamma_p = _impl.gamma_p
gamma_cdf = _impl.gamma_cdf
gamma_pdf = _impl.gamma_pdf
gamma_logpdf = _impl.gamma_logpdf
gamma_cdf_array = _impl.gamma_cdf_array
gamma_pdf_array = _impl.gamma_pdf_array
mixture_cdf = _impl.mixture_cdf
mixture_pdf = _impl.mixture_pdf
component_densities = _impl.component_densities
mixture_loglik = _impl.mixture_loglik

__all__ = [
    "BACKEND",
    "gamma_p",
    "gamma_cdf",
    "gamma_pdf",
    "gamma_logpdf",
    "gamma_cdf_array",
    "gamma_pdf_array",
    "mixture_cdf",
    "mixture_pdf",
    "component_densities",
    "mixture_loglik",
]
