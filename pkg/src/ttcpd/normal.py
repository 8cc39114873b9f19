"""Standard normal distribution function and its inverse.

Thin wrappers around :mod:`scipy.special` (Cephes ``ndtr``/``ndtri``), which
are accurate to a few ulp over the whole real line. The wrappers add the
domain checks the rest of the package relies on and accept scalars or arrays.
"""

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = ["std_normal_cdf", "std_normal_quantile", "std_normal_pdf"]


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def std_normal_cdf(x):
    """Standard normal distribution function Phi(x)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("std_normal_cdf requires finite input")
    return _out(special.ndtr(x))


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1)."""
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise DomainError("std_normal_quantile requires 0 < p < 1")
    return _out(special.ndtri(p))


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return _out(np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi))
