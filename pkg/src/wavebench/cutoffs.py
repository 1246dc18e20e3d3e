"""Smooth cutoff profiles used by every Fourier projection.

All bump-type symbols are built from the classical C-infinity function
h(x) = exp(-1/x) on x > 0.  The resulting profiles are exact at their
plateau values (0 and 1), which is what makes telescoping partition-of-unity
sums close to machine precision on the lattice.
"""

from __future__ import annotations

import numpy as np


def _h(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    # clip the argument to avoid overflow warnings for tiny positive x
    out[pos] = np.exp(-1.0 / np.maximum(x[pos], 1e-300))
    return out


def smooth_step(x) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, monotone in between."""
    x = np.asarray(x, dtype=float)
    a = _h(x)
    b = _h(1.0 - x)
    return a / (a + b + np.where((a + b) == 0.0, 1.0, 0.0))


def theta(r) -> np.ndarray:
    """Radial low-pass profile: 1 on [0, 1], 0 on [2, inf), smooth."""
    return smooth_step(2.0 - np.asarray(r, dtype=float))


def psi(r) -> np.ndarray:
    """Annular profile theta(r) - theta(2r): supported in [1/2, 2], psi(1) = 1.

    Summing psi(r / 2^j) over j telescopes to 1 for every r > 0 once the
    dyadic range covers r.
    """
    r = np.asarray(r, dtype=float)
    return theta(r) - theta(2.0 * r)


def chi(t) -> np.ndarray:
    """Temporal switch: 1 for t >= 0, 0 for t <= -1, smooth on [-1, 0]."""
    return smooth_step(np.asarray(t, dtype=float) + 1.0)


def interval_profile(x) -> np.ndarray:
    """Unit-cell profile w with sum_m w(x - m) = 1 exactly; supp w in (-1, 1)."""
    x = np.asarray(x, dtype=float)
    return smooth_step(x + 1.0) - smooth_step(x)
