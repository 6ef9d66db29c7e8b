"""Special functions used by the conformal-map field formulas.

ellipk(m): complete elliptic integral of the first kind in the *parameter*
    convention, K(m) = int_0^{pi/2} dtheta / sqrt(1 - m sin^2 theta).
carccos(z): principal complex arccosine with a fixed continuity rule on the
    branch cuts.
"""

import numpy as np

from .errors import DomainError

_AGM_RTOL = 1e-15
_AGM_MAXITER = 64


def agm(a, b):
    """Arithmetic-geometric mean of two positive reals."""
    a = float(a)
    b = float(b)
    for _ in range(_AGM_MAXITER):
        if abs(a - b) < _AGM_RTOL * a:
            break
        a, b = 0.5 * (a + b), np.sqrt(a * b)
    return 0.5 * (a + b)


def ellipk(m):
    """Complete elliptic integral of the first kind, K(m), for 0 <= m < 1.

    Evaluated as ``pi / (2 * agm(1, sqrt(1 - m)))``. Accepts scalars or
    array-likes; arrays are evaluated element-wise.
    """
    arr = np.asarray(m, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise DomainError(f"ellipk requires 0 <= m < 1, got {m!r}")
    if arr.ndim == 0:
        return np.pi / (2.0 * agm(1.0, np.sqrt(1.0 - float(arr))))
    out = np.empty_like(arr)
    for idx, val in np.ndenumerate(arr):
        out[idx] = np.pi / (2.0 * agm(1.0, np.sqrt(1.0 - val)))
    return out


def carccos(z):
    """Principal-branch complex arccosine, Re(result) in [0, pi].

    Branch cuts lie on the real axis for |Re z| > 1. Points exactly on a cut
    take the limit from below the axis for Re z > 1 (Im result > 0) and from
    above the axis for Re z < -1 (Im result < 0), regardless of the sign of a
    zero imaginary part.
    """
    zc = np.asarray(z, dtype=complex)
    if np.any(~np.isfinite(zc)):
        raise DomainError("carccos requires finite input")
    w = np.arccos(zc)
    on_axis = zc.imag == 0.0
    right = on_axis & (zc.real > 1.0)
    left = on_axis & (zc.real < -1.0)
    if np.any(right) or np.any(left):
        w = np.array(w, dtype=complex, copy=True)
        w[right] = w[right].real + 1j * np.abs(w[right].imag)
        w[left] = w[left].real - 1j * np.abs(w[left].imag)
    if np.ndim(z) == 0:
        return complex(w)
    return w
