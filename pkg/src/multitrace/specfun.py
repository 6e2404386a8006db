"""Bessel functions of orders 0 and 1 and the 2D outgoing Helmholtz kernel.

The kernel is ``G(z) = (i/4) H0(kappa |z|)`` with ``H0`` the Hankel function
of the first kind. The compiled ``_speccore`` extension is used when it was
built; otherwise the numpy implementation in ``_specpy`` runs the same
algorithm.
"""

from dataclasses import dataclass

import numpy as np

from . import _specpy

try:
    from . import _speccore as _core

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on the build
    _core = _specpy
    BACKEND = "numpy"

EULER = _specpy.EULER
INV_2PI = 1.0 / (2.0 * np.pi)


def use_backend(name):
    """Switch the Bessel backend to ``"compiled"`` or ``"numpy"``.

    Returns the name of the backend that was active before the call.
    """
    global _core, BACKEND
    previous = BACKEND
    if name == "numpy":
        _core, BACKEND = _specpy, "numpy"
    elif name == "compiled":
        from . import _speccore

        _core, BACKEND = _speccore, "compiled"
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


def bessel01(x):
    """Return ``(J0, J1, Y0, Y1, S0)`` for positive ``x``.

    ``S0`` is the entire part of ``Y0``, defined by
    ``Y0 = (2/pi) ((log(x/2) + EULER) J0 + S0)``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("Bessel functions of the second kind need x > 0")
    return _core.bessel01(x)


def bessel_j0j1y0y1(x):
    """Evaluate J0, J1, Y0 and Y1.

    Parameters
    ----------
    x : float or array_like
        Positive arguments.

    Returns
    -------
    tuple of ndarray
        ``(J0, J1, Y0, Y1)`` with the shape of ``x``.

    Raises
    ------
    ValueError
        If any argument is not strictly positive.
    """
    j0, j1, y0, y1, _ = bessel01(x)
    return j0, j1, y0, y1


def bessel_j01(x):
    """J0 and J1 on ``x >= 0`` (the second-kind functions are not formed)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    safe = np.where(x > 0, x, 1.0)
    j0, j1, *_ = _core.bessel01(safe)
    return np.where(x > 0, j0, 1.0), np.where(x > 0, j1, 0.0)


def hankel01(x):
    """Hankel functions ``H0`` and ``H1`` of the first kind."""
    j0, j1, y0, y1, _ = bessel01(x)
    return j0 + 1j * y0, j1 + 1j * y1


@dataclass(frozen=True)
class KernelValue:
    """Value and x-gradient of the Green kernel at one point pair."""

    g: complex
    grad: np.ndarray


def green_kernel_2d(kappa, x, y):
    """Outgoing Green kernel and its gradient with respect to ``x``.

    Parameters
    ----------
    kappa : float
        Positive wave number.
    x, y : array_like, shape (2,)
        Distinct points.

    Returns
    -------
    KernelValue
        ``g = (i/4) H0(kappa r)`` and
        ``grad = -(i kappa/4) H1(kappa r) (x - y)/r``.
    """
    z = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = float(np.hypot(z[0], z[1]))
    if r == 0.0:
        raise ValueError("coincident points: the kernel is singular at r = 0")
    h0, h1 = hankel01(np.array([kappa * r]))
    g = 0.25j * complex(h0[0])
    grad = (-0.25j * kappa * complex(h1[0]) / r) * z
    return KernelValue(g=g, grad=grad)


def green_and_h1(kappa, r):
    """Vectorized ``G(r)`` and ``F(r) = (i kappa/4) H1(kappa r)``.

    The gradient of G with respect to x is ``-F(r) (x - y)/r``.
    """
    h0, h1 = hankel01(kappa * np.asarray(r, dtype=float))
    return 0.25j * h0, (0.25j * kappa) * h1


def log_split(kappa, r):
    """Split the kernel into a logarithmic and a smooth part.

    ``G(r) = log_coeff(r) * log(r) + smooth(r)`` with
    ``log_coeff = -J0(kappa r)/(2 pi)`` and ``smooth`` analytic in ``r``.

    Parameters
    ----------
    kappa : float
        Positive wave number.
    r : float or array_like
        Distances, ``r >= 0``. The smooth part at ``r = 0`` is its limit.

    Returns
    -------
    smooth, log_coeff : ndarray
        Complex smooth part and real log coefficient.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    x = kappa * r
    pos = x > 0
    safe = np.where(pos, x, 1.0)
    j0, _, _, _, s0 = _core.bessel01(safe)
    j0 = np.where(pos, j0, 1.0)
    s0 = np.where(pos, s0, 0.0)
    # G = (i/4) J0 - (1/4) Y0, Y0 = (2/pi)((log(x/2)+EULER) J0 + S0)
    c = np.log(0.5 * kappa) + EULER
    smooth = 0.25j * j0 - INV_2PI * (c * j0 + s0)
    return smooth, -INV_2PI * j0
