"""Independent reference values used by the tests.

Nothing here imports the package under test.
"""

import math

import mpmath as mp
import numpy as np
from scipy import special as sp


def _dps_for(x):
    # The alternating power series loses about x / ln(10) digits to cancellation.
    return int(40 + float(x) / math.log(10))


def bessel_series(x):
    """J0, J1, Y0, Y1 at ``x > 0`` from power series in extended precision.

    Returns
    -------
    tuple of float
    """
    with mp.workdps(_dps_for(x)):
        x = mp.mpf(x)
        q = (x / 2) ** 2
        tol = mp.mpf(10) ** (-mp.mp.dps + 5)
        j0 = j1 = mp.mpf(0)
        y0s = y1s = mp.mpf(0)
        term0 = mp.mpf(1)  # (-q)^k / (k!)^2
        term1 = x / 2  # (-1)^k (x/2)^(2k+1) / (k! (k+1)!)
        hk = mp.mpf(0)  # harmonic number H_k
        k = 0
        while True:
            j0 += term0
            j1 += term1
            y0s += hk * term0
            y1s += (2 * hk + mp.mpf(1) / (k + 1)) * term1
            k += 1
            hk += mp.mpf(1) / k
            term0 = -term0 * q / (k * k)
            term1 = -term1 * q / (k * (k + 1))
            if k > 5 and abs(term0) < tol * abs(j0) + tol and abs(term1) < tol * abs(j1) + tol:
                break
        lg = mp.log(x / 2) + mp.euler
        y0 = 2 / mp.pi * (lg * j0 - y0s)
        y1 = 2 / mp.pi * lg * j1 - 2 / (mp.pi * x) - y1s / mp.pi
        return float(j0), float(j1), float(y0), float(y1)


def circle_transmission_field(points, k0, k1, radius=1.0, modes=40, direction_angle=0.0):
    """Total field of a plane wave hitting a penetrable disc.

    Interior ``sum a_m J_m(k1 r) e^{i m t}``; exterior
    ``sum (i^m J_m(k0 r) + b_m H_m(k0 r)) e^{i m t}``, angles measured from
    the incidence direction. Coefficients solve the 2x2 continuity system of
    each mode.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.hypot(pts[:, 0], pts[:, 1])
    t = np.arctan2(pts[:, 1], pts[:, 0]) - direction_angle
    out = np.zeros(len(pts), dtype=complex)
    a = radius
    for m in range(-modes, modes + 1):
        A = np.array(
            [
                [sp.jv(m, k1 * a), -sp.hankel1(m, k0 * a)],
                [k1 * sp.jvp(m, k1 * a), -k0 * sp.h1vp(m, k0 * a)],
            ]
        )
        rhs = 1j**m * np.array([sp.jv(m, k0 * a), k0 * sp.jvp(m, k0 * a)])
        am, bm = np.linalg.solve(A, rhs)
        ph = np.exp(1j * m * t)
        inside = r < a
        out[inside] += am * sp.jv(m, k1 * r[inside]) * ph[inside]
        out[~inside] += (
            1j**m * sp.jv(m, k0 * r[~inside]) + bm * sp.hankel1(m, k0 * r[~inside])
        ) * ph[~inside]
    return out


def single_layer_symbol(m, kappa, radius=1.0):
    """Eigenvalue of the single layer on a circle for the mode ``e^{i m t}``."""
    return 1j * math.pi / 2 * radius * sp.jv(m, kappa * radius) * sp.hankel1(m, kappa * radius)


def p1_calderon_deviation(samples=999, aliases=2000):
    """Distances of the discrete Calderon eigenvalues to +-1 on a uniform P1 circle.

    Uses the Laplace symbols ``1/(2|k|)`` and ``|k|/2`` of the single layer and
    hypersingular operators, folded over the P1 aliases with weight
    ``sinc^4``. Returns the deviation per sampled discrete frequency.
    """
    th = (np.arange(1, samples + 1) + 0.5) / (samples + 1) * np.pi
    j = np.arange(-aliases, aliases + 1)
    tj = th[:, None] + 2 * np.pi * j[None, :]
    w = np.sinc(tj / (2 * np.pi)) ** 4
    v = (w / (2 * np.abs(tj))).sum(axis=1)
    hs = (w * np.abs(tj) / 2).sum(axis=1)
    mass = w.sum(axis=1)
    return 2 * np.sqrt(v * hs) / mass - 1
