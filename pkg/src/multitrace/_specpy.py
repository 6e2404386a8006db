"""Pure numpy evaluation of J0, J1, Y0, Y1 on positive reals.

This is the fallback for the compiled ``_speccore`` extension and follows
the same three-regime algorithm so both paths agree to rounding:

* ``x <= SERIES_MAX``: ascending power series.
* ``SERIES_MAX < x < ASYMPTOTIC_MIN``: Miller backward recurrence for
  J_n normalised by ``J0 + 2*sum(J_2k) = 1``, with Y0 and Y1 from the
  Neumann expansions in even/odd J_n.
* ``x >= ASYMPTOTIC_MIN``: Hankel asymptotic expansion in
  amplitude/phase form.

Besides the four Bessel values the routines return ``S0(x)``, the entire
part of Y0::

    Y0(x) = (2/pi) * ((log(x/2) + EULER) * J0(x) + S0(x))

which the log-split of the Green kernel needs without cancellation.
"""

import numpy as np

EULER = 0.57721566490153286061
SERIES_MAX = 2.0
ASYMPTOTIC_MIN = 25.0
_SERIES_TERMS = 22
_ASYMPTOTIC_TERMS = 48
_RESCALE = 1e200


def series_terms(xmax):
    """Number of series terms so the last term is negligible next to ``x^2/4``."""
    q = 0.25 * xmax * xmax
    term = 1.0
    for k in range(1, _SERIES_TERMS):
        term *= q / (k * k)
        if term < 1e-17 * q:
            return k + 1
    return _SERIES_TERMS


def _series(x):
    q = -0.25 * x * x
    term0 = np.ones_like(x)  # (-x^2/4)^k / (k!)^2
    term1 = 0.5 * x  # (x/2) (-x^2/4)^k / (k! (k+1)!)
    j0 = term0.copy()
    j1 = term1.copy()
    s0 = np.zeros_like(x)
    s1 = term1 * 1.0  # (H_0 + H_1) = 1 for k = 0
    harm = 0.0
    for k in range(1, series_terms(float(x.max()))):
        harm += 1.0 / k
        term0 = term0 * q / (k * k)
        term1 = term1 * q / (k * (k + 1))
        j0 += term0
        j1 += term1
        s0 -= harm * term0
        s1 += (harm + harm + 1.0 / (k + 1)) * term1
    logx = np.log(0.5 * x) + EULER
    y0 = (2.0 / np.pi) * (logx * j0 + s0)
    y1 = (2.0 / np.pi) * (logx * j1) - 2.0 / (np.pi * x) - s1 / np.pi
    return j0, j1, y0, y1, s0


def miller_start(xmax):
    """Even starting order for the backward recurrence."""
    n = int(xmax + 8.0 * xmax ** (1.0 / 3.0) + 30.0)
    return n + (n % 2)


def _miller(x):
    nstart = miller_start(float(x.max()))
    # backward recurrence J_{n-1} = (2n/x) J_n - J_{n+1}, unnormalised
    jp1 = np.zeros_like(x)
    jn = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    sy0 = np.zeros_like(x)  # sum (-1)^k J_2k / k
    sy1 = np.zeros_like(x)  # sum (-1)^k (J_2k-1 - J_2k+1) / k
    two_over_x = 2.0 / x
    for n in range(nstart, 0, -1):
        jm1 = (n * two_over_x) * jn - jp1
        if n % 2 == 0:
            k = n // 2
            c = (-1.0 if k % 2 else 1.0) / k
            norm += 2.0 * jn
            sy0 += c * jn
            sy1 += c * (jm1 - jp1)
        jp1, jn = jn, jm1
        big = np.abs(jn) > _RESCALE
        if big.any():
            scale = np.where(big, 1.0 / _RESCALE, 1.0)
            jn *= scale
            jp1 *= scale
            norm *= scale
            sy0 *= scale
            sy1 *= scale
    norm += jn
    j0 = jn / norm
    j1 = jp1 / norm
    sy0 /= norm
    sy1 /= norm
    logx = np.log(0.5 * x) + EULER
    s0 = -2.0 * sy0
    y0 = (2.0 / np.pi) * (logx * j0 + s0)
    y1 = (2.0 / np.pi) * (logx * j1 + sy1) - j0 * two_over_x / np.pi
    return j0, j1, y0, y1, s0


def _pq(x, mu):
    # t_k = a_k(nu) / x^k; P collects even k, Q odd k, alternating signs
    t = np.ones_like(x)
    p = np.ones_like(x)
    q = np.zeros_like(x)
    inv8x = 1.0 / (8.0 * x)
    for k in range(1, _ASYMPTOTIC_TERMS):
        t = t * (mu - (2 * k - 1) ** 2) * inv8x / k
        if k % 2:
            q += t if (k // 2) % 2 == 0 else -t
        else:
            p += -t if (k // 2) % 2 else t
    return p, q


def _asymptotic(x):
    amp = np.sqrt(2.0 / (np.pi * x))
    c = np.cos(x)
    s = np.sin(x)
    r2 = np.sqrt(0.5)
    # chi0 = x - pi/4, chi1 = x - 3pi/4
    c0, s0_ = r2 * (c + s), r2 * (s - c)
    c1, s1_ = r2 * (s - c), -r2 * (s + c)
    p0, q0 = _pq(x, 0.0)
    p1, q1 = _pq(x, 4.0)
    j0 = amp * (p0 * c0 - q0 * s0_)
    y0 = amp * (p0 * s0_ + q0 * c0)
    j1 = amp * (p1 * c1 - q1 * s1_)
    y1 = amp * (p1 * s1_ + q1 * c1)
    s0 = 0.5 * np.pi * y0 - (np.log(0.5 * x) + EULER) * j0
    return j0, j1, y0, y1, s0


def bessel01(x):
    """Return ``(J0, J1, Y0, Y1, S0)`` for an array of positive reals."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.ravel()
    out = [np.empty_like(x) for _ in range(5)]
    regimes = (
        (x <= SERIES_MAX, _series),
        ((x > SERIES_MAX) & (x < ASYMPTOTIC_MIN), _miller),
        (x >= ASYMPTOTIC_MIN, _asymptotic),
    )
    for mask, fn in regimes:
        if mask.any():
            for dst, val in zip(out, fn(x[mask])):
                dst[mask] = val
    return tuple(o.reshape(shape) for o in out)
