# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled J0, J1, Y0, Y1 (and the entire part S0 of Y0) on positive reals.

Same three-regime algorithm as ``_specpy``; the Miller starting order is
chosen per element instead of per array.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin, fabs, M_PI

cnp.import_array()

cdef double EULER = 0.57721566490153286061
cdef double SERIES_MAX = 2.0
cdef double ASYMPTOTIC_MIN = 25.0
cdef int SERIES_TERMS = 22
cdef int ASYMPTOTIC_TERMS = 48
cdef double RESCALE = 1e200


cdef void _series(double x, double* out) noexcept nogil:
    cdef double q = -0.25 * x * x
    cdef double term0 = 1.0, term1 = 0.5 * x
    cdef double j0 = 1.0, j1 = term1, s0 = 0.0, s1 = term1
    cdef double harm = 0.0, logx
    cdef int k
    for k in range(1, SERIES_TERMS):
        harm += 1.0 / k
        term0 = term0 * q / (k * k)
        term1 = term1 * q / (k * (k + 1))
        j0 += term0
        j1 += term1
        s0 -= harm * term0
        s1 += (harm + harm + 1.0 / (k + 1)) * term1
        if fabs(term0) < 1e-17 * fabs(q) and fabs(term1) < 1e-17 * fabs(q) * x:
            break
    logx = log(0.5 * x) + EULER
    out[0] = j0
    out[1] = j1
    out[2] = (2.0 / M_PI) * (logx * j0 + s0)
    out[3] = (2.0 / M_PI) * (logx * j1) - 2.0 / (M_PI * x) - s1 / M_PI
    out[4] = s0


cdef void _miller(double x, double* out) noexcept nogil:
    cdef int nstart = <int>(x + 8.0 * x ** (1.0 / 3.0) + 30.0)
    nstart += nstart % 2
    cdef double jp1 = 0.0, jn = 1e-30, jm1
    cdef double norm = 0.0, sy0 = 0.0, sy1 = 0.0, c
    cdef double two_over_x = 2.0 / x
    cdef double j0, j1, logx, s0
    cdef int n, k
    for n in range(nstart, 0, -1):
        jm1 = (n * two_over_x) * jn - jp1
        if n % 2 == 0:
            k = n // 2
            c = (-1.0 if k % 2 else 1.0) / k
            norm += 2.0 * jn
            sy0 += c * jn
            sy1 += c * (jm1 - jp1)
        jp1 = jn
        jn = jm1
        if fabs(jn) > RESCALE:
            jn /= RESCALE
            jp1 /= RESCALE
            norm /= RESCALE
            sy0 /= RESCALE
            sy1 /= RESCALE
    norm += jn
    j0 = jn / norm
    j1 = jp1 / norm
    sy0 /= norm
    sy1 /= norm
    logx = log(0.5 * x) + EULER
    s0 = -2.0 * sy0
    out[0] = j0
    out[1] = j1
    out[2] = (2.0 / M_PI) * (logx * j0 + s0)
    out[3] = (2.0 / M_PI) * (logx * j1 + sy1) - j0 * two_over_x / M_PI
    out[4] = s0


cdef void _pq(double x, double mu, double* p, double* q) noexcept nogil:
    cdef double t = 1.0, inv8x = 1.0 / (8.0 * x)
    cdef int k
    p[0] = 1.0
    q[0] = 0.0
    for k in range(1, ASYMPTOTIC_TERMS):
        t = t * (mu - (2 * k - 1) * (2 * k - 1)) * inv8x / k
        if k % 2:
            if (k // 2) % 2 == 0:
                q[0] += t
            else:
                q[0] -= t
        else:
            if (k // 2) % 2:
                p[0] -= t
            else:
                p[0] += t


cdef void _asymptotic(double x, double* out) noexcept nogil:
    cdef double amp = sqrt(2.0 / (M_PI * x))
    cdef double c = cos(x), s = sin(x), r2 = sqrt(0.5)
    cdef double c0 = r2 * (c + s), s0_ = r2 * (s - c)
    cdef double c1 = r2 * (s - c), s1_ = -r2 * (s + c)
    cdef double p0, q0, p1, q1
    _pq(x, 0.0, &p0, &q0)
    _pq(x, 4.0, &p1, &q1)
    out[0] = amp * (p0 * c0 - q0 * s0_)
    out[2] = amp * (p0 * s0_ + q0 * c0)
    out[1] = amp * (p1 * c1 - q1 * s1_)
    out[3] = amp * (p1 * s1_ + q1 * c1)
    out[4] = 0.5 * M_PI * out[2] - (log(0.5 * x) + EULER) * out[0]


cdef inline void _bessel01(double x, double* out) noexcept nogil:
    if x <= SERIES_MAX:
        _series(x, out)
    elif x < ASYMPTOTIC_MIN:
        _miller(x, out)
    else:
        _asymptotic(x, out)


def bessel01(x):
    """Return ``(J0, J1, Y0, Y1, S0)`` for an array of positive reals."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    shape = arr.shape
    cdef double[::1] xv = arr.ravel()
    cdef Py_ssize_t n = xv.shape[0], i
    res = np.empty((5, n), dtype=np.float64)
    cdef double[:, ::1] r = res
    cdef double buf[5]
    with nogil:
        for i in range(n):
            _bessel01(xv[i], buf)
            r[0, i] = buf[0]
            r[1, i] = buf[1]
            r[2, i] = buf[2]
            r[3, i] = buf[3]
            r[4, i] = buf[4]
    return tuple(res[k].reshape(shape) for k in range(5))


def hankel01(x):
    """Return ``(H0, H1)`` of the first kind for an array of positive reals."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    shape = arr.shape
    cdef double[::1] xv = arr.ravel()
    cdef Py_ssize_t n = xv.shape[0], i
    h0 = np.empty(n, dtype=np.complex128)
    h1 = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] h0v = h0
    cdef double complex[::1] h1v = h1
    cdef double buf[5]
    with nogil:
        for i in range(n):
            _bessel01(xv[i], buf)
            h0v[i] = buf[0] + 1j * buf[2]
            h1v[i] = buf[1] + 1j * buf[3]
    return h0.reshape(shape), h1.reshape(shape)
