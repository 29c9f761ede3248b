# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sampling hot loop. Mirrors ``_pycore`` operation for operation."""

from libc.math cimport exp, fabs, log, sqrt, M_PI, NAN, isfinite

import numpy as np

BACKEND = "cython"

cdef enum:
    STATUS_OK = 0
    STATUS_NONFINITE = 1

OK = STATUS_OK
NONFINITE = STATUS_NONFINITE

cdef double EULER_GAMMA = 0.57721566490153286061
cdef double SERIES_SWITCH = 2.0
cdef double EPS = 1e-16
cdef int MAXITER = 100000
cdef double LOG_PI = log(M_PI)
cdef double FD_REL_STEP = 1e-5

# coefficient tables are shared with the Python implementation
from .special_functions import _CHEB_K0, _CHEB_K1

cdef enum:
    N_CHEB = 28
cdef double CHEB_K0[N_CHEB]
cdef double CHEB_K1[N_CHEB]
assert len(_CHEB_K0) == N_CHEB and len(_CHEB_K1) == N_CHEB
for _j in range(N_CHEB):
    CHEB_K0[_j] = _CHEB_K0[_j]
    CHEB_K1[_j] = _CHEB_K1[_j]


cdef void temme_k0_k1(double x, double* k0, double* k1) noexcept nogil:
    cdef double x2 = 0.5 * x
    cdef double ff = -EULER_GAMMA - log(x2)
    cdef double total = ff
    cdef double p = 0.5
    cdef double q = 0.5
    cdef double c = 1.0
    cdef double d = x2 * x2
    cdef double total1 = p
    cdef double fi, delta, delta1
    cdef int i = 1
    while i < MAXITER:
        fi = <double>i
        ff = (fi * ff + p + q) / (fi * fi)
        c *= d / fi
        p /= fi
        q /= fi
        delta = c * ff
        total += delta
        delta1 = c * (p - fi * ff)
        total1 += delta1
        if fabs(delta) < fabs(total) * EPS:
            break
        i += 1
    k0[0] = total
    k1[0] = total1 * (2.0 / x)


cdef double cheb_eval(double* coefs, int n, double t) noexcept nogil:
    cdef double b0
    cdef double b1 = 0.0
    cdef double b2 = 0.0
    cdef double t2 = 2.0 * t
    cdef int j
    for j in range(n - 1, 0, -1):
        b0 = t2 * b1 - b2 + coefs[j]
        b2 = b1
        b1 = b0
    return t * b1 - b2 + coefs[0]


cdef void cheb_k0_k1_scaled(double x, double* k0, double* k1) noexcept nogil:
    cdef double t = 4.0 / x - 1.0
    cdef double r = 1.0 / sqrt(x)
    k0[0] = cheb_eval(CHEB_K0, N_CHEB, t) * r
    k1[0] = cheb_eval(CHEB_K1, N_CHEB, t) * r


cdef inline void k01_scaled(double x, double* k0, double* k1) noexcept nogil:
    cdef double ex
    if x < SERIES_SWITCH:
        temme_k0_k1(x, k0, k1)
        ex = exp(x)
        k0[0] = k0[0] * ex
        k1[0] = k1[0] * ex
    else:
        cheb_k0_k1_scaled(x, k0, k1)


cdef double log_scaled_korder(int twice_nu, double z) noexcept nogil:
    cdef double k0, k1
    if twice_nu == 3:
        return 0.5 * log(M_PI / (2.0 * z)) + log(1.0 + 1.0 / z)
    if twice_nu == 2 and z >= SERIES_SWITCH:
        # K_1 alone; the K_0 series is not needed for the d = 1 kernel
        return log(cheb_eval(CHEB_K1, N_CHEB, 4.0 / z - 1.0) * (1.0 / sqrt(z)))
    k01_scaled(z, &k0, &k1)
    if twice_nu == 2:
        return log(k1)
    return log(k0 + (2.0 / z) * k1)


cdef double c_log_kernel(double r2, double m, double tau, int d) noexcept nogil:
    cdef double s2 = tau * tau + r2
    cdef double s, z, logk, half
    if m == 0.0:
        return log(tau) - LOG_PI - log(s2)
    s = sqrt(s2)
    z = m * s
    logk = log_scaled_korder(d + 1, z) - z
    if d == 1:
        return log(m * tau / (M_PI * s)) + logk
    half = 0.5 * (d + 1)
    return half * log(m * tau / (M_PI * s)) + logk - 0.5 * (d - 1) * log(2.0 * tau)


cdef double c_kinetic(double r2, double m, double tau, int d) noexcept nogil:
    cdef double s2, s, k0, k1, h
    if m == 0.0:
        return NAN
    if d == 1:
        s2 = tau * tau + r2
        s = sqrt(s2)
        k01_scaled(m * s, &k0, &k1)
        return (m * tau / s) * (k0 / k1) + (tau * tau - r2) / (tau * s2)
    h = FD_REL_STEP * tau
    return -(c_log_kernel(r2, m, tau + h, d) - c_log_kernel(r2, m, tau - h, d)) / (2.0 * h)


cdef void c_measure(double[:, ::1] q, int n, int d, double m, double tau, double pot_coef,
                    double* kin_out, double* pot_out) noexcept nogil:
    cdef double kin = 0.0
    cdef double pot = 0.0
    cdef double r2, q2, diff
    cdef int i, j, k
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        r2 = 0.0
        for k in range(d):
            diff = q[j, k] - q[i, k]
            r2 += diff * diff
        kin += c_kinetic(r2, m, tau, d)
        q2 = 0.0
        for k in range(d):
            q2 += q[i, k] * q[i, k]
        pot += pot_coef * q2
    kin_out[0] = kin / n
    pot_out[0] = pot / n


def scaled_k0_k1(double x):
    cdef double k0, k1
    k01_scaled(x, &k0, &k1)
    return k0, k1


def log_kernel_r2(double r2, double m, double tau, int d):
    return c_log_kernel(r2, m, tau, d)


def kinetic_r2(double r2, double m, double tau, int d):
    return c_kinetic(r2, m, tau, d)


def measure(double[:, ::1] path, double m, double tau, double pot_coef):
    cdef double kin, pot
    c_measure(path, path.shape[0], path.shape[1], m, tau, pot_coef, &kin, &pot)
    return kin, pot


def segment_moves(int n):
    cdef int count = 0
    cdef int size = 2
    while 2 * size <= n:
        count += n // size
        size *= 2
    return count


def uniform_rows(int n, bint segments, bint shift):
    return n + (segment_moves(n) if segments else 0) + (1 if shift else 0)


def run_sweeps(double[:, ::1] path, double m, double tau, double pot_coef, double width,
               const double[:, :, ::1] uniforms, int stride,
               double[::1] out_kin=None, double[::1] out_pot=None,
               double[:, :, ::1] out_paths=None, lattice=None, double shift_width=0.0,
               bint segments=False):
    """Compiled equivalent of ``_pycore.run_sweeps`` (no lattice mode)."""
    if lattice is not None:
        raise NotImplementedError("lattice mode is only available in the Python core")
    if not 1 <= path.shape[1] <= 3:
        raise ValueError("dimension must be 1, 2 or 3")
    cdef int n = path.shape[0]
    cdef int d = path.shape[1]
    cdef Py_ssize_t n_sweeps = uniforms.shape[0]
    cdef bint do_shift = shift_width > 0.0
    rows = uniform_rows(n, segments, do_shift)
    if uniforms.shape[1] != rows or uniforms.shape[2] != d + 1:
        raise ValueError(f"uniforms must have shape (n_sweeps, {rows}, {d + 1})")
    cdef bint want_obs = out_kin is not None
    cdef bint want_paths = out_paths is not None
    cdef double[::1] links = np.zeros(n, dtype=np.float64)
    cdef double trial[3]
    cdef long accepted = 0
    cdef long proposed = 0
    cdef Py_ssize_t sweep, n_meas = 0
    cdef int i, ip, inx, k, status = STATUS_OK
    cdef double r2, diff, a, b, r2_prev, r2_next, q2_old, q2_new
    cdef double new_prev, new_next, delta, kin, pot, s_dot, d2, total, x, y
    cdef int row, size, lo, hi, lo_prev, hi_next

    with nogil:
        for i in range(n):
            inx = i + 1 if i + 1 < n else 0
            r2 = 0.0
            for k in range(d):
                diff = path[inx, k] - path[i, k]
                r2 += diff * diff
            links[i] = c_log_kernel(r2, m, tau, d)

        for sweep in range(n_sweeps):
            for i in range(n):
                ip = i - 1 if i > 0 else n - 1
                inx = i + 1 if i + 1 < n else 0
                for k in range(d):
                    trial[k] = path[i, k] + width * (2.0 * uniforms[sweep, i, k] - 1.0)
                proposed += 1
                r2_prev = 0.0
                r2_next = 0.0
                q2_old = 0.0
                q2_new = 0.0
                for k in range(d):
                    a = trial[k] - path[ip, k]
                    b = path[inx, k] - trial[k]
                    r2_prev += a * a
                    r2_next += b * b
                    q2_old += path[i, k] * path[i, k]
                    q2_new += trial[k] * trial[k]
                new_prev = c_log_kernel(r2_prev, m, tau, d)
                new_next = c_log_kernel(r2_next, m, tau, d)
                delta = (new_prev + new_next - tau * pot_coef * q2_new) - (
                    links[ip] + links[i] - tau * pot_coef * q2_old)
                if not isfinite(delta):
                    status = STATUS_NONFINITE
                    break
                if delta >= 0.0 or uniforms[sweep, i, d] < exp(delta):
                    for k in range(d):
                        path[i, k] = trial[k]
                    links[ip] = new_prev
                    links[i] = new_next
                    accepted += 1
            if status != STATUS_OK:
                break
            row = n
            if segments:
                size = 2
                while 2 * size <= n:
                    lo = 0
                    while lo + size <= n:
                        hi = lo + size - 1
                        lo_prev = lo - 1 if lo > 0 else n - 1
                        hi_next = hi + 1 if hi + 1 < n else 0
                        s_dot = 0.0
                        d2 = 0.0
                        r2_prev = 0.0
                        r2_next = 0.0
                        for k in range(d):
                            trial[k] = width * (2.0 * uniforms[sweep, row, k] - 1.0)
                            total = 0.0
                            for i in range(lo, hi + 1):
                                total += path[i, k]
                            s_dot += trial[k] * total
                            d2 += trial[k] * trial[k]
                            x = path[lo, k] + trial[k] - path[lo_prev, k]
                            y = path[hi_next, k] - (path[hi, k] + trial[k])
                            r2_prev += x * x
                            r2_next += y * y
                        new_prev = c_log_kernel(r2_prev, m, tau, d)
                        new_next = c_log_kernel(r2_next, m, tau, d)
                        delta = (new_prev + new_next - tau * pot_coef * (2.0 * s_dot + size * d2)) - (
                            links[lo_prev] + links[hi])
                        if not isfinite(delta):
                            status = STATUS_NONFINITE
                            break
                        if delta >= 0.0 or uniforms[sweep, row, d] < exp(delta):
                            for i in range(lo, hi + 1):
                                for k in range(d):
                                    path[i, k] += trial[k]
                            links[lo_prev] = new_prev
                            links[hi] = new_next
                        row += 1
                        lo += size
                    if status != STATUS_OK:
                        break
                    size *= 2
                if status != STATUS_OK:
                    break
            if do_shift:
                s_dot = 0.0
                d2 = 0.0
                for k in range(d):
                    trial[k] = shift_width * (2.0 * uniforms[sweep, row, k] - 1.0)
                    total = 0.0
                    for i in range(n):
                        total += path[i, k]
                    s_dot += trial[k] * total
                    d2 += trial[k] * trial[k]
                delta = -tau * pot_coef * (2.0 * s_dot + n * d2)
                if not isfinite(delta):
                    status = STATUS_NONFINITE
                    break
                if delta >= 0.0 or uniforms[sweep, row, d] < exp(delta):
                    for i in range(n):
                        for k in range(d):
                            path[i, k] += trial[k]
            if stride > 0 and (sweep + 1) % stride == 0:
                if want_obs:
                    c_measure(path, n, d, m, tau, pot_coef, &kin, &pot)
                    out_kin[n_meas] = kin
                    out_pot[n_meas] = pot
                if want_paths:
                    for i in range(n):
                        for k in range(d):
                            out_paths[n_meas, i, k] = path[i, k]
                n_meas += 1
    return accepted, proposed, status
