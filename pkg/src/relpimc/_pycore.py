"""Pure-Python implementation of the sampling hot loop.

This is the fallback used when the compiled ``_core`` extension is not
available. Both modules expose the same functions and perform the same
floating-point operations in the same order, so for a given stream of
uniforms they make identical accept/reject decisions.
"""

from __future__ import annotations

import math

import numpy as np

from .special_functions import _cheb_k0_k1_scaled, _temme_k0_k1, SERIES_SWITCH

BACKEND = "python"

_LOG_PI = math.log(math.pi)
_FD_REL_STEP = 1e-5

# status codes shared with the compiled core
OK = 0
NONFINITE = 1


def _k01_scaled(x):
    if x < SERIES_SWITCH:
        k0, k1 = _temme_k0_k1(x)
        ex = math.exp(x)
        return k0 * ex, k1 * ex
    return _cheb_k0_k1_scaled(x)


def _log_scaled_korder(twice_nu, z):
    if twice_nu == 2:
        return math.log(_k01_scaled(z)[1])
    if twice_nu == 3:
        return 0.5 * math.log(math.pi / (2.0 * z)) + math.log(1.0 + 1.0 / z)
    # twice_nu == 4: K_2 = K_0 + (2/z) K_1
    k0, k1 = _k01_scaled(z)
    return math.log(k0 + (2.0 / z) * k1)


def log_kernel_r2(r2, m, tau, d):
    """Log of the free relativistic kernel for squared displacement ``r2``."""
    s2 = tau * tau + r2
    if m == 0.0:
        return math.log(tau) - _LOG_PI - math.log(s2)
    s = math.sqrt(s2)
    z = m * s
    logk = _log_scaled_korder(d + 1, z) - z
    if d == 1:
        return math.log(m * tau / (math.pi * s)) + logk
    half = 0.5 * (d + 1)
    return half * math.log(m * tau / (math.pi * s)) + logk - 0.5 * (d - 1) * math.log(2.0 * tau)


def kinetic_r2(r2, m, tau, d):
    """Kinetic estimator for one link; d > 1 uses a central difference in tau."""
    if m == 0.0:
        return math.nan
    if d == 1:
        s2 = tau * tau + r2
        s = math.sqrt(s2)
        k0, k1 = _k01_scaled(m * s)
        return (m * tau / s) * (k0 / k1) + (tau * tau - r2) / (tau * s2)
    h = _FD_REL_STEP * tau
    return -(log_kernel_r2(r2, m, tau + h, d) - log_kernel_r2(r2, m, tau - h, d)) / (2.0 * h)


def _link_r2(path, i, j, d):
    r2 = 0.0
    for k in range(d):
        diff = path[j][k] - path[i][k]
        r2 += diff * diff
    return r2


def _measure(path, n, d, m, tau, pot_coef):
    kin = 0.0
    pot = 0.0
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        kin += kinetic_r2(_link_r2(path, i, j, d), m, tau, d)
        q2 = 0.0
        for k in range(d):
            q2 += path[i][k] * path[i][k]
        pot += pot_coef * q2
    return kin / n, pot / n


def segment_moves(n):
    """Number of block translations per sweep for ``n`` slices."""
    count = 0
    size = 2
    while 2 * size <= n:
        count += n // size
        size *= 2
    return count


def uniform_rows(n, segments, shift):
    """Rows of uniforms consumed per sweep."""
    return n + (segment_moves(n) if segments else 0) + (1 if shift else 0)


def run_sweeps(path, m, tau, pot_coef, width, uniforms, stride,
               out_kin=None, out_pot=None, out_paths=None, lattice=None, shift_width=0.0, segments=False):
    """Run ``uniforms.shape[0]`` sequential single-slice Metropolis sweeps in place.

    ``uniforms[s, i, :d]`` drive the proposal for slice ``i`` in sweep ``s``
    (mapped to ``width * (2u - 1)``), ``uniforms[s, i, d]`` the accept test.
    With ``segments`` the slice pass is followed by rigid translations of
    consecutive blocks of ``L = 2, 4, ...`` slices (``L <= n / 2``, blocks
    starting at multiples of ``L``), driven by rows ``n, n + 1, ...`` with the
    same ``width``; only the two boundary links and the block's potential
    enter their accept test. With ``shift_width > 0`` the sweep ends with a
    translation of the whole path, which changes no link at all, driven by
    the last row.
    With ``stride > 0`` the path is measured after every ``stride``-th sweep.
    ``lattice=(spacing, half_extent)`` rounds proposals to multiples of
    ``spacing`` and rejects positions beyond ``half_extent`` sites; test use only.

    Returns ``(accepted, proposed, status)``.
    """
    n, d = path.shape
    n_sweeps = uniforms.shape[0]
    if lattice is not None and (segments or shift_width > 0.0):
        raise ValueError("collective moves are not available in lattice mode")
    do_shift = shift_width > 0.0
    if uniforms.shape[1:] != (uniform_rows(n, segments, do_shift), d + 1):
        raise ValueError(f"uniforms must have shape (n_sweeps, "
                         f"{uniform_rows(n, segments, do_shift)}, {d + 1})")
    q = path.tolist()
    u_all = uniforms.tolist()
    links = [log_kernel_r2(_link_r2(q, i, (i + 1) % n, d), m, tau, d) for i in range(n)]
    accepted = 0
    proposed = 0
    n_meas = 0
    trial = [0.0] * d
    for sweep in range(n_sweeps):
        u_sweep = u_all[sweep]
        for i in range(n):
            u = u_sweep[i]
            ip = i - 1 if i > 0 else n - 1
            inx = i + 1 if i + 1 < n else 0
            qi = q[i]
            outside = False
            for k in range(d):
                step = width * (2.0 * u[k] - 1.0)
                if lattice is None:
                    trial[k] = qi[k] + step
                else:
                    spacing, extent = lattice
                    site = round(qi[k] / spacing) + round(step / spacing)
                    if abs(site) > extent:
                        outside = True
                    trial[k] = site * spacing
            proposed += 1
            if outside:
                continue
            qp = q[ip]
            qn = q[inx]
            r2_prev = 0.0
            r2_next = 0.0
            q2_old = 0.0
            q2_new = 0.0
            for k in range(d):
                a = trial[k] - qp[k]
                b = qn[k] - trial[k]
                r2_prev += a * a
                r2_next += b * b
                q2_old += qi[k] * qi[k]
                q2_new += trial[k] * trial[k]
            new_prev = log_kernel_r2(r2_prev, m, tau, d)
            new_next = log_kernel_r2(r2_next, m, tau, d)
            delta = (new_prev + new_next - tau * pot_coef * q2_new) - (
                links[ip] + links[i] - tau * pot_coef * q2_old)
            if not math.isfinite(delta):
                path[:] = np.asarray(q)
                return accepted, proposed, NONFINITE
            if delta >= 0.0 or u[d] < math.exp(delta):
                for k in range(d):
                    qi[k] = trial[k]
                links[ip] = new_prev
                links[i] = new_next
                accepted += 1
        row = n
        if segments:
            size = 2
            while 2 * size <= n:
                for a in range(0, n - size + 1, size):
                    u = u_sweep[row]
                    row += 1
                    b = a + size - 1
                    ap = a - 1 if a > 0 else n - 1
                    bn = b + 1 if b + 1 < n else 0
                    s_dot = 0.0
                    d2 = 0.0
                    r2_prev = 0.0
                    r2_next = 0.0
                    for k in range(d):
                        trial[k] = width * (2.0 * u[k] - 1.0)
                        total = 0.0
                        for i in range(a, b + 1):
                            total += q[i][k]
                        s_dot += trial[k] * total
                        d2 += trial[k] * trial[k]
                        x = q[a][k] + trial[k] - q[ap][k]
                        y = q[bn][k] - (q[b][k] + trial[k])
                        r2_prev += x * x
                        r2_next += y * y
                    new_prev = log_kernel_r2(r2_prev, m, tau, d)
                    new_next = log_kernel_r2(r2_next, m, tau, d)
                    delta = (new_prev + new_next - tau * pot_coef * (2.0 * s_dot + size * d2)) - (
                        links[ap] + links[b])
                    if not math.isfinite(delta):
                        path[:] = np.asarray(q)
                        return accepted, proposed, NONFINITE
                    if delta >= 0.0 or u[d] < math.exp(delta):
                        for i in range(a, b + 1):
                            qi = q[i]
                            for k in range(d):
                                qi[k] += trial[k]
                        links[ap] = new_prev
                        links[b] = new_next
                size *= 2
        if do_shift:
            u = u_sweep[row]
            s_dot = 0.0
            d2 = 0.0
            for k in range(d):
                trial[k] = shift_width * (2.0 * u[k] - 1.0)
                total = 0.0
                for i in range(n):
                    total += q[i][k]
                s_dot += trial[k] * total
                d2 += trial[k] * trial[k]
            delta = -tau * pot_coef * (2.0 * s_dot + n * d2)
            if not math.isfinite(delta):
                path[:] = np.asarray(q)
                return accepted, proposed, NONFINITE
            if delta >= 0.0 or u[d] < math.exp(delta):
                for i in range(n):
                    qi = q[i]
                    for k in range(d):
                        qi[k] += trial[k]
        if stride > 0 and (sweep + 1) % stride == 0:
            if out_kin is not None:
                out_kin[n_meas], out_pot[n_meas] = _measure(q, n, d, m, tau, pot_coef)
            if out_paths is not None:
                out_paths[n_meas] = q
            n_meas += 1
    path[:] = np.asarray(q)
    return accepted, proposed, OK


def measure(path, m, tau, pot_coef):
    """Path-averaged ``(kinetic, potential)`` estimator values for one path."""
    n, d = path.shape
    return _measure(path.tolist(), n, d, m, tau, pot_coef)
