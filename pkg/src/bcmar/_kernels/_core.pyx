# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled EM kernels; arithmetic mirrors ``pure.py`` operation for
operation so the two backends agree bitwise."""

from libc.math cimport log, INFINITY

import numpy as np

NEG_INF = -INFINITY

STATUS_OK = 0
STATUS_DEGENERATE_START = 1
STATUS_DEGENERATE_RUN = 2


cdef double _loglik(int J, int K, double[::1] n0, double[::1] n1,
                    double[::1] n2, double n3, double[::1] theta,
                    double phi, double[::1] phi0, double[::1] phi1) nogil:
    cdef double ll = 0.0
    cdef double one_m_phi = 1.0 - phi
    cdef double row, t, c, p, s
    cdef int j, k, base
    for j in range(J):
        row = 0.0
        base = j * K
        for k in range(K):
            t = theta[base + k]
            row += t
            c = n0[base + k]
            if c > 0.0:
                p = t * one_m_phi * (1.0 - phi0[j])
                if p <= 0.0:
                    return -INFINITY
                ll += c * log(p)
        c = n1[j]
        if c > 0.0:
            p = row * one_m_phi * phi0[j]
            if p <= 0.0:
                return -INFINITY
            ll += c * log(p)
    for k in range(K):
        c = n2[k]
        if c > 0.0:
            s = 0.0
            for j in range(J):
                s += (1.0 - phi1[j]) * theta[j * K + k]
            p = phi * s
            if p <= 0.0:
                return -INFINITY
            ll += c * log(p)
    if n3 > 0.0:
        s = 0.0
        for j in range(J):
            row = 0.0
            base = j * K
            for k in range(K):
                row += theta[base + k]
            s += phi1[j] * row
        p = phi * s
        if p <= 0.0:
            return -INFINITY
        ll += n3 * log(p)
    return ll


cdef double[::1] _f64(object x):
    return np.ascontiguousarray(x, dtype=np.float64)


def loglik_multinomial(int J, int K, n0, n1, n2, double n3, theta,
                       double phi, phi0, phi1):
    return _loglik(J, K, _f64(n0), _f64(n1), _f64(n2), n3, _f64(theta),
                   phi, _f64(phi0), _f64(phi1))


cdef int _e_step(int variant, int J, int K, double[::1] n0, double[::1] n1,
                 double[::1] n2, double n3, double[::1] theta,
                 double[::1] aux, double[::1] a1, double[::1] a2,
                 double[::1] a3, double[::1] rows, double[::1] cols) nogil:
    """Fill a1/a2/a3; returns 0 on success, -1 on a dead denominator."""
    cdef int JK = J * K
    cdef int j, k, base
    cdef double s, c, den
    for j in range(JK):
        a1[j] = 0.0
        a2[j] = 0.0
        a3[j] = 0.0

    for j in range(J):
        s = 0.0
        base = j * K
        for k in range(K):
            s += theta[base + k]
        rows[j] = s

    for j in range(J):
        c = n1[j]
        if c > 0.0:
            if rows[j] <= 0.0:
                return -1
            base = j * K
            for k in range(K):
                a1[base + k] = c * theta[base + k] / rows[j]

    if variant == 2:
        for k in range(K):
            s = 0.0
            for j in range(J):
                s += theta[j * K + k]
            cols[k] = s
        for k in range(K):
            c = n2[k]
            if c > 0.0:
                if cols[k] <= 0.0:
                    return -1
                for j in range(J):
                    a2[j * K + k] = c * theta[j * K + k] / cols[k]
        if n3 > 0.0:
            for j in range(J):
                base = j * K
                for k in range(K):
                    a3[base + k] = n3 * theta[base + k]
        return 0

    for k in range(K):
        c = n2[k]
        if c > 0.0:
            den = 0.0
            for j in range(J):
                den += (1.0 - aux[j]) * theta[j * K + k]
            if den <= 0.0:
                return -1
            for j in range(J):
                a2[j * K + k] = c * (1.0 - aux[j]) * theta[j * K + k] / den
    if n3 > 0.0:
        den = 0.0
        for j in range(J):
            den += aux[j] * rows[j]
        if den <= 0.0:
            return -1
        for j in range(J):
            base = j * K
            for k in range(K):
                a3[base + k] = n3 * aux[j] * theta[base + k] / den
    return 0


def e_step(int variant, int J, int K, n0, n1, n2, double n3, theta, aux,
           double phi1_scalar):
    cdef double[::1] theta_v = _f64(theta)
    cdef double[::1] aux_v
    if aux is None:
        aux_v = np.zeros(J, dtype=np.float64)
    else:
        aux_v = _f64(aux)
    cdef int JK = J * K
    a1 = np.zeros(JK, dtype=np.float64)
    a2 = np.zeros(JK, dtype=np.float64)
    a3 = np.zeros(JK, dtype=np.float64)
    rows = np.zeros(J, dtype=np.float64)
    cols = np.zeros(K, dtype=np.float64)
    cdef int rc = _e_step(variant, J, K, _f64(n0), _f64(n1), _f64(n2), n3,
                          theta_v, aux_v, a1, a2, a3, rows, cols)
    if rc != 0:
        return None
    return a1.tolist(), a2.tolist(), a3.tolist()


def em_multinomial(int variant, int J, int K, n0, n1, n2, double n3,
                   theta0, aux0, double phi, phi0, double phi1_scalar,
                   int max_iters, double tol_param, double tol_loglik):
    cdef double[::1] n0_v = _f64(n0)
    cdef double[::1] n1_v = _f64(n1)
    cdef double[::1] n2_v = _f64(n2)
    cdef double[::1] phi0_v = _f64(phi0)
    cdef int JK = J * K
    theta_arr = np.array(theta0, dtype=np.float64).ravel()
    aux_arr = np.array(aux0, dtype=np.float64).ravel()
    cdef double[::1] theta = theta_arr
    cdef double[::1] aux = aux_arr
    cdef double[::1] new_theta = np.zeros(JK, dtype=np.float64)
    cdef double[::1] a1 = np.zeros(JK, dtype=np.float64)
    cdef double[::1] a2 = np.zeros(JK, dtype=np.float64)
    cdef double[::1] a3 = np.zeros(JK, dtype=np.float64)
    cdef double[::1] rows = np.zeros(J, dtype=np.float64)
    cdef double[::1] cols = np.zeros(K, dtype=np.float64)
    cdef double[::1] rows0 = np.zeros(J, dtype=np.float64)
    cdef double[::1] p1 = np.zeros(J, dtype=np.float64)

    cdef double n = n3
    cdef int c, j, k, base
    for c in range(JK):
        n += n0_v[c]
    for j in range(J):
        n += n1_v[j]
    for k in range(K):
        n += n2_v[k]

    cdef double ll, ll_new, gain, total, v, d, delta, s1, s2, s3, den
    cdef int it, rc
    cdef bint converged = False
    cdef int status = STATUS_OK
    cdef int iterations = 0

    for j in range(J):
        p1[j] = phi1_scalar

    if variant == 0:
        ll = _loglik(J, K, n0_v, n1_v, n2_v, n3, theta, phi, phi0_v, aux)
    elif variant == 1:
        ll = _loglik(J, K, n0_v, n1_v, n2_v, n3, theta, phi, aux, aux)
    else:
        ll = _loglik(J, K, n0_v, n1_v, n2_v, n3, theta, phi, phi0_v, p1)
    trace = [ll]
    if ll == -INFINITY:
        return (theta_arr.tolist(), aux_arr.tolist(), ll, 0, False,
                STATUS_DEGENERATE_START, trace)

    for j in range(J):
        s1 = 0.0
        base = j * K
        for k in range(K):
            s1 += n0_v[base + k]
        rows0[j] = s1

    for it in range(max_iters):
        rc = _e_step(variant, J, K, n0_v, n1_v, n2_v, n3, theta,
                     aux, a1, a2, a3, rows, cols)
        if rc != 0:
            status = STATUS_DEGENERATE_RUN
            break
        iterations += 1

        total = 0.0
        for c in range(JK):
            v = (n0_v[c] + a1[c] + a2[c] + a3[c]) / n
            new_theta[c] = v
            total += v
        for c in range(JK):
            new_theta[c] /= total

        delta = 0.0
        for c in range(JK):
            d = new_theta[c] - theta[c]
            if d < 0.0:
                d = -d
            if d > delta:
                delta = d
            theta[c] = new_theta[c]

        if variant == 0:
            for j in range(J):
                s2 = 0.0
                s3 = 0.0
                base = j * K
                for k in range(K):
                    s2 += a2[base + k]
                    s3 += a3[base + k]
                den = s2 + s3
                if den > 0.0:
                    v = s3 / den
                    d = v - aux[j]
                    if d < 0.0:
                        d = -d
                    if d > delta:
                        delta = d
                    aux[j] = v
        elif variant == 1:
            for j in range(J):
                s1 = 0.0
                s2 = 0.0
                s3 = 0.0
                base = j * K
                for k in range(K):
                    s1 += a1[base + k]
                    s2 += a2[base + k]
                    s3 += a3[base + k]
                den = rows0[j] + s1 + s2 + s3
                if den > 0.0:
                    v = (s1 + s3) / den
                    d = v - aux[j]
                    if d < 0.0:
                        d = -d
                    if d > delta:
                        delta = d
                    aux[j] = v

        if variant == 0:
            ll_new = _loglik(J, K, n0_v, n1_v, n2_v, n3, theta, phi, phi0_v, aux)
        elif variant == 1:
            ll_new = _loglik(J, K, n0_v, n1_v, n2_v, n3, theta, phi, aux, aux)
        else:
            ll_new = _loglik(J, K, n0_v, n1_v, n2_v, n3, theta, phi, phi0_v, p1)
        trace.append(ll_new)
        if ll_new == -INFINITY:
            status = STATUS_DEGENERATE_RUN
            ll = ll_new
            break
        gain = ll_new - ll
        ll = ll_new
        if delta <= tol_param and gain <= tol_loglik:
            converged = True
            break

    return (theta_arr.tolist(), aux_arr.tolist(), ll, iterations, converged,
            status, trace)
