"""Pure-Python EM kernels for the four-pattern multinomial models.

These functions are the fallback implementation of the hot inner loops; a
Cython build of the same arithmetic lives in ``_core.pyx``.  Both operate on
flat float lists/arrays so the two backends stay drop-in interchangeable,
and both must keep the exact same operation order so results agree bitwise.

Variant codes: 0 = unrestricted, 1 = restricted (one phi vector plays both
roles), 2 = restricted-MAR (constant second-block missingness for cases with
the first variable missing; only theta is iterated).

Status codes returned by ``em_multinomial``: 0 = ran to the stopping rule,
1 = the starting point already has loglikelihood -inf, 2 = an E-step
denominator collapsed mid-run (degenerate likelihood reached numerically).
"""

from math import log

NEG_INF = float("-inf")

STATUS_OK = 0
STATUS_DEGENERATE_START = 1
STATUS_DEGENERATE_RUN = 2


def loglik_multinomial(J, K, n0, n1, n2, n3, theta, phi, phi0, phi1):
    """Observed-data loglikelihood; returns -inf instead of raising.

    ``n0`` and ``theta`` are row-major length J*K; ``phi0``/``phi1`` are
    length-J sequences (restricted variants pass tied vectors).
    """
    ll = 0.0
    one_m_phi = 1.0 - phi
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
                    return NEG_INF
                ll += c * log(p)
        c = n1[j]
        if c > 0.0:
            p = row * one_m_phi * phi0[j]
            if p <= 0.0:
                return NEG_INF
            ll += c * log(p)
    for k in range(K):
        c = n2[k]
        if c > 0.0:
            s = 0.0
            for j in range(J):
                s += (1.0 - phi1[j]) * theta[j * K + k]
            p = phi * s
            if p <= 0.0:
                return NEG_INF
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
            return NEG_INF
        ll += n3 * log(p)
    return ll


def e_step(variant, J, K, n0, n1, n2, n3, theta, aux, phi1_scalar):
    """Distribute the partially classified counts over the J*K cells.

    Returns (a1, a2, a3): row-major fractional allocations for the three
    incomplete patterns, or None when a needed denominator is zero against a
    positive count.  ``aux`` is phi1 (variant 0) or the shared phi vector
    (variant 1); variant 2 ignores it and uses marginal weights.
    """
    JK = J * K
    a1 = [0.0] * JK
    a2 = [0.0] * JK
    a3 = [0.0] * JK

    rows = [0.0] * J
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
                return None
            base = j * K
            for k in range(K):
                a1[base + k] = c * theta[base + k] / rows[j]

    if variant == 2:
        cols = [0.0] * K
        for k in range(K):
            s = 0.0
            for j in range(J):
                s += theta[j * K + k]
            cols[k] = s
        for k in range(K):
            c = n2[k]
            if c > 0.0:
                if cols[k] <= 0.0:
                    return None
                for j in range(J):
                    a2[j * K + k] = c * theta[j * K + k] / cols[k]
        if n3 > 0.0:
            for j in range(J):
                base = j * K
                for k in range(K):
                    a3[base + k] = n3 * theta[base + k]
        return a1, a2, a3

    for k in range(K):
        c = n2[k]
        if c > 0.0:
            den = 0.0
            for j in range(J):
                den += (1.0 - aux[j]) * theta[j * K + k]
            if den <= 0.0:
                return None
            for j in range(J):
                a2[j * K + k] = c * (1.0 - aux[j]) * theta[j * K + k] / den
    if n3 > 0.0:
        den = 0.0
        for j in range(J):
            den += aux[j] * rows[j]
        if den <= 0.0:
            return None
        for j in range(J):
            base = j * K
            for k in range(K):
                a3[base + k] = n3 * aux[j] * theta[base + k] / den
    return a1, a2, a3


def em_multinomial(variant, J, K, n0, n1, n2, n3, theta0, aux0,
                   phi, phi0, phi1_scalar, max_iters, tol_param, tol_loglik):
    """Run EM until both stopping criteria hold or ``max_iters`` is reached.

    The iterated parameters are theta plus, per variant, phi1 (0) or the
    shared phi vector (1); variant 2 iterates theta alone.  ``phi`` and
    ``phi0`` are the directly-estimated mechanism pieces, fixed throughout;
    variant 2 additionally fixes the scalar second-block probability
    ``phi1_scalar``.  The reported loglikelihood is always the full
    observed-data one under the variant's constrained mechanism.

    Returns (theta, aux, loglik, iterations, converged, status, trace) where
    trace[i] is the loglikelihood after i iterations (trace[0] = start).
    """
    JK = J * K
    theta = list(theta0)
    aux = list(aux0)
    n = n3
    for v in n0:
        n += v
    for v in n1:
        n += v
    for v in n2:
        n += v

    def current_loglik():
        if variant == 0:
            return loglik_multinomial(J, K, n0, n1, n2, n3, theta, phi, phi0, aux)
        if variant == 1:
            return loglik_multinomial(J, K, n0, n1, n2, n3, theta, phi, aux, aux)
        p1 = [phi1_scalar] * J
        return loglik_multinomial(J, K, n0, n1, n2, n3, theta, phi, phi0, p1)

    ll = current_loglik()
    trace = [ll]
    if ll == NEG_INF:
        return theta, aux, ll, 0, False, STATUS_DEGENERATE_START, trace

    rows0 = [0.0] * J
    for j in range(J):
        s = 0.0
        base = j * K
        for k in range(K):
            s += n0[base + k]
        rows0[j] = s

    converged = False
    status = STATUS_OK
    iterations = 0
    for _ in range(max_iters):
        step = e_step(variant, J, K, n0, n1, n2, n3, theta,
                      aux if variant != 2 else None, phi1_scalar)
        if step is None:
            status = STATUS_DEGENERATE_RUN
            break
        a1, a2, a3 = step
        iterations += 1

        new_theta = [0.0] * JK
        total = 0.0
        for c in range(JK):
            v = (n0[c] + a1[c] + a2[c] + a3[c]) / n
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
        theta = new_theta

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

        ll_new = current_loglik()
        trace.append(ll_new)
        if ll_new == NEG_INF:
            status = STATUS_DEGENERATE_RUN
            ll = ll_new
            break
        gain = ll_new - ll
        ll = ll_new
        if delta <= tol_param and gain <= tol_loglik:
            converged = True
            break

    return theta, aux, ll, iterations, converged, status, trace
