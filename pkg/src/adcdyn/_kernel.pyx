# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stage loop. Must stay arithmetic-for-arithmetic identical to
``_fallback.run_stages``; the build disables FP contraction for that."""

from libc.math cimport pow, fabs, isfinite


def run_stages(long k0, long k1, long s,
               double[:, :, ::1] q, double[:, :, ::1] mu, double[:, :, ::1] pi,
               double[:, ::1] v,
               const long[::1] n_actions, const long[::1] strides,
               const double[:, :, ::1] rewards, const double[:, :, ::1] trans_cdf,
               const double[:, ::1] noise_vals, const double[:, ::1] noise_cdf,
               const long[::1] noise_len,
               const double[:, ::1] agent_u, const double[:, ::1] env_u, long u_off,
               double gamma, double eps, double rho_l, double rho_a, double beta_c,
               double[::1] stats, bint check):
    cdef long n = q.shape[0]
    cdef long S = q.shape[1]
    cdef long k, i, j, x, A, b, joint, nxt, t, a_i, nz
    cdef double u, c, lam, alpha, beta, tk, r, vs, p_old, old, target, best, tq, sq, e_unif, m, dev
    cdef long acts[64]
    cdef double rew[64]
    if n > 64:
        raise ValueError("at most 64 agents")
    for k in range(k0, k1):
        t = u_off + (k - k0)
        # act
        joint = 0
        for i in range(n):
            A = n_actions[i]
            u = agent_u[i, t]
            c = 0.0
            a_i = A - 1
            for j in range(A):
                c += pi[i, s, j]
                if u < c:
                    a_i = j
                    break
            acts[i] = a_i
            joint += a_i * strides[i]
        u = env_u[t, 0]
        nxt = S - 1
        for x in range(S):
            if u < trans_cdf[s, joint, x]:
                nxt = x
                break
        for i in range(n):
            r = rewards[i, s, joint]
            nz = noise_len[i]
            if nz > 0:
                u = env_u[t, 1 + i]
                b = nz - 1
                for j in range(nz):
                    if u < noise_cdf[i, j]:
                        b = j
                        break
                r += noise_vals[i, b]
            rew[i] = r
        # update to stage k + 1 from the stage-k snapshot
        tk = k + 1.0
        lam = pow(tk, -rho_l)
        alpha = pow(tk, -rho_a)
        beta = beta_c / tk
        if beta > 1.0:
            beta = 1.0
        for i in range(n):
            A = n_actions[i]
            e_unif = eps / A
            vs = v[i, nxt]
            a_i = acts[i]
            p_old = pi[i, s, a_i]
            for x in range(S):
                best = q[i, x, 0]
                b = 0
                tq = 0.0
                sq = 0.0
                for j in range(A):
                    tq += pi[i, x, j] * q[i, x, j]
                    sq += q[i, x, j]
                    if q[i, x, j] > best:
                        best = q[i, x, j]
                        b = j
                if check:
                    # (BR(q) - pi) . q
                    dev = (1.0 - eps) * best + e_unif * sq - tq
                    if dev < stats[4]:
                        stats[4] = dev
                v[i, x] = v[i, x] + beta * (tq - v[i, x])
                for j in range(A):
                    m = mu[i, x, j]
                    if j == b:
                        m = m + alpha * (1.0 - m)
                    else:
                        m = m + alpha * (0.0 - m)
                    mu[i, x, j] = m
                    pi[i, x, j] = (1.0 - eps) * m + e_unif
            old = q[i, s, a_i]
            target = rew[i] + gamma * vs
            q[i, s, a_i] = old + lam * (target - old) / p_old
            if not isfinite(q[i, s, a_i]):
                return nxt, k
            if check:
                _check_agent(i, A, S, eps, e_unif, q, mu, pi, v, stats)
        s = nxt
    return s, -1


cdef void _check_agent(long i, long A, long S, double eps, double e_unif,
                       double[:, :, ::1] q, double[:, :, ::1] mu, double[:, :, ::1] pi,
                       double[:, ::1] v, double[::1] stats):
    cdef long x, j
    cdef double sp, sm, d
    for x in range(S):
        sp = 0.0
        sm = 0.0
        for j in range(A):
            d = fabs(pi[i, x, j] - ((1.0 - eps) * mu[i, x, j] + e_unif))
            if d > stats[0]:
                stats[0] = d
            d = pi[i, x, j] - e_unif
            if d < stats[1]:
                stats[1] = d
            if mu[i, x, j] < stats[3]:
                stats[3] = mu[i, x, j]
            d = fabs(q[i, x, j])
            if d > stats[5]:
                stats[5] = d
            sp += pi[i, x, j]
            sm += mu[i, x, j]
        d = fabs(sp - 1.0)
        if d > stats[2]:
            stats[2] = d
        d = fabs(sm - 1.0)
        if d > stats[2]:
            stats[2] = d
        d = fabs(v[i, x])
        if d > stats[6]:
            stats[6] = d
