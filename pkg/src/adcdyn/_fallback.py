"""Pure-Python stage loop, used when the compiled kernel is unavailable.

Same signature and the same floating-point operation order as
``_kernel.run_stages``; arrays are mutated in place.
"""

from __future__ import annotations

import math


def run_stages(k0, k1, s, q, mu, pi, v, n_actions, strides, rewards, trans_cdf,
               noise_vals, noise_cdf, noise_len, agent_u, env_u, u_off,
               gamma, eps, rho_l, rho_a, beta_c, stats, check):
    n, S = q.shape[0], q.shape[1]
    Q, MU, PI, V = q.tolist(), mu.tolist(), pi.tolist(), v.tolist()
    n_act = [int(a) for a in n_actions]
    strd = [int(x) for x in strides]
    R = rewards.tolist()
    TC = trans_cdf.tolist()
    NV, NC, NL = noise_vals.tolist(), noise_cdf.tolist(), [int(x) for x in noise_len]
    st = stats.tolist()
    AU = agent_u[:, u_off:u_off + (k1 - k0)].tolist()
    EU = env_u[u_off:u_off + (k1 - k0)].tolist()
    bad = -1
    try:
        for k in range(k0, k1):
            t = k - k0
            acts = []
            joint = 0
            for i in range(n):
                A = n_act[i]
                u = AU[i][t]
                c = 0.0
                a_i = A - 1
                row = PI[i][s]
                for j in range(A):
                    c += row[j]
                    if u < c:
                        a_i = j
                        break
                acts.append(a_i)
                joint += a_i * strd[i]
            eu = EU[t]
            u = eu[0]
            nxt = S - 1
            cdf = TC[s][joint]
            for x in range(S):
                if u < cdf[x]:
                    nxt = x
                    break
            rew = []
            for i in range(n):
                r = R[i][s][joint]
                nz = NL[i]
                if nz > 0:
                    u = eu[1 + i]
                    b = nz - 1
                    for j in range(nz):
                        if u < NC[i][j]:
                            b = j
                            break
                    r += NV[i][b]
                rew.append(r)

            tk = k + 1.0
            lam = math.pow(tk, -rho_l)
            alpha = math.pow(tk, -rho_a)
            beta = beta_c / tk
            if beta > 1.0:
                beta = 1.0
            for i in range(n):
                A = n_act[i]
                e_unif = eps / A
                Qi, MUi, PIi, Vi = Q[i], MU[i], PI[i], V[i]
                vs = Vi[nxt]
                a_i = acts[i]
                p_old = PIi[s][a_i]
                for x in range(S):
                    qx, px, mx = Qi[x], PIi[x], MUi[x]
                    best = qx[0]
                    b = 0
                    tq = 0.0
                    sq = 0.0
                    for j in range(A):
                        tq += px[j] * qx[j]
                        sq += qx[j]
                        if qx[j] > best:
                            best = qx[j]
                            b = j
                    if check:
                        dev = (1.0 - eps) * best + e_unif * sq - tq
                        if dev < st[4]:
                            st[4] = dev
                    Vi[x] = Vi[x] + beta * (tq - Vi[x])
                    for j in range(A):
                        m = mx[j]
                        if j == b:
                            m = m + alpha * (1.0 - m)
                        else:
                            m = m + alpha * (0.0 - m)
                        mx[j] = m
                        px[j] = (1.0 - eps) * m + e_unif
                old = Qi[s][a_i]
                target = rew[i] + gamma * vs
                Qi[s][a_i] = old + lam * (target - old) / p_old
                if not math.isfinite(Qi[s][a_i]):
                    bad = k
                    s = nxt
                    return s, bad
                if check:
                    _check_agent(A, S, eps, e_unif, Qi, MUi, PIi, Vi, st)
            s = nxt
        return s, bad
    finally:
        for i in range(n):
            A = n_act[i]
            for x in range(S):
                q[i, x, :A] = Q[i][x][:A]
                mu[i, x, :A] = MU[i][x][:A]
                pi[i, x, :A] = PI[i][x][:A]
            v[i, :] = V[i]
        stats[:] = st


def _check_agent(A, S, eps, e_unif, Qi, MUi, PIi, Vi, st):
    for x in range(S):
        sp = 0.0
        sm = 0.0
        for j in range(A):
            p, m = PIi[x][j], MUi[x][j]
            d = abs(p - ((1.0 - eps) * m + e_unif))
            if d > st[0]:
                st[0] = d
            d = p - e_unif
            if d < st[1]:
                st[1] = d
            if m < st[3]:
                st[3] = m
            d = abs(Qi[x][j])
            if d > st[5]:
                st[5] = d
            sp += p
            sm += m
        d = abs(sp - 1.0)
        if d > st[2]:
            st[2] = d
        d = abs(sm - 1.0)
        if d > st[2]:
            st[2] = d
        d = abs(Vi[x])
        if d > st[6]:
            st[6] = d
