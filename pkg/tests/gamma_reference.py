"""Second, loop-based transcription of the stability margins.

Written from the formulas independently of lvts.analysis: plain Python
floats and explicit index loops, no numpy and no shared helpers.
"""
import math


def gamma_reference(st, bounds):
    n, m, mu = st.n, st.m, st.mu_bar
    aU = st.sup["a"].tolist(); aL = st.inf["a"].tolist(); cU = st.sup["c"].tolist()
    dU = st.sup["d"].tolist(); eU = st.sup["e"].tolist(); eL = st.inf["e"].tolist()
    Xu = [math.exp(v) for v in bounds.x_up]; Yu = [math.exp(v) for v in bounds.y_up]
    Xl = [math.exp(v) for v in bounds.x_lo]; Yl = [math.exp(v) for v in bounds.y_lo]
    tp, tm, dp, dm = st.tau_plus, st.tau_minus, st.delta_plus, st.delta_minus
    xp, xm, ep, em = st.xi_plus, st.xi_minus, st.eta_plus, st.eta_minus
    tD, dD, xD, eD = st.tau_delta, st.delta_delta, st.xi_delta, st.eta_delta

    def colsum_a(i, which):
        s = 0.0
        for l in range(n):
            s += which[l][i]
        return s

    def colsum_e(j, which):
        s = 0.0
        for h in range(m):
            s += which[h][j]
        return s

    # sum over all (j, i) of d_ji^U e^{x_i^up}, and of c_ij^U e^{y_j^up}
    all_dx = 0.0
    for j in range(m):
        for i in range(n):
            all_dx += dU[j][i] * Xu[i]
    all_cy = 0.0
    for i in range(n):
        for j in range(m):
            all_cy += cU[i][j] * Yu[j]

    gx = []
    for i in range(n):
        A = colsum_a(i, aU) * Xu[i]
        cy = 0.0
        for j in range(m):
            cy += cU[i][j] * Yu[j]
        g = colsum_a(i, aL) * Xl[i]
        g -= 2 * mu * A * A
        g -= (2 * mu * A + 1) * A * A * (2 * tp - tm) / (1 - tD)
        g -= (2 * mu * A + 1) * cy * all_dx * (xp + dp - xm) / (1 - xD)
        for j in range(m):
            E = colsum_e(j, eU) * Yu[j]
            w = dU[j][i] * Xu[i] * (2 * mu * E + 1)
            g -= w
            g -= w * E * (ep + xp - xm) / (1 - xD)
            g -= w * A * (tp + xp - tm) / (1 - tD)
        gx.append(g)

    gy = []
    for j in range(m):
        E = colsum_e(j, eU) * Yu[j]
        dx = 0.0
        for i in range(n):
            dx += dU[j][i] * Xu[i]
        g = colsum_e(j, eL) * Yl[j]
        g -= 2 * mu * E * E
        g -= (2 * mu * E + 1) * E * E * (2 * ep - em) / (1 - eD)
        g -= (2 * mu * E + 1) * dx * all_cy * (dp + ep - em) / (1 - dD)
        for i in range(n):
            A = colsum_a(i, aU) * Xu[i]
            w = cU[i][j] * Yu[j] * (2 * mu * A + 1)
            g -= w
            g -= w * A * (tp + dp - dm) / (1 - dD)
            g -= w * E * (ep + dp - em) / (1 - eD)
        gy.append(g)
    return gx, gy
