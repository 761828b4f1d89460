"""Independent brute-force implementations used as test oracles.

Everything here is deliberately naive (double loops, dense matrices,
explicit Gram inversion) and shares no code with the package internals.
"""

import numpy as np


def column_means_loop(x):
    """(T, K) column means of an (N, T, K) stack via explicit loops."""
    n, t, k = x.shape
    out = np.zeros((t, k))
    for s in range(t):
        for j in range(k):
            acc = 0.0
            for i in range(n):
                acc += x[i, s, j]
            out[s, j] = acc / n
    return out


def dense_annihilator(basis):
    """I - B (B'B)^+ B' as a dense matrix."""
    t = basis.shape[0]
    return np.eye(t) - basis @ np.linalg.pinv(basis.T @ basis) @ basis.T


def masked_design(x, q, gamma, selection, geq=False):
    """[x | masked selected columns] with the inclusive indicator."""
    ind = (q >= gamma) if geq else (q <= gamma)
    w = x[:, np.asarray(selection, dtype=bool)] * ind[:, None]
    return np.hstack([x, w])


def ols_via_gram(z, y):
    """Normal equations solved by explicit Gram inversion."""
    gram = z.T @ z
    theta = np.linalg.inv(gram) @ (z.T @ y)
    resid = y - z @ theta
    return theta, float(resid @ resid)


def threshold_search_loop(x, y, q, basis, gammas, selection, min_per_regime, geq=False):
    """Per-gamma projected OLS via lstsq on dense-projected data.

    Returns (gamma_hat, rss_hat, rss_profile with NaN at infeasible points).
    """
    m = dense_annihilator(basis) if basis.shape[1] else np.eye(len(y))
    t = len(y)
    rss = np.full(len(gammas), np.nan)
    for j, g in enumerate(gammas):
        ind = (q >= g) if geq else (q <= g)
        n_low = int(ind.sum())
        if n_low < min_per_regime or t - n_low < min_per_regime:
            continue
        z = masked_design(x, q, g, selection, geq)
        zt = m @ z
        yt = m @ y
        theta, _, rank, _ = np.linalg.lstsq(zt, yt, rcond=None)
        if rank < z.shape[1]:
            continue
        r = yt - zt @ theta
        rss[j] = r @ r
    best = int(np.nanargmin(rss))
    return float(gammas[best]), float(rss[best]), rss


def pooled_delta_loop(panel_x, panel_y, panel_q, basis, gamma, selection):
    """Accumulate-then-solve pooled regime-difference estimate.

    For each unit, residualise the masked regressors and the outcome on
    [basis, averaged masked regressors, own regressors] using a dense
    annihilator, then solve the summed normal equations.
    """
    n, t, k = panel_x.shape
    sel = np.asarray(selection, dtype=bool)
    w_all = [panel_x[i][:, sel] * (panel_q[:, i] <= gamma)[:, None] for i in range(n)]
    w_bar = np.mean(w_all, axis=0)
    num = 0.0
    den = 0.0
    for i in range(n):
        zstar = np.hstack([basis, w_bar, panel_x[i]])
        m = dense_annihilator(zstar)
        wm = m @ w_all[i]
        den = den + w_all[i].T @ wm
        num = num + wm.T @ panel_y[:, i]
    return np.linalg.solve(den, np.atleast_1d(num))


def hac_covariance_loop(z, resid, bandwidth):
    """Bartlett-kernel sandwich with explicit double loop over lags."""
    t, p = z.shape
    sigma = z.T @ z / t
    s = np.zeros((p, p))
    for a in range(t):
        s += resid[a] ** 2 * np.outer(z[a], z[a]) / t
    for j in range(1, t):
        w = 1.0 - j / bandwidth
        if w <= 0:
            break
        sj = np.zeros((p, p))
        for a in range(j, t):
            sj += resid[a] * resid[a - j] * np.outer(z[a], z[a - j]) / t
        s += w * (sj + sj.T)
    sig_inv = np.linalg.inv(sigma)
    return sig_inv @ s @ sig_inv


def sample_skewness(v):
    v = np.asarray(v, dtype=float)
    c = v - v.mean()
    m2 = np.mean(c**2)
    return float(np.mean(c**3) / m2**1.5)


def sample_excess_kurtosis(v):
    v = np.asarray(v, dtype=float)
    c = v - v.mean()
    m2 = np.mean(c**2)
    return float(np.mean(c**4) / m2**2 - 3.0)
