"""Brute-force reference computations, independent of the package code paths."""
import numpy as np
from scipy.optimize import minimize, minimize_scalar


def scalar_objective(t, g, z, kappa, q):
    return g * (t - z) ** 2 + kappa * np.abs(t) ** q


def grid_prox_min(g, z, kappa, q, n=1_000_000):
    """Minimum of ``g (t - z)^2 + kappa |t|^q`` from a dense grid on
    ``[-2|z|-1, 2|z|+1]``, the kink ``t = 0``, and golden-section refinement
    around the best grid point. Returns ``(t_min, f_min)``."""
    span = 2 * abs(z) + 1
    t = np.linspace(-span, span, n)
    f = scalar_objective(t, g, z, kappa, q)
    i = int(np.argmin(f))
    best_t, best_f = t[i], f[i]
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, n - 1)]
    if lo < 0.0 < hi:
        # kink inside the bracket: refine each smooth side separately
        brackets = [(lo, 0.0), (0.0, hi)]
    else:
        brackets = [(lo, hi)]
    for a, b in brackets:
        r = minimize_scalar(lambda s: scalar_objective(s, g, z, kappa, q),
                            bounds=(a, b), method="bounded", options={"xatol": 1e-14})
        if r.fun < best_f:
            best_t, best_f = r.x, r.fun
    f0 = scalar_objective(0.0, g, z, kappa, q)
    if f0 < best_f:
        best_t, best_f = 0.0, f0
    return float(best_t), float(best_f)


def dense_objective(theta, theta_tilde, g, kappa, q):
    """Q evaluated by explicit double loop (second implementation)."""
    p = len(theta)
    quad = 0.0
    for i in range(p):
        for j in range(p):
            quad += (theta[i] - theta_tilde[i]) * g[i][j] * (theta[j] - theta_tilde[j])
    pen = sum(kappa[j] * abs(theta[j]) ** q for j in range(p))
    return quad + pen


def grid_lsa_min(theta_tilde, g, kappa, q, step=None, n_axis=200_001):
    """Global minimum of the LSA objective for ``p <= 2`` by brute force.

    The minimiser lies within radius ``sqrt(Q(0) / lambda_min)`` of
    ``theta_tilde``. We search a 2-D grid over that disc's bounding box, 1-D
    fine grids on both coordinate axes (where sparse minima sit), plus the
    origin, then polish the best candidates with Nelder-Mead (off-axis) or
    bounded scalar search (on-axis).
    """
    tt = np.asarray(theta_tilde, float)
    g = np.asarray(g, float)
    kappa = np.asarray(kappa, float)
    p = tt.size

    def Q(th):
        d = th - tt
        return float(d @ g @ d + np.sum(kappa * np.abs(th) ** q))

    lam_min = np.linalg.eigvalsh(g)[0]
    R = np.sqrt(Q(np.zeros(p)) / lam_min) + 1e-9
    cands = [(Q(np.zeros(p)), np.zeros(p))]

    if p == 1:
        t = np.linspace(tt[0] - R, tt[0] + R, n_axis)
        f = g[0, 0] * (t - tt[0]) ** 2 + kappa[0] * np.abs(t) ** q
        i = int(np.argmin(f))
        a, b = t[max(i - 1, 0)], t[min(i + 1, t.size - 1)]
        for lo, hi in ([(a, 0.0), (0.0, b)] if a < 0.0 < b else [(a, b)]):
            r = minimize_scalar(lambda s: Q(np.array([s])), bounds=(lo, hi),
                                method="bounded", options={"xatol": 1e-14})
            cands.append((r.fun, np.array([r.x])))
        cands.append((f[i], np.array([t[i]])))
        return min(cands, key=lambda c: c[0])

    step = step or R / 400
    ax = [np.arange(tt[k] - R, tt[k] + R + step, step) for k in range(2)]
    X, Y = np.meshgrid(ax[0], ax[1], indexing="ij")
    d0, d1 = X - tt[0], Y - tt[1]
    F = (g[0, 0] * d0 ** 2 + 2 * g[0, 1] * d0 * d1 + g[1, 1] * d1 ** 2
         + kappa[0] * np.abs(X) ** q + kappa[1] * np.abs(Y) ** q)
    flat = np.argsort(F, axis=None)[:5]
    for idx in flat:
        i, j = np.unravel_index(idx, F.shape)
        x0 = np.array([X[i, j], Y[i, j]])
        r = minimize(Q, x0, method="Nelder-Mead",
                     options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
        cands.append((r.fun, r.x))
        cands.append((F[i, j], x0))
    # coordinate axes: theta_k = 0
    for k in range(2):
        o = 1 - k
        t = np.linspace(tt[o] - R, tt[o] + R, n_axis)

        def q_axis(s, k=k, o=o):
            th = np.zeros(2)
            th[o] = s
            return Q(th)

        dd = np.zeros((t.size, 2))
        dd[:, o] = t
        dd -= tt
        f = np.einsum("ij,jk,ik->i", dd, g, dd) + kappa[o] * np.abs(t) ** q
        i = int(np.argmin(f))
        a, b = t[max(i - 1, 0)], t[min(i + 1, t.size - 1)]
        for lo, hi in ([(a, 0.0), (0.0, b)] if a < 0.0 < b else [(a, b)]):
            r = minimize_scalar(q_axis, bounds=(lo, hi), method="bounded",
                                options={"xatol": 1e-14})
            th = np.zeros(2)
            th[o] = r.x
            cands.append((r.fun, th))
    return min(cands, key=lambda c: c[0])


def central_gradient(f, x, h=1e-5):
    x = np.asarray(x, float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def central_jacobian(fvec, x, h=1e-5):
    x = np.asarray(x, float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((fvec(x + e) - fvec(x - e)) / (2 * h))
    return np.array(cols).T


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))
