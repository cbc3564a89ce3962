"""Pure numpy implementation of the sparse linear-model kernels.

Mirrors ``_kernels.pyx`` function for function; used when the compiled module
is unavailable or ``INFPROJ_PURE_PYTHON=1``. Results agree with the compiled
path up to floating-point summation order.
"""
import numpy as np

LOGISTIC = 0
TRUNCATED = 1


def loss_dloss(margins, kind, alpha):
    """Per-sample loss and derivative w.r.t. the signed margin ``label * <x, a>``."""
    m = np.asarray(margins, dtype=np.float64)
    e = np.exp(-np.abs(m))
    pos = m >= 0
    loss = np.where(pos, np.log1p(e), -m + np.log1p(e))
    dloss = -np.where(pos, e / (1.0 + e), 1.0 / (1.0 + e))
    if kind == TRUNCATED:
        dloss = dloss / (1.0 + loss / alpha)
        loss = alpha * np.log1p(loss / alpha)
    return loss, dloss


def _gather(indptr, indices, data, rows):
    starts = indptr[rows]
    lens = indptr[rows + 1] - starts
    seg = np.repeat(np.arange(rows.size), lens)
    offs = np.arange(int(lens.sum())) - np.repeat(np.cumsum(lens) - lens, lens)
    pos = np.repeat(starts, lens) + offs
    return seg, indices[pos], data[pos]


def _margins(seg, cols, vals, nrows, labels_r, x):
    return np.bincount(seg, weights=vals * x[cols], minlength=nrows) * labels_r


def batch_losses(indptr, indices, data, labels, rows, x, kind, alpha):
    rows = np.asarray(rows, dtype=np.int64)
    seg, cols, vals = _gather(indptr, indices, data, rows)
    m = _margins(seg, cols, vals, rows.size, labels[rows], x)
    return loss_dloss(m, kind, alpha)[0]


def accumulate_grad(indptr, indices, data, labels, rows, x, kind, alpha, a, b, weights, out):
    """``out += sum_k w_k (a + b l_k) grad l_k(x)``; returns ``(sum l_k, sum l_k^2)``."""
    rows = np.asarray(rows, dtype=np.int64)
    seg, cols, vals = _gather(indptr, indices, data, rows)
    lab = labels[rows]
    m = _margins(seg, cols, vals, rows.size, lab, x)
    loss, dloss = loss_dloss(m, kind, alpha)
    coef = (a + b * loss) * dloss * lab
    if weights is not None:
        coef = coef * weights
    out += np.bincount(cols, weights=coef[seg] * vals, minlength=out.size)
    return float(loss.sum()), float(np.dot(loss, loss))


def _mean_grad(indptr, indices, data, labels, rows, x, kind, alpha, a, b, d):
    g = np.zeros(d)
    accumulate_grad(indptr, indices, data, labels, rows, x, kind, alpha, a, b, None, g)
    g /= rows.size
    return g


def spg_x_stage(indptr, indices, data, labels, kind, alpha, lam, z1, xk, yk,
                gamma, etas, rows_g, rows_l, lower, upper):
    """Run SPG on the linearized x-subproblem of the variance objective.

    Stochastic gradient at iteration t: batch mean over ``rows_g[t]`` of
    ``(1 + lam l_i(z)) grad l_i(z)`` minus ``lam * yk`` times the batch mean over
    ``rows_l[t]`` of ``grad l_j(xk)``. A single-row draw array is reused for every t.
    Returns the t-weighted average of z_1..z_T.
    """
    d = z1.size
    T = etas.size
    z = z1.copy()
    acc = np.zeros(d)
    ell_const = None
    if rows_l.shape[0] == 1:
        ell_const = lam * yk * _mean_grad(indptr, indices, data, labels, rows_l[0], xk, kind, alpha, 1.0, 0.0, d)
    for t in range(T):
        acc += (t + 1) * z
        rg = rows_g[t if rows_g.shape[0] > 1 else 0]
        grad = _mean_grad(indptr, indices, data, labels, rg, z, kind, alpha, 1.0, lam, d)
        if ell_const is None:
            grad -= lam * yk * _mean_grad(indptr, indices, data, labels, rows_l[t], xk, kind, alpha, 1.0, 0.0, d)
        else:
            grad -= ell_const
        inv = 1.0 / etas[t]
        z = (gamma * z1 + inv * z - grad) / (gamma + inv)
        np.clip(z, lower, upper, out=z)
    return acc / (0.5 * T * (T + 1))


def spg_y_stage(indptr, indices, data, labels, kind, alpha, lam, x, y1, mu, etas, rows, lower, upper):
    """SPG on the scalar y-subproblem: gradient ``lam * y - lam * mean l_j(x)``."""
    T = etas.size
    if rows.shape[0] == 1:
        means = np.full(T, batch_losses(indptr, indices, data, labels, rows[0], x, kind, alpha).mean())
    else:
        flat = batch_losses(indptr, indices, data, labels, rows.ravel(), x, kind, alpha)
        means = flat.reshape(rows.shape).mean(axis=1)
    y = float(y1)
    acc = 0.0
    for t in range(T):
        acc += (t + 1) * y
        grad = lam * y - lam * means[t]
        inv = 1.0 / etas[t]
        y = (mu * y1 + inv * y - grad) / (mu + inv)
        y = min(max(y, lower), upper)
    return acc / (0.5 * T * (T + 1))
