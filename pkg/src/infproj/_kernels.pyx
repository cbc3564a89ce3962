# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sparse linear-model kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, fabs

cnp.import_array()

cdef extern from *:
    """
    #define INFPROJ_PREFETCH(p) __builtin_prefetch((const void*)(p))
    """
    void INFPROJ_PREFETCH(const void* p) noexcept nogil

LOGISTIC = 0
TRUNCATED = 1


cdef inline void _loss(double m, int kind, double alpha, double* l, double* dl) noexcept nogil:
    cdef double e = exp(-fabs(m))
    if m >= 0:
        l[0] = log1p(e)
        dl[0] = -e / (1.0 + e)
    else:
        l[0] = -m + log1p(e)
        dl[0] = -1.0 / (1.0 + e)
    if kind == 1:
        dl[0] = dl[0] / (1.0 + l[0] / alpha)
        l[0] = alpha * log1p(l[0] / alpha)


cdef inline double _margin(const long[:] indptr, const long[:] indices, const double[:] data,
                           long r, const double[:] x) noexcept nogil:
    cdef double s = 0.0
    cdef long p
    for p in range(indptr[r], indptr[r + 1]):
        s += data[p] * x[indices[p]]
    return s


def loss_dloss(margins, int kind, double alpha):
    cdef double[:] m = np.ascontiguousarray(margins, dtype=np.float64).ravel()
    cdef Py_ssize_t k, n = m.shape[0]
    out_l = np.empty(n)
    out_d = np.empty(n)
    cdef double[:] ol = out_l
    cdef double[:] od = out_d
    cdef double l, dl
    for k in range(n):
        _loss(m[k], kind, alpha, &l, &dl)
        ol[k] = l
        od[k] = dl
    return out_l, out_d


def batch_losses(const long[:] indptr, const long[:] indices, const double[:] data,
                 const double[:] labels, const long[:] rows, const double[:] x,
                 int kind, double alpha):
    cdef Py_ssize_t k, n = rows.shape[0]
    out = np.empty(n)
    cdef double[:] o = out
    cdef double l, dl
    cdef long r
    with nogil:
        for k in range(n):
            r = rows[k]
            _loss(labels[r] * _margin(indptr, indices, data, r, x), kind, alpha, &l, &dl)
            o[k] = l
    return out


cdef inline void _prefetch_heads(const long[:] indptr, const double[:] labels,
                                 const long[:] rows) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(rows.shape[0]):
        INFPROJ_PREFETCH(&indptr[rows[k]])
        INFPROJ_PREFETCH(&labels[rows[k]])


cdef inline void _prefetch_bodies(const long[:] indptr, const long[:] indices, const double[:] data,
                                  const long[:] rows) noexcept nogil:
    # sampled rows are scattered over the dataset; pull them in one step ahead
    cdef Py_ssize_t k
    cdef long a, e
    for k in range(rows.shape[0]):
        a = indptr[rows[k]]
        e = indptr[rows[k] + 1]
        while a < e:
            INFPROJ_PREFETCH(&indices[a])
            INFPROJ_PREFETCH(&data[a])
            a += 8


cdef inline void _prefetch_ahead(const long[:] indptr, const long[:] indices, const double[:] data,
                                 const double[:] labels, const long[:, :] rows, Py_ssize_t t) noexcept nogil:
    if t + 4 < rows.shape[0]:
        _prefetch_heads(indptr, labels, rows[t + 4])
    if t + 2 < rows.shape[0]:
        _prefetch_bodies(indptr, indices, data, rows[t + 2])


cdef void _accumulate(const long[:] indptr, const long[:] indices, const double[:] data,
                      const double[:] labels, const long[:] rows, const double[:] x,
                      int kind, double alpha, double a, double b, const double[:] weights,
                      bint has_w, double scale, double[:] out, double* s1, double* s2) noexcept nogil:
    cdef Py_ssize_t k
    cdef long r, p
    cdef double l, dl, c
    s1[0] = 0.0
    s2[0] = 0.0
    for k in range(rows.shape[0]):
        r = rows[k]
        _loss(labels[r] * _margin(indptr, indices, data, r, x), kind, alpha, &l, &dl)
        s1[0] += l
        s2[0] += l * l
        c = (a + b * l) * dl * labels[r] * scale
        if has_w:
            c *= weights[k]
        for p in range(indptr[r], indptr[r + 1]):
            out[indices[p]] += c * data[p]


def accumulate_grad(const long[:] indptr, const long[:] indices, const double[:] data,
                    const double[:] labels, const long[:] rows, const double[:] x,
                    int kind, double alpha, double a, double b, weights, double[:] out):
    cdef double s1, s2
    cdef const double[:] w
    cdef bint has_w = weights is not None
    if has_w:
        w = np.ascontiguousarray(weights, dtype=np.float64)
    else:
        w = x
    _accumulate(indptr, indices, data, labels, rows, x, kind, alpha, a, b, w, has_w, 1.0,
                out, &s1, &s2)
    return s1, s2


def spg_x_stage(const long[:] indptr, const long[:] indices, const double[:] data,
                const double[:] labels, int kind, double alpha, double lam,
                const double[:] z1, const double[:] xk, double yk, double gamma,
                const double[:] etas, const long[:, :] rows_g, const long[:, :] rows_l,
                double lower, double upper):
    cdef Py_ssize_t d = z1.shape[0]
    cdef Py_ssize_t T = etas.shape[0]
    cdef Py_ssize_t t, j
    cdef double s1, s2, inv, v
    cdef bint const_ell = rows_l.shape[0] == 1
    cdef bint const_g = rows_g.shape[0] == 1
    z_arr = np.array(z1, dtype=np.float64)
    acc_arr = np.zeros(d)
    grad_arr = np.zeros(d)
    ell_arr = np.zeros(d)
    cdef double[:] z = z_arr
    cdef double[:] acc = acc_arr
    cdef double[:] grad = grad_arr
    cdef double[:] ell = ell_arr
    cdef const double[:] noweights = z1
    with nogil:
        if const_ell:
            _accumulate(indptr, indices, data, labels, rows_l[0], xk, kind, alpha, 1.0, 0.0,
                        noweights, False, lam * yk / rows_l.shape[1], ell, &s1, &s2)
        for t in range(T):
            if not const_g:
                _prefetch_ahead(indptr, indices, data, labels, rows_g, t)
            if not const_ell:
                _prefetch_ahead(indptr, indices, data, labels, rows_l, t)
            for j in range(d):
                acc[j] += (t + 1) * z[j]
                grad[j] = -ell[j]
            if const_g:
                _accumulate(indptr, indices, data, labels, rows_g[0], z, kind, alpha, 1.0, lam,
                            noweights, False, 1.0 / rows_g.shape[1], grad, &s1, &s2)
            else:
                _accumulate(indptr, indices, data, labels, rows_g[t], z, kind, alpha, 1.0, lam,
                            noweights, False, 1.0 / rows_g.shape[1], grad, &s1, &s2)
            if not const_ell:
                _accumulate(indptr, indices, data, labels, rows_l[t], xk, kind, alpha, 1.0, 0.0,
                            noweights, False, -lam * yk / rows_l.shape[1], grad, &s1, &s2)
            inv = 1.0 / etas[t]
            for j in range(d):
                v = (gamma * z1[j] + inv * z[j] - grad[j]) / (gamma + inv)
                if v < lower:
                    v = lower
                elif v > upper:
                    v = upper
                z[j] = v
        for j in range(d):
            acc[j] /= 0.5 * T * (T + 1)
    return acc_arr


def spg_y_stage(const long[:] indptr, const long[:] indices, const double[:] data,
                const double[:] labels, int kind, double alpha, double lam,
                const double[:] x, double y1, double mu, const double[:] etas,
                const long[:, :] rows, double lower, double upper):
    cdef Py_ssize_t T = etas.shape[0]
    cdef Py_ssize_t b = rows.shape[1]
    cdef Py_ssize_t t, k
    cdef double y = y1, acc = 0.0, mean_l = 0.0, l, dl, grad, inv
    cdef bint const_rows = rows.shape[0] == 1
    with nogil:
        if const_rows:
            for k in range(b):
                _loss(labels[rows[0, k]] * _margin(indptr, indices, data, rows[0, k], x),
                      kind, alpha, &l, &dl)
                mean_l += l
            mean_l /= b
        for t in range(T):
            acc += (t + 1) * y
            if not const_rows:
                _prefetch_ahead(indptr, indices, data, labels, rows, t)
                mean_l = 0.0
                for k in range(b):
                    _loss(labels[rows[t, k]] * _margin(indptr, indices, data, rows[t, k], x),
                          kind, alpha, &l, &dl)
                    mean_l += l
                mean_l /= b
            grad = lam * y - lam * mean_l
            inv = 1.0 / etas[t]
            y = (mu * y1 + inv * y - grad) / (mu + inv)
            if y < lower:
                y = lower
            elif y > upper:
                y = upper
    return acc / (0.5 * T * (T + 1))
